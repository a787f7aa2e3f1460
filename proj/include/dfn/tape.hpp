#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dfn/tensor.hpp"

namespace dfn {

using NodeId = int32_t;

namespace kernels {

template <class T>
inline T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

// Stable softmax with max subtraction.
template <class T>
inline void softmax(const T* x, T* y, int n) {
  T mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  T s = 0;
  for (int i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    s += y[i];
  }
  for (int i = 0; i < n; ++i) y[i] /= s;
}

template <class T>
inline void log_softmax(const T* x, T* y, int n) {
  T mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  T s = 0;
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  T lse = std::log(s);
  for (int i = 0; i < n; ++i) y[i] = x[i] - mx - lse;
}

// Guarded cosine: zero when either norm is below 1e-12; result clamped to
// [-1, 1] exactly.
template <class T>
inline T cos_guarded(const T* a, const T* b, int n) {
  T dot = 0, na = 0, nb = 0;
  for (int i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < T(1e-12) || nb < T(1e-12)) return T(0);
  T c = dot / (na * nb);
  return std::clamp(c, T(-1), T(1));
}

}  // namespace kernels

enum class Op : uint8_t {
  Const,      // leaf, values in arena
  View,       // leaf, values external (word vectors), no grad
  Param,      // leaf, values external (tensor), grad exported
  Add,        // a + b
  Sub,        // a - b
  Mul,        // a * b elementwise
  Scale,      // taux[0] * a
  Sigmoid,
  Tanh,
  Relu,
  Affine,     // iaux: [rows, cols, W, x, bias|-1]
  Concat,     // iaux: [count, ids...]
  Slice,      // a[b .. b+len)
  Dot,        // scalar a.b
  CosG,       // guarded cosine, taux: [dot, na, nb]
  Softmax,
  LogSoftmax,
  Pick,       // scalar a[b]
  SumVec,     // scalar sum(a)
  DivScalar,  // a / scalar b, guarded; taux: [guard_flag]
  MpG,        // multi-perspective cosine; a=W(param), b=v1, c=v2; iaux:[N,d]
  MaxList,    // elementwise max; iaux: [count, ids..., winners(len)...]
  AttnRead,   // sum_i w[i]*m_i; a=weights; iaux: [count, ids...]
  WSum,       // scalar sum_k c_k * x_k; iaux: [count, ids...]; taux: coeffs
};

// Reverse-mode tape over small dense vectors. Values are computed eagerly at
// construction; backward() replays nodes in reverse. Values of Param/View
// nodes live outside the arena so parameters are never copied per sample.
template <class T>
class Tape {
 public:
  explicit Tape(ParamSet<T>* params = nullptr) : params_(params) {
    if (params_) param_nodes_.assign(params_->count(), -1);
  }

  void reset() {
    nodes_.clear();
    vals_.clear();
    grads_.clear();
    ipool_.clear();
    tpool_.clear();
    views_.clear();
    std::fill(param_nodes_.begin(), param_nodes_.end(), -1);
  }

  int size() const { return int(nodes_.size()); }

  std::span<const T> val(NodeId n) const {
    const Node& nd = nodes_[n];
    if (nd.op == Op::View || nd.op == Op::Param)
      return {views_[nd.a], size_t(nd.len)};
    return {vals_.data() + nd.off, size_t(nd.len)};
  }
  std::span<const T> grad(NodeId n) const {
    const Node& nd = nodes_[n];
    return {grads_.data() + nd.goff(), size_t(nd.len)};
  }
  T scalar(NodeId n) const { return val(n)[0]; }
  int len(NodeId n) const { return nodes_[n].len; }

  // ---- leaves ----

  NodeId constant(std::span<const T> v) {
    NodeId id = alloc(Op::Const, int(v.size()));
    std::copy(v.begin(), v.end(), out(id));
    return id;
  }
  NodeId constant(std::initializer_list<T> v) {
    return constant(std::span<const T>(v.begin(), v.size()));
  }
  NodeId zeros(int n) { return alloc(Op::Const, n); }

  // External read-only storage; caller keeps it alive. No gradient.
  NodeId view(const T* p, int n) {
    NodeId id = alloc_external(Op::View, n);
    nodes_[id].a = int(views_.size());
    views_.push_back(p);
    return id;
  }

  // One node per tensor per tape; gradients accumulate in the node slice and
  // are exported with export_grads().
  NodeId param(Tensor<T>* t) {
    size_t idx = params_->index_of(t);
    if (param_nodes_[idx] >= 0) return param_nodes_[idx];
    NodeId id = alloc_external(Op::Param, int(t->size()));
    nodes_[id].a = int(views_.size());
    views_.push_back(t->v.data());
    nodes_[id].b = int(idx);
    param_nodes_[idx] = id;
    return id;
  }

  // ---- elementwise / arithmetic ----

  NodeId add(NodeId a, NodeId b) {
    NodeId id = alloc(Op::Add, len(a), a, b);
    auto va = val(a), vb = val(b);
    T* y = out(id);
    for (int i = 0; i < len(a); ++i) y[i] = va[i] + vb[i];
    return id;
  }
  NodeId sub(NodeId a, NodeId b) {
    NodeId id = alloc(Op::Sub, len(a), a, b);
    auto va = val(a), vb = val(b);
    T* y = out(id);
    for (int i = 0; i < len(a); ++i) y[i] = va[i] - vb[i];
    return id;
  }
  NodeId mul(NodeId a, NodeId b) {
    NodeId id = alloc(Op::Mul, len(a), a, b);
    auto va = val(a), vb = val(b);
    T* y = out(id);
    for (int i = 0; i < len(a); ++i) y[i] = va[i] * vb[i];
    return id;
  }
  NodeId scale(NodeId a, T c) {
    NodeId id = alloc(Op::Scale, len(a), a);
    nodes_[id].taux = int(tpool_.size());
    tpool_.push_back(c);
    auto va = val(a);
    T* y = out(id);
    for (int i = 0; i < len(a); ++i) y[i] = c * va[i];
    return id;
  }
  NodeId sigmoid(NodeId a) {
    NodeId id = alloc(Op::Sigmoid, len(a), a);
    auto va = val(a);
    T* y = out(id);
    for (int i = 0; i < len(a); ++i) y[i] = kernels::sigmoid(va[i]);
    return id;
  }
  NodeId tanh_(NodeId a) {
    NodeId id = alloc(Op::Tanh, len(a), a);
    auto va = val(a);
    T* y = out(id);
    for (int i = 0; i < len(a); ++i) y[i] = std::tanh(va[i]);
    return id;
  }
  NodeId relu(NodeId a) {
    NodeId id = alloc(Op::Relu, len(a), a);
    auto va = val(a);
    T* y = out(id);
    for (int i = 0; i < len(a); ++i) y[i] = va[i] > T(0) ? va[i] : T(0);
    return id;
  }

  // y = W x + bias, W given row-major (rows x cols). W is any node (usually a
  // Param or a Slice of one). bias = -1 for none.
  NodeId affine(NodeId W, int rows, int cols, NodeId x, NodeId bias = -1) {
    assert(len(x) == cols && len(W) == rows * cols);
    NodeId id = alloc(Op::Affine, rows);
    int ia = int(ipool_.size());
    nodes_[id].iaux = ia;
    ipool_.insert(ipool_.end(), {rows, cols, W, x, bias});
    const T* w = val(W).data();
    const T* vx = val(x).data();
    T* y = out(id);
    for (int r = 0; r < rows; ++r) {
      T s = bias >= 0 ? val(bias)[r] : T(0);
      const T* wr = w + size_t(r) * cols;
      for (int c = 0; c < cols; ++c) s += wr[c] * vx[c];
      y[r] = s;
    }
    return id;
  }

  NodeId concat(std::span<const NodeId> parts) {
    int total = 0;
    for (NodeId p : parts) total += len(p);
    NodeId id = alloc(Op::Concat, total);
    nodes_[id].iaux = int(ipool_.size());
    ipool_.push_back(int(parts.size()));
    for (NodeId p : parts) ipool_.push_back(p);
    T* y = out(id);
    for (NodeId p : parts) {
      auto v = val(p);
      std::copy(v.begin(), v.end(), y);
      y += v.size();
    }
    return id;
  }
  NodeId concat2(NodeId a, NodeId b) {
    NodeId parts[2] = {a, b};
    return concat(std::span<const NodeId>(parts, 2));
  }

  NodeId slice(NodeId a, int off, int n) {
    assert(off + n <= len(a));
    NodeId id = alloc(Op::Slice, n, a, off);
    auto va = val(a);
    std::copy(va.begin() + off, va.begin() + off + n, out(id));
    return id;
  }

  NodeId dot(NodeId a, NodeId b) {
    NodeId id = alloc(Op::Dot, 1, a, b);
    auto va = val(a), vb = val(b);
    T s = 0;
    for (size_t i = 0; i < va.size(); ++i) s += va[i] * vb[i];
    out(id)[0] = s;
    return id;
  }

  NodeId cos(NodeId a, NodeId b) {
    NodeId id = alloc(Op::CosG, 1, a, b);
    auto va = val(a), vb = val(b);
    T dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < va.size(); ++i) {
      dot += va[i] * vb[i];
      na += va[i] * va[i];
      nb += vb[i] * vb[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    nodes_[id].taux = int(tpool_.size());
    tpool_.insert(tpool_.end(), {dot, na, nb});
    T c = (na < T(1e-12) || nb < T(1e-12)) ? T(0)
                                           : std::clamp(dot / (na * nb), T(-1), T(1));
    out(id)[0] = c;
    return id;
  }

  NodeId softmax(NodeId a) {
    NodeId id = alloc(Op::Softmax, len(a), a);
    kernels::softmax(val(a).data(), out(id), len(a));
    return id;
  }
  NodeId log_softmax(NodeId a) {
    NodeId id = alloc(Op::LogSoftmax, len(a), a);
    kernels::log_softmax(val(a).data(), out(id), len(a));
    return id;
  }
  NodeId pick(NodeId a, int i) {
    NodeId id = alloc(Op::Pick, 1, a, i);
    out(id)[0] = val(a)[i];
    return id;
  }
  NodeId sum_vec(NodeId a) {
    NodeId id = alloc(Op::SumVec, 1, a);
    T s = 0;
    for (T x : val(a)) s += x;
    out(id)[0] = s;
    return id;
  }

  // a / s with |s| < 1e-12 treated as a hard zero (value and gradient).
  NodeId div_scalar(NodeId a, NodeId s) {
    NodeId id = alloc(Op::DivScalar, len(a), a, s);
    T d = scalar(s);
    bool guarded = std::abs(d) < T(1e-12);
    nodes_[id].taux = int(tpool_.size());
    tpool_.push_back(guarded ? T(1) : T(0));
    T* y = out(id);
    auto va = val(a);
    for (int i = 0; i < len(a); ++i) y[i] = guarded ? T(0) : va[i] / d;
    return id;
  }

  // Multi-perspective cosine: y[k] = cos(W_k o v1, W_k o v2), W is N x d.
  NodeId mp_g(NodeId W, int N, int d, NodeId v1, NodeId v2) {
    assert(len(v1) == d && len(v2) == d && len(W) == N * d);
    NodeId id = alloc(Op::MpG, N, W, v1, v2);
    nodes_[id].iaux = int(ipool_.size());
    ipool_.insert(ipool_.end(), {N, d});
    nodes_[id].taux = int(tpool_.size());
    const T* w = val(W).data();
    const T* a = val(v1).data();
    const T* b = val(v2).data();
    T* y = out(id);
    for (int k = 0; k < N; ++k) {
      const T* wk = w + size_t(k) * d;
      T dot = 0, na = 0, nb = 0;
      for (int i = 0; i < d; ++i) {
        T u = wk[i] * a[i];
        T v = wk[i] * b[i];
        dot += u * v;
        na += u * u;
        nb += v * v;
      }
      na = std::sqrt(na);
      nb = std::sqrt(nb);
      tpool_.insert(tpool_.end(), {dot, na, nb});
      y[k] = (na < T(1e-12) || nb < T(1e-12))
                 ? T(0)
                 : std::clamp(dot / (na * nb), T(-1), T(1));
    }
    return id;
  }

  // Elementwise max over a list of equal-length nodes; lowest index wins ties.
  NodeId max_list(std::span<const NodeId> xs) {
    assert(!xs.empty());
    int n = len(xs[0]);
    NodeId id = alloc(Op::MaxList, n);
    int ia = int(ipool_.size());
    nodes_[id].iaux = ia;
    ipool_.push_back(int(xs.size()));
    for (NodeId x : xs) ipool_.push_back(x);
    int warg = int(ipool_.size());
    ipool_.resize(ipool_.size() + n, 0);
    T* y = out(id);
    {
      auto v0 = val(xs[0]);
      std::copy(v0.begin(), v0.end(), y);
    }
    for (size_t j = 1; j < xs.size(); ++j) {
      auto v = val(xs[j]);
      for (int i = 0; i < n; ++i)
        if (v[i] > y[i]) {
          y[i] = v[i];
          ipool_[warg + i] = int(j);
        }
    }
    return id;
  }

  // y = sum_i w[i] * m_i  (attention read / weighted combination)
  NodeId attn_read(NodeId w, std::span<const NodeId> ms) {
    assert(int(ms.size()) == len(w));
    int d = len(ms[0]);
    NodeId id = alloc(Op::AttnRead, d, w);
    nodes_[id].iaux = int(ipool_.size());
    ipool_.push_back(int(ms.size()));
    for (NodeId m : ms) ipool_.push_back(m);
    T* y = out(id);
    std::fill(y, y + d, T(0));
    auto vw = val(w);
    for (size_t i = 0; i < ms.size(); ++i) {
      auto vm = val(ms[i]);
      T c = vw[i];
      for (int k = 0; k < d; ++k) y[k] += c * vm[k];
    }
    return id;
  }

  // scalar sum_k c_k * x_k over scalar nodes with constant coefficients
  NodeId weighted_sum(std::span<const NodeId> xs, std::span<const T> cs) {
    assert(xs.size() == cs.size());
    NodeId id = alloc(Op::WSum, 1);
    nodes_[id].iaux = int(ipool_.size());
    ipool_.push_back(int(xs.size()));
    for (NodeId x : xs) ipool_.push_back(x);
    nodes_[id].taux = int(tpool_.size());
    tpool_.insert(tpool_.end(), cs.begin(), cs.end());
    T s = 0;
    for (size_t i = 0; i < xs.size(); ++i) s += cs[i] * scalar(xs[i]);
    out(id)[0] = s;
    return id;
  }

  // ---- backward ----

  void backward(NodeId root, T seed) {
    grads_.assign(vals_.size() + external_grad_, T(0));
    grads_[nodes_[root].goff()] += seed;
    for (int i = int(nodes_.size()) - 1; i >= 0; --i) back_one(i);
  }

  // Add parameter-leaf gradients into a buffer (one slot per tensor).
  void export_grads(GradBuffer<T>& buf) const {
    for (size_t idx = 0; idx < param_nodes_.size(); ++idx) {
      NodeId n = param_nodes_[idx];
      if (n < 0) continue;
      auto g = grad(n);
      auto& dst = buf.g[idx];
      if (dst.empty()) continue;  // frozen
      for (size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
    }
  }

 private:
  struct Node {
    Op op;
    int32_t off = 0;  // value offset (arena) and grad offset
    int32_t len = 0;
    int32_t a = -1, b = -1, c = -1;
    int32_t iaux = -1, taux = -1;
    int32_t goff() const { return off; }
  };

  NodeId alloc(Op op, int n, NodeId a = -1, NodeId b = -1, NodeId c = -1) {
    Node nd;
    nd.op = op;
    nd.len = n;
    nd.off = int(vals_.size());
    nd.a = a;
    nd.b = b;
    nd.c = c;
    vals_.resize(vals_.size() + size_t(n));
    nodes_.push_back(nd);
    return NodeId(nodes_.size() - 1);
  }

  // Param/View values live outside; grads (for Param) still need arena space.
  NodeId alloc_external(Op op, int n) {
    Node nd;
    nd.op = op;
    nd.len = n;
    nd.off = int(vals_.size());
    vals_.resize(vals_.size() + size_t(n), T(0));  // grad slot; value unused
    nodes_.push_back(nd);
    return NodeId(nodes_.size() - 1);
  }

  T* out(NodeId id) { return vals_.data() + nodes_[id].off; }
  T* gptr(NodeId id) { return grads_.data() + nodes_[id].goff(); }

  void back_one(int i) {
    Node& nd = nodes_[i];
    const T* gy = gptr(i);
    switch (nd.op) {
      case Op::Const:
      case Op::View:
      case Op::Param:
        break;
      case Op::Add: {
        T* ga = gptr(nd.a);
        T* gb = gptr(nd.b);
        for (int k = 0; k < nd.len; ++k) {
          ga[k] += gy[k];
          gb[k] += gy[k];
        }
        break;
      }
      case Op::Sub: {
        T* ga = gptr(nd.a);
        T* gb = gptr(nd.b);
        for (int k = 0; k < nd.len; ++k) {
          ga[k] += gy[k];
          gb[k] -= gy[k];
        }
        break;
      }
      case Op::Mul: {
        T* ga = gptr(nd.a);
        T* gb = gptr(nd.b);
        auto va = val(nd.a), vb = val(nd.b);
        for (int k = 0; k < nd.len; ++k) {
          ga[k] += gy[k] * vb[k];
          gb[k] += gy[k] * va[k];
        }
        break;
      }
      case Op::Scale: {
        T c = tpool_[nd.taux];
        T* ga = gptr(nd.a);
        for (int k = 0; k < nd.len; ++k) ga[k] += c * gy[k];
        break;
      }
      case Op::Sigmoid: {
        T* ga = gptr(nd.a);
        const T* y = vals_.data() + nd.off;
        for (int k = 0; k < nd.len; ++k) ga[k] += gy[k] * y[k] * (T(1) - y[k]);
        break;
      }
      case Op::Tanh: {
        T* ga = gptr(nd.a);
        const T* y = vals_.data() + nd.off;
        for (int k = 0; k < nd.len; ++k) ga[k] += gy[k] * (T(1) - y[k] * y[k]);
        break;
      }
      case Op::Relu: {
        T* ga = gptr(nd.a);
        const T* y = vals_.data() + nd.off;
        for (int k = 0; k < nd.len; ++k)
          if (y[k] > T(0)) ga[k] += gy[k];
        break;
      }
      case Op::Affine: {
        const int* ia = ipool_.data() + nd.iaux;
        int rows = ia[0], cols = ia[1];
        NodeId W = ia[2], x = ia[3], bias = ia[4];
        const T* w = val(W).data();
        const T* vx = val(x).data();
        T* gw = gptr(W);
        T* gx = gptr(x);
        for (int r = 0; r < rows; ++r) {
          T g = gy[r];
          if (g == T(0)) continue;
          const T* wr = w + size_t(r) * cols;
          T* gwr = gw + size_t(r) * cols;
          for (int c = 0; c < cols; ++c) {
            gwr[c] += g * vx[c];
            gx[c] += g * wr[c];
          }
        }
        if (bias >= 0) {
          T* gb = gptr(bias);
          for (int r = 0; r < rows; ++r) gb[r] += gy[r];
        }
        break;
      }
      case Op::Concat: {
        const int* ia = ipool_.data() + nd.iaux;
        int count = ia[0];
        int off = 0;
        for (int p = 0; p < count; ++p) {
          NodeId part = ia[1 + p];
          T* gp = gptr(part);
          int n = nodes_[part].len;
          for (int k = 0; k < n; ++k) gp[k] += gy[off + k];
          off += n;
        }
        break;
      }
      case Op::Slice: {
        T* ga = gptr(nd.a);
        for (int k = 0; k < nd.len; ++k) ga[nd.b + k] += gy[k];
        break;
      }
      case Op::Dot: {
        T g = gy[0];
        auto va = val(nd.a), vb = val(nd.b);
        T* ga = gptr(nd.a);
        T* gb = gptr(nd.b);
        for (size_t k = 0; k < va.size(); ++k) {
          ga[k] += g * vb[k];
          gb[k] += g * va[k];
        }
        break;
      }
      case Op::CosG: {
        const T* aux = tpool_.data() + nd.taux;
        T na = aux[1], nb = aux[2];
        if (na < T(1e-12) || nb < T(1e-12)) break;
        T g = gy[0];
        T c = vals_[nd.off];
        auto va = val(nd.a), vb = val(nd.b);
        T* ga = gptr(nd.a);
        T* gb = gptr(nd.b);
        T inv = T(1) / (na * nb);
        for (size_t k = 0; k < va.size(); ++k) {
          ga[k] += g * (vb[k] * inv - c * va[k] / (na * na));
          gb[k] += g * (va[k] * inv - c * vb[k] / (nb * nb));
        }
        break;
      }
      case Op::Softmax: {
        const T* y = vals_.data() + nd.off;
        T dotgy = 0;
        for (int k = 0; k < nd.len; ++k) dotgy += gy[k] * y[k];
        T* ga = gptr(nd.a);
        for (int k = 0; k < nd.len; ++k) ga[k] += y[k] * (gy[k] - dotgy);
        break;
      }
      case Op::LogSoftmax: {
        const T* y = vals_.data() + nd.off;
        T sg = 0;
        for (int k = 0; k < nd.len; ++k) sg += gy[k];
        T* ga = gptr(nd.a);
        for (int k = 0; k < nd.len; ++k) ga[k] += gy[k] - std::exp(y[k]) * sg;
        break;
      }
      case Op::Pick: {
        gptr(nd.a)[nd.b] += gy[0];
        break;
      }
      case Op::SumVec: {
        T* ga = gptr(nd.a);
        int n = nodes_[nd.a].len;
        for (int k = 0; k < n; ++k) ga[k] += gy[0];
        break;
      }
      case Op::DivScalar: {
        if (tpool_[nd.taux] != T(0)) break;  // guarded
        T s = val(nd.b)[0];
        const T* y = vals_.data() + nd.off;
        T* ga = gptr(nd.a);
        T* gs = gptr(nd.b);
        T acc = 0;
        for (int k = 0; k < nd.len; ++k) {
          ga[k] += gy[k] / s;
          acc += gy[k] * y[k];
        }
        gs[0] -= acc / s;
        break;
      }
      case Op::MpG: {
        const int* ia = ipool_.data() + nd.iaux;
        int N = ia[0], d = ia[1];
        const T* w = val(nd.a).data();
        const T* a = val(nd.b).data();
        const T* b = val(nd.c).data();
        T* gw = gptr(nd.a);
        T* ga = gptr(nd.b);
        T* gb = gptr(nd.c);
        const T* aux = tpool_.data() + nd.taux;
        const T* y = vals_.data() + nd.off;
        for (int k = 0; k < N; ++k) {
          T g = gy[k];
          T na = aux[3 * k + 1], nb = aux[3 * k + 2];
          if (g == T(0) || na < T(1e-12) || nb < T(1e-12)) continue;
          const T* wk = w + size_t(k) * d;
          T* gwk = gw + size_t(k) * d;
          T c = y[k];
          T inv = T(1) / (na * nb);
          T ia2 = T(1) / (na * na), ib2 = T(1) / (nb * nb);
          for (int i = 0; i < d; ++i) {
            T u = wk[i] * a[i];
            T v = wk[i] * b[i];
            T du = g * (v * inv - c * u * ia2);
            T dv = g * (u * inv - c * v * ib2);
            ga[i] += wk[i] * du;
            gb[i] += wk[i] * dv;
            gwk[i] += a[i] * du + b[i] * dv;
          }
        }
        break;
      }
      case Op::MaxList: {
        const int* ia = ipool_.data() + nd.iaux;
        int count = ia[0];
        const int* winners = ia + 1 + count;
        for (int k = 0; k < nd.len; ++k) {
          NodeId src = ia[1 + winners[k]];
          gptr(src)[k] += gy[k];
        }
        break;
      }
      case Op::AttnRead: {
        const int* ia = ipool_.data() + nd.iaux;
        int count = ia[0];
        auto vw = val(nd.a);
        T* gw = gptr(nd.a);
        for (int i = 0; i < count; ++i) {
          NodeId m = ia[1 + i];
          auto vm = val(m);
          T* gm = gptr(m);
          T c = vw[i];
          T acc = 0;
          for (int k = 0; k < nd.len; ++k) {
            gm[k] += c * gy[k];
            acc += gy[k] * vm[k];
          }
          gw[i] += acc;
        }
        break;
      }
      case Op::WSum: {
        const int* ia = ipool_.data() + nd.iaux;
        int count = ia[0];
        const T* cs = tpool_.data() + nd.taux;
        T g = gy[0];
        for (int k = 0; k < count; ++k) gptr(ia[1 + k])[0] += g * cs[k];
        break;
      }
    }
  }

  ParamSet<T>* params_;
  std::vector<Node> nodes_;
  std::vector<T> vals_;
  std::vector<T> grads_;
  std::vector<int> ipool_;
  std::vector<T> tpool_;
  std::vector<const T*> views_;
  std::vector<NodeId> param_nodes_;
  static constexpr int external_grad_ = 0;
};

}  // namespace dfn
