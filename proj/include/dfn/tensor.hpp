#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "dfn/common.hpp"

namespace dfn {

// A named parameter tensor. `v` holds values, `g` the gradient accumulator
// for the current optimizer step. Frozen tensors (the word table) keep an
// empty `g` and are skipped by the optimizer.
template <class T>
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> v;
  std::vector<T> g;
  bool frozen = false;

  size_t size() const { return v.size(); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

template <class T>
class ParamSet {
 public:
  Tensor<T>* add(const std::string& name, std::vector<int> shape,
                 bool frozen = false) {
    if (index_.count(name)) throw std::runtime_error("duplicate tensor " + name);
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    store_.emplace_back();
    Tensor<T>& t = store_.back();
    t.name = name;
    t.shape = std::move(shape);
    t.v.assign(n, T(0));
    if (!frozen) t.g.assign(n, T(0));
    t.frozen = frozen;
    index_[name] = registry_.size();
    registry_.push_back(&t);
    return &t;
  }

  Tensor<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : registry_[it->second];
  }
  const Tensor<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : registry_[it->second];
  }

  size_t count() const { return registry_.size(); }
  Tensor<T>* at(size_t i) { return registry_[i]; }
  const Tensor<T>* at(size_t i) const { return registry_[i]; }
  size_t index_of(const Tensor<T>* t) const {
    auto it = index_.find(t->name);
    assert(it != index_.end());
    return it->second;
  }

  void zero_grad() {
    for (Tensor<T>* t : registry_)
      if (!t->frozen) std::fill(t->g.begin(), t->g.end(), T(0));
  }

  size_t trainable_size() const {
    size_t n = 0;
    for (const Tensor<T>* t : registry_)
      if (!t->frozen) n += t->size();
    return n;
  }

 private:
  std::deque<Tensor<T>> store_;  // stable addresses
  std::vector<Tensor<T>*> registry_;
  std::unordered_map<std::string, size_t> index_;
};

// Per-tensor gradient buffer used for deterministic batch reduction: each
// fixed-size chunk of a batch accumulates here, then chunks are folded into
// Tensor::g in chunk order.
template <class T>
struct GradBuffer {
  std::vector<std::vector<T>> g;

  void match(const ParamSet<T>& ps) {
    g.resize(ps.count());
    for (size_t i = 0; i < ps.count(); ++i) {
      const Tensor<T>* t = ps.at(i);
      g[i].assign(t->frozen ? 0 : t->size(), T(0));
    }
  }
  void zero() {
    for (auto& v : g) std::fill(v.begin(), v.end(), T(0));
  }
};

template <class T>
void fold_grads(ParamSet<T>& ps, const GradBuffer<T>& buf) {
  for (size_t i = 0; i < ps.count(); ++i) {
    Tensor<T>* t = ps.at(i);
    if (t->frozen) continue;
    const auto& src = buf.g[i];
    for (size_t k = 0; k < src.size(); ++k) t->g[k] += src[k];
  }
}

// ---- ADAM -----------------------------------------------------------------

template <class T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  long step = 0;
  // beta1=0.9, beta2=0.999, eps=1e-8
  void match(const ParamSet<T>& ps) {
    m.resize(ps.count());
    v.resize(ps.count());
    for (size_t i = 0; i < ps.count(); ++i) {
      size_t n = ps.at(i)->frozen ? 0 : ps.at(i)->size();
      m[i].assign(n, T(0));
      v[i].assign(n, T(0));
    }
  }
};

// One ADAM step over every trainable tensor, reading Tensor::g.
template <class T>
void adam_step(ParamSet<T>& ps, AdamState<T>& st, double lr) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  st.step += 1;
  const double c1 = 1.0 - std::pow(b1, double(st.step));
  const double c2 = 1.0 - std::pow(b2, double(st.step));
  for (size_t i = 0; i < ps.count(); ++i) {
    Tensor<T>* t = ps.at(i);
    if (t->frozen) continue;
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (size_t k = 0; k < t->size(); ++k) {
      double g = double(t->g[k]);
      double mk = b1 * double(m[k]) + (1.0 - b1) * g;
      double vk = b2 * double(v[k]) + (1.0 - b2) * g * g;
      m[k] = T(mk);
      v[k] = T(vk);
      double mhat = mk / c1;
      double vhat = vk / c2;
      t->v[k] = T(double(t->v[k]) - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

// Uniform +-1/sqrt(fan_in) weight fill.
template <class T>
void init_uniform_fanin(Tensor<T>* t, int fan_in, SplitMix64& rng) {
  double lim = 1.0 / std::sqrt(double(fan_in > 0 ? fan_in : 1));
  for (auto& x : t->v) x = T(rng.next_range(-lim, lim));
}

}  // namespace dfn
