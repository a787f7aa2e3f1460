#pragma once

#include <span>
#include <vector>

#include "dfn/tape.hpp"

namespace dfn {

// Paired forward/backward activation streams, one node per position.
struct BiSeqN {
  std::vector<NodeId> fwd, bwd;
  int size() const { return int(fwd.size()); }
};

template <class T>
struct LstmP {
  Tensor<T>* Wx;  // [4H, D]   gate order: i, f, o, g
  Tensor<T>* Wh;  // [4H, H]
  Tensor<T>* b;   // [4H]
  int in = 0, hid = 0;
};

template <class T>
struct BiLstmP {
  LstmP<T> fwd, bwd;
};

template <class T>
struct GruP {
  Tensor<T>* Wx;  // [3H, D]   gate order: z, r, candidate
  Tensor<T>* Wh;  // [3H, H]
  Tensor<T>* b;   // [3H]
  int in = 0, hid = 0;
};

// Standard LSTM cell: i,f,o = sigmoid, g = tanh, c' = f*c + i*g,
// h' = o*tanh(c').
template <class T>
std::pair<NodeId, NodeId> lstm_cell(Tape<T>& tp, NodeId x, NodeId h, NodeId c,
                                    const LstmP<T>& p) {
  int H = p.hid;
  NodeId pre = tp.add(tp.affine(tp.param(p.Wx), 4 * H, p.in, x, tp.param(p.b)),
                      tp.affine(tp.param(p.Wh), 4 * H, H, h));
  NodeId i = tp.sigmoid(tp.slice(pre, 0, H));
  NodeId f = tp.sigmoid(tp.slice(pre, H, H));
  NodeId o = tp.sigmoid(tp.slice(pre, 2 * H, H));
  NodeId g = tp.tanh_(tp.slice(pre, 3 * H, H));
  NodeId c2 = tp.add(tp.mul(f, c), tp.mul(i, g));
  NodeId h2 = tp.mul(o, tp.tanh_(c2));
  return {h2, c2};
}

// Standard GRU: z,r = sigmoid, cand = tanh(Wx_c x + Wh_c (r*h) + b_c),
// h' = (1-z)*h + z*cand.
template <class T>
NodeId gru_cell(Tape<T>& tp, NodeId x, NodeId h, const GruP<T>& p) {
  int H = p.hid;
  NodeId Wx = tp.param(p.Wx);
  NodeId Wh = tp.param(p.Wh);
  NodeId b = tp.param(p.b);
  NodeId zr = tp.add(tp.affine(tp.slice(Wx, 0, 2 * H * p.in), 2 * H, p.in, x,
                               tp.slice(b, 0, 2 * H)),
                     tp.affine(tp.slice(Wh, 0, 2 * H * H), 2 * H, H, h));
  NodeId z = tp.sigmoid(tp.slice(zr, 0, H));
  NodeId r = tp.sigmoid(tp.slice(zr, H, H));
  NodeId cand = tp.tanh_(
      tp.add(tp.affine(tp.slice(Wx, 2 * H * p.in, H * p.in), H, p.in, x,
                       tp.slice(b, 2 * H, H)),
             tp.affine(tp.slice(Wh, 2 * H * H, H * H), H, H, tp.mul(r, h))));
  return tp.add(h, tp.mul(z, tp.sub(cand, h)));
}

// Unidirectional pass from a zero initial state; returns hidden per position.
template <class T>
std::vector<NodeId> lstm_run(Tape<T>& tp, std::span<const NodeId> xs,
                             const LstmP<T>& p, bool reverse) {
  std::vector<NodeId> hs(xs.size());
  NodeId h = tp.zeros(p.hid);
  NodeId c = tp.zeros(p.hid);
  int n = int(xs.size());
  for (int k = 0; k < n; ++k) {
    int i = reverse ? n - 1 - k : k;
    auto [h2, c2] = lstm_cell(tp, xs[i], h, c, p);
    h = h2;
    c = c2;
    hs[i] = h;
  }
  return hs;
}

template <class T>
BiSeqN bilstm(Tape<T>& tp, std::span<const NodeId> xs, const BiLstmP<T>& p) {
  BiSeqN out;
  out.fwd = lstm_run(tp, xs, p.fwd, false);
  out.bwd = lstm_run(tp, xs, p.bwd, true);
  return out;
}

// Inverted dropout: entries are 0 or 1/(1-rate). Identity when not training
// or rate == 0.
template <class T>
NodeId dropout(Tape<T>& tp, NodeId x, double rate, bool training,
               SplitMix64& rng) {
  if (!training || rate <= 0.0) return x;
  int n = tp.len(x);
  std::vector<T> mask(n);
  T keep = T(1.0 / (1.0 - rate));
  for (int i = 0; i < n; ++i)
    mask[i] = rng.next_double() < rate ? T(0) : keep;
  return tp.mul(x, tp.constant(std::span<const T>(mask)));
}

}  // namespace dfn
