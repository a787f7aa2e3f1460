#pragma once

#include <stdexcept>

#include "dfn/model.hpp"
#include "dfn/seqnet.hpp"

namespace dfn {

// One-sided multi-perspective matching X |> X'. Every word of X is matched
// against the whole of X'; output length is |X|, with 4N components per
// direction (full, maxpool, attentive, max-attentive).
//
// w[0..7] bind to the four parts: full fwd/bwd, maxpool fwd/bwd, attentive
// fwd/bwd, max-attentive fwd/bwd.
template <class T>
BiSeqN mp_match(Tape<T>& tp, const BiSeqN& X, const BiSeqN& Xp,
                const MatchW<T>& w) {
  if (Xp.size() == 0)
    throw std::invalid_argument("mp_match: empty right operand");
  const int N = w.n, d = w.d;
  BiSeqN out;
  auto run_dir = [&](const std::vector<NodeId>& xs,
                     const std::vector<NodeId>& xps, NodeId last_or_first,
                     int wfull, int wmax, int watt, int wmaxatt)
      -> std::vector<NodeId> {
    NodeId Wfull = tp.param(w.w[wfull]);
    NodeId Wmax = tp.param(w.w[wmax]);
    NodeId Watt = tp.param(w.w[watt]);
    NodeId Wmaxatt = tp.param(w.w[wmaxatt]);
    std::vector<NodeId> res(xs.size());
    std::vector<NodeId> gs(xps.size());
    std::vector<NodeId> alphas(xps.size());
    for (size_t i = 0; i < xs.size(); ++i) {
      NodeId full = tp.mp_g(Wfull, N, d, xs[i], last_or_first);
      for (size_t j = 0; j < xps.size(); ++j)
        gs[j] = tp.mp_g(Wmax, N, d, xs[i], xps[j]);
      NodeId maxp = tp.max_list(gs);
      // attentive: cosine-weighted mean of X' (guarded when weights cancel)
      int best = 0;
      for (size_t j = 0; j < xps.size(); ++j) {
        alphas[j] = tp.cos(xs[i], xps[j]);
        if (tp.scalar(alphas[j]) > tp.scalar(alphas[best])) best = int(j);
      }
      NodeId avec = tp.concat(alphas);
      NodeId mean = tp.div_scalar(tp.attn_read(avec, xps), tp.sum_vec(avec));
      NodeId att = tp.mp_g(Watt, N, d, xs[i], mean);
      NodeId maxatt = tp.mp_g(Wmaxatt, N, d, xs[i], xps[best]);
      NodeId parts[4] = {full, maxp, att, maxatt};
      res[i] = tp.concat(std::span<const NodeId>(parts, 4));
    }
    return res;
  };
  out.fwd = run_dir(X.fwd, Xp.fwd, Xp.fwd.back(), 0, 2, 4, 6);
  out.bwd = run_dir(X.bwd, Xp.bwd, Xp.bwd.front(), 1, 3, 5, 7);
  return out;
}

// Splits a matched (question+answer) stream back into question and answer
// parts of lengths l_q and l_a.
inline std::pair<BiSeqN, BiSeqN> split(const BiSeqN& m, int lq, int la) {
  if (m.size() != lq + la)
    throw std::invalid_argument("split: length mismatch");
  if (lq <= 0 || la <= 0)
    throw std::invalid_argument("split: parts must be non-empty");
  BiSeqN q, a;
  q.fwd.assign(m.fwd.begin(), m.fwd.begin() + lq);
  q.bwd.assign(m.bwd.begin(), m.bwd.begin() + lq);
  a.fwd.assign(m.fwd.begin() + lq, m.fwd.end());
  a.bwd.assign(m.bwd.begin() + lq, m.bwd.end());
  return {q, a};
}

}  // namespace dfn
