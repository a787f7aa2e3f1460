#pragma once

#include "dfn/embed.hpp"
#include "dfn/matching.hpp"

namespace dfn {

// Question-aware passage memory: every passage word matched to the question,
// aggregated by a BiLSTM. One 2h vector per passage position.
template <class T>
std::vector<NodeId> gen_memory(RunCtx<T>& ctx, const BiSeqN& q, const BiSeqN& p) {
  auto& tp = ctx.tp;
  BiSeqN m = mp_match(tp, p, q, ctx.P.m_memory);
  std::vector<NodeId> in(m.size());
  for (int i = 0; i < m.size(); ++i) in[i] = tp.concat2(m.fwd[i], m.bwd[i]);
  BiSeqN rnn = bilstm(tp, std::span<const NodeId>(in), ctx.P.mem_rnn);
  std::vector<NodeId> mem(m.size());
  for (int i = 0; i < m.size(); ++i)
    mem[i] = ctx.drop(tp.concat2(rnn.fwd[i], rnn.bwd[i]));
  return mem;
}

// a_i = softmax_i lambda*cos(W2 m_i, W3 s); f_att = sum_i a_i m_i.
// W2 m_i is candidate- and step-independent, so callers precompute it once.
template <class T>
std::vector<NodeId> memory_keys(RunCtx<T>& ctx,
                                const std::vector<NodeId>& memory) {
  auto& tp = ctx.tp;
  const int ds = ctx.P.cfg.d_s, h2 = 2 * ctx.P.cfg.h;
  NodeId W2 = tp.param(ctx.P.W2);
  std::vector<NodeId> keys(memory.size());
  for (size_t i = 0; i < memory.size(); ++i)
    keys[i] = tp.affine(W2, ds, h2, memory[i]);
  return keys;
}

template <class T>
NodeId attend_memory(RunCtx<T>& ctx, const std::vector<NodeId>& memory,
                     const std::vector<NodeId>& keys, NodeId s,
                     NodeId* scores_out = nullptr) {
  auto& tp = ctx.tp;
  const int ds = ctx.P.cfg.d_s;
  NodeId query = tp.affine(tp.param(ctx.P.W3), ds, ds, s);
  std::vector<NodeId> cs(memory.size());
  for (size_t i = 0; i < memory.size(); ++i) cs[i] = tp.cos(keys[i], query);
  NodeId a = tp.softmax(tp.scale(tp.concat(cs), T(ctx.P.cfg.lambda)));
  if (scores_out) *scores_out = a;
  return tp.attn_read(a, memory);
}

// Termination logits: softmax(sum_j W6 s_j). One gate for all candidates.
template <class T>
NodeId termination_logits(RunCtx<T>& ctx, const std::vector<NodeId>& states) {
  auto& tp = ctx.tp;
  NodeId W6 = tp.param(ctx.P.W6);
  NodeId acc = tp.affine(W6, 2, ctx.P.cfg.d_s, states[0]);
  for (size_t j = 1; j < states.size(); ++j)
    acc = tp.add(acc, tp.affine(W6, 2, ctx.P.cfg.d_s, states[j]));
  return acc;
}

// c_j = W5 ReLU(W4 s_j)
template <class T>
NodeId score(RunCtx<T>& ctx, NodeId s) {
  auto& tp = ctx.tp;
  const int ds = ctx.P.cfg.d_s;
  return tp.affine(tp.param(ctx.P.W5), 1, ds,
                   tp.relu(tp.affine(tp.param(ctx.P.W4), ds, ds, s)));
}

// Nodes recorded at one decision point.
struct StepNodes {
  NodeId term_lsm = -1;  // log (p_stop, 1-p_stop); -1 at the forced stop
  NodeId ans_lsm = -1;   // log softmax over candidate scores
  std::vector<NodeId> scores;
};

struct RolloutN {
  std::vector<StepNodes> steps;  // one per decision point
  int first_step = 0;            // 0 with the step-0 gate, else 1
};

// Multi-step skim over the memory. Each candidate keeps its own state and
// attention read; GRU and attention weights are shared. Decision points are
// t = first..t_max with the stop probability forced to 1 at t_max.
template <class T>
RolloutN rollout(RunCtx<T>& ctx, const std::vector<NodeId>& memory,
                 const std::vector<NodeId>& keys, std::vector<NodeId> states) {
  auto& tp = ctx.tp;
  const TrainConfig& cfg = ctx.P.cfg;
  RolloutN out;
  out.first_step = cfg.step0 ? 0 : 1;
  auto record = [&](const std::vector<NodeId>& st, bool forced) {
    StepNodes sn;
    if (!forced) sn.term_lsm = tp.log_softmax(termination_logits(ctx, st));
    sn.scores.resize(st.size());
    for (size_t j = 0; j < st.size(); ++j) sn.scores[j] = score(ctx, st[j]);
    sn.ans_lsm = tp.log_softmax(tp.concat(sn.scores));
    out.steps.push_back(std::move(sn));
  };
  if (cfg.step0) record(states, /*forced=*/false);
  for (int t = 1; t <= cfg.t_max; ++t) {
    for (auto& s : states) {
      NodeId f = attend_memory(ctx, memory, keys, s);
      s = gru_cell(tp, f, s, ctx.P.gru);
    }
    record(states, /*forced=*/t == cfg.t_max);
  }
  return out;
}

}  // namespace dfn
