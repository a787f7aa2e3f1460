#pragma once

#include "dfn/embed.hpp"
#include "dfn/matching.hpp"

namespace dfn {

// Strategy gate over the question's endpoint states: softmax(W1 [q_fwd_last;
// q_bwd_first]). Returns the probability and log-probability nodes.
template <class T>
std::pair<NodeId, NodeId> strategy_gate(RunCtx<T>& ctx, const BiSeqN& q) {
  auto& tp = ctx.tp;
  NodeId cat = tp.concat2(q.fwd.back(), q.bwd.front());
  NodeId logits = tp.affine(tp.param(ctx.P.gate_w), kNumStrategies,
                            2 * ctx.P.cfg.h, cat);
  return {tp.softmax(logits), tp.log_softmax(logits)};
}

// (1) Integral: the question+answer concatenation matched to the passage as a
// whole, then split back into question / answer streams.
template <class T>
std::pair<BiSeqN, BiSeqN> strategy_integral(RunCtx<T>& ctx, const BiSeqN& p,
                                            const BiSeqN& qa, int lq) {
  BiSeqN m = mp_match(ctx.tp, qa, p, ctx.P.m_integral);
  return split(m, lq, m.size() - lq);
}

// (2) Answer-only: only the answer words attend to the passage; the question
// stream passes through untouched.
template <class T>
std::pair<BiSeqN, BiSeqN> strategy_answer_only(RunCtx<T>& ctx, const BiSeqN& q,
                                               const BiSeqN& p, const BiSeqN& a) {
  BiSeqN ma = mp_match(ctx.tp, a, p, ctx.P.m_answer);
  return {q, ma};
}

// (3) Entangled: question and answer are separately matched to the passage,
// then the two match streams are matched against each other.
template <class T>
std::pair<BiSeqN, BiSeqN> strategy_entangled(RunCtx<T>& ctx, const BiSeqN& mq,
                                             const BiSeqN& ma) {
  BiSeqN qent = mp_match(ctx.tp, mq, ma, ctx.P.m_ent_q);
  BiSeqN aent = mp_match(ctx.tp, ma, mq, ctx.P.m_ent_a);
  return {qent, aent};
}

// Aggregate a strategy's two streams with the strategy's own BiLSTMs
// (directions concatenated first) and project the four endpoint states to the
// fixed-size strategy output s_j.
template <class T>
NodeId aggregate(RunCtx<T>& ctx, const BiSeqN& qs, const BiSeqN& as, int g) {
  auto& tp = ctx.tp;
  auto cat_positions = [&](const BiSeqN& s) {
    std::vector<NodeId> xs(s.size());
    for (int i = 0; i < s.size(); ++i) xs[i] = tp.concat2(s.fwd[i], s.bwd[i]);
    return xs;
  };
  auto q_in = cat_positions(qs);
  auto a_in = cat_positions(as);
  BiSeqN aq = bilstm(tp, std::span<const NodeId>(q_in), ctx.P.agg_q[g]);
  BiSeqN aa = bilstm(tp, std::span<const NodeId>(a_in), ctx.P.agg_a[g]);
  NodeId ends[4] = {ctx.drop(aq.fwd.back()), ctx.drop(aq.bwd.front()),
                    ctx.drop(aa.fwd.back()), ctx.drop(aa.bwd.front())};
  NodeId cat = tp.concat(std::span<const NodeId>(ends, 4));
  return tp.affine(tp.param(ctx.P.proj_w[g]), ctx.P.cfg.d_s, 4 * ctx.P.cfg.h,
                   cat, tp.param(ctx.P.proj_b[g]));
}

// Lazily shared per-sample match streams: M_a is reused between answer-only
// and entangled (same weights by design), M_q between candidates.
template <class T>
struct FusionWork {
  const Encoded<T>* enc = nullptr;
  std::vector<BiSeqN> ma;  // per candidate
  BiSeqN mq;
  bool have_mq = false;

  const BiSeqN& get_ma(RunCtx<T>& ctx, int j) {
    if (ma.empty()) ma.resize(enc->qa.size());
    if (ma[j].size() == 0) {
      BiSeqN a = answer_suffix(enc->qa[j], enc->lq);
      ma[j] = mp_match(ctx.tp, a, enc->p, ctx.P.m_answer);
    }
    return ma[j];
  }
  const BiSeqN& get_mq(RunCtx<T>& ctx) {
    if (!have_mq) {
      mq = mp_match(ctx.tp, enc->q, enc->p, ctx.P.m_question);
      have_mq = true;
    }
    return mq;
  }
};

// Strategy g applied to candidate j.
template <class T>
NodeId fuse_one(RunCtx<T>& ctx, FusionWork<T>& work, int g, int j) {
  const Encoded<T>& e = *work.enc;
  std::pair<BiSeqN, BiSeqN> streams;
  switch (g) {
    case kIntegral:
      streams = strategy_integral(ctx, e.p, e.qa[j], e.lq);
      break;
    case kAnswerOnly:
      streams = {e.q, work.get_ma(ctx, j)};
      break;
    case kEntangled:
      streams = strategy_entangled(ctx, work.get_mq(ctx), work.get_ma(ctx, j));
      break;
    default:
      throw std::invalid_argument("unknown strategy id " + std::to_string(g));
  }
  return aggregate(ctx, streams.first, streams.second, g);
}

// Strategy g applied to every candidate of one sample.
template <class T>
std::vector<NodeId> fuse(RunCtx<T>& ctx, FusionWork<T>& work, int g) {
  std::vector<NodeId> s(work.enc->qa.size());
  for (size_t j = 0; j < s.size(); ++j) s[j] = fuse_one(ctx, work, g, int(j));
  return s;
}

}  // namespace dfn
