#pragma once

#include "dfn/episode.hpp"
#include "dfn/fusion.hpp"
#include "dfn/reasoner.hpp"

namespace dfn {

// Forward pass of one sample: full enumeration of the episode space plus,
// when requested, the surrogate-loss node whose gradient is the exact
// policy gradient.
template <class T>
struct ForwardOut {
  EpisodeTrace trace;
  NodeId loss = -1;
};

template <class T>
ForwardOut<T> run_sample(RunCtx<T>& ctx, const Sample& sample,
                         bool build_loss) {
  auto& tp = ctx.tp;
  const TrainConfig& cfg = ctx.P.cfg;
  const int r = sample.r();

  Encoded<T> enc = context_encode(ctx, sample);
  FusionWork<T> work;
  work.enc = &enc;

  EpisodeTrace trace;
  trace.gold = sample.gold;
  trace.has_gate = cfg.has_gate();
  trace.first_step = cfg.first_step();
  if (trace.has_gate)
    for (int g = 0; g < kNumStrategies; ++g) trace.strategies.push_back(g);
  else
    trace.strategies.push_back(cfg.fixed_strategy);

  NodeId gate_lsm = -1;
  if (trace.has_gate) {
    auto [probs, lsm] = strategy_gate(ctx, enc.q);
    gate_lsm = lsm;
    auto pv = tp.val(probs);
    trace.gate.assign(pv.begin(), pv.end());
  } else {
    trace.gate = {1.0};
  }

  std::vector<NodeId> memory, keys;
  if (cfg.has_reasoner()) {
    memory = gen_memory(ctx, enc.q, enc.p);
    keys = memory_keys(ctx, memory);
  }

  const int ns = trace.num_strategies();
  std::vector<RolloutN> rolls(ns);
  trace.p_stop.resize(ns);
  trace.q.resize(ns);
  trace.ans.resize(ns);
  trace.scores.resize(ns);
  for (int si = 0; si < ns; ++si) {
    std::vector<NodeId> s0 = fuse(ctx, work, trace.strategies[si]);
    if (cfg.has_reasoner()) {
      rolls[si] = rollout(ctx, memory, keys, s0);
    } else {
      // score directly from the fusion output; a single decision point
      StepNodes sn;
      sn.scores.resize(r);
      for (int j = 0; j < r; ++j) sn.scores[j] = score(ctx, s0[j]);
      sn.ans_lsm = tp.log_softmax(tp.concat(sn.scores));
      rolls[si].steps.push_back(std::move(sn));
      rolls[si].first_step = 0;
    }
    const int nt = int(rolls[si].steps.size());
    auto& ps = trace.p_stop[si];
    auto& qs = trace.q[si];
    ps.resize(nt);
    qs.resize(nt);
    double carry = 1.0;  // prod of (1 - p) so far
    for (int t = 0; t < nt; ++t) {
      const StepNodes& sn = rolls[si].steps[t];
      double p = t == nt - 1
                     ? 1.0
                     : double(std::exp(tp.scalar(sn.term_lsm)));
      ps[t] = p;
      qs[t] = carry * p;
      carry *= (1.0 - p);
      auto av = tp.val(sn.ans_lsm);
      auto& an = trace.ans[si].emplace_back(av.size());
      for (size_t c = 0; c < av.size(); ++c) an[c] = std::exp(double(av[c]));
      auto& sc = trace.scores[si].emplace_back(av.size());
      for (size_t c = 0; c < av.size(); ++c)
        sc[c] = double(tp.scalar(sn.scores[c]));
    }
  }

  ForwardOut<T> out;
  out.trace = std::move(trace);
  if (!build_loss) return out;

  // Surrogate: L = -sum_e w_e log pi_e with w_e = pi_e * advantage treated as
  // a constant, so grad L = -sum_e grad(pi_e) * advantage — the exact
  // policy-gradient with baseline b.
  const EpisodeTrace& tr = out.trace;
  double b = tr.expected_reward();
  std::vector<NodeId> terms;
  std::vector<T> coefs;
  auto term_of = [&](NodeId lsm, int idx) {
    terms.push_back(tp.pick(lsm, idx));
    coefs.push_back(T(0));
    return terms.size() - 1;
  };
  // pick nodes, built once per factor
  std::vector<size_t> gate_term(ns);
  if (tr.has_gate)
    for (int si = 0; si < ns; ++si) gate_term[si] = term_of(gate_lsm, si);
  std::vector<std::vector<size_t>> logp(ns), log1mp(ns);
  std::vector<std::vector<std::vector<size_t>>> logans(ns);
  for (int si = 0; si < ns; ++si) {
    const int nt = int(rolls[si].steps.size());
    logp[si].resize(nt);
    log1mp[si].resize(nt);
    logans[si].resize(nt);
    for (int t = 0; t < nt; ++t) {
      const StepNodes& sn = rolls[si].steps[t];
      if (sn.term_lsm >= 0) {
        logp[si][t] = term_of(sn.term_lsm, 0);
        log1mp[si][t] = term_of(sn.term_lsm, 1);
      }
      logans[si][t].resize(r);
      for (int c = 0; c < r; ++c) logans[si][t][c] = term_of(sn.ans_lsm, c);
    }
  }
  const double bdiv = std::max(b, cfg.b_floor);
  for (int si = 0; si < ns; ++si) {
    const int nt = int(rolls[si].steps.size());
    for (int t = 0; t < nt; ++t) {
      for (int c = 0; c < r; ++c) {
        double pe = tr.joint(si, t, c);
        double reward = c == tr.gold ? 1.0 : 0.0;
        double adv = cfg.advantage == Advantage::Ratio ? reward / bdiv - 1.0
                                                       : reward - b;
        T w = T(pe * adv);
        if (tr.has_gate) coefs[gate_term[si]] += w;
        if (t < nt - 1 && rolls[si].steps[t].term_lsm >= 0)
          coefs[logp[si][t]] += w;
        for (int tau = 0; tau < t; ++tau)
          if (rolls[si].steps[tau].term_lsm >= 0) coefs[log1mp[si][tau]] += w;
        coefs[logans[si][t][c]] += w;
      }
    }
  }
  for (auto& c : coefs) c = -c;
  out.loss = tp.weighted_sum(std::span<const NodeId>(terms),
                             std::span<const T>(coefs));
  return out;
}

}  // namespace dfn
