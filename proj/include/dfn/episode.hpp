#pragma once

#include <cmath>
#include <vector>

#include "dfn/common.hpp"
#include "dfn/config.hpp"

namespace dfn {

// The fully enumerated (strategy g, stop step t, answer c) outcome space of
// one sample, with probabilities and rewards. Indices run over the strategies
// actually in play (one for no-df modes) and the decision points of the stop
// policy (a single point for no-mr modes).
struct EpisodeTrace {
  std::vector<int> strategies;  // global strategy ids
  std::vector<double> gate;     // P(G = g); {1} when the gate is ablated
  bool has_gate = true;
  int first_step = 0;
  int gold = 0;

  // [strategy][decision point]
  std::vector<std::vector<double>> p_stop;  // forced to 1 at the last point
  std::vector<std::vector<double>> q;       // stop-time law
  // [strategy][decision point][candidate]
  std::vector<std::vector<std::vector<double>>> ans;
  std::vector<std::vector<std::vector<double>>> scores;

  int num_strategies() const { return int(strategies.size()); }
  int num_steps() const { return int(q.empty() ? 0 : q[0].size()); }
  int num_candidates() const { return int(ans[0][0].size()); }

  double joint(int s, int t, int c) const {
    return gate[s] * q[s][t] * ans[s][t][c];
  }

  // b: expected reward (probability of a correct answer under the policy)
  double expected_reward() const {
    double b = 0;
    for (int s = 0; s < num_strategies(); ++s)
      for (int t = 0; t < num_steps(); ++t) b += gate[s] * q[s][t] * ans[s][t][gold];
    return b;
  }

  double joint_total() const {
    double z = 0;
    for (int s = 0; s < num_strategies(); ++s)
      for (int t = 0; t < num_steps(); ++t)
        for (int c = 0; c < num_candidates(); ++c) z += joint(s, t, c);
    return z;
  }

  struct Decision {
    int strategy = 0;  // global id
    int step = 0;      // reasoning steps taken before stopping
    int answer = 0;
    bool correct = false;
  };

  // argmax gate; first decision point with p_stop >= 0.5; argmax score.
  // All ties break to the lowest index.
  Decision greedy() const {
    Decision d;
    int s = 0;
    for (int i = 1; i < num_strategies(); ++i)
      if (gate[i] > gate[s]) s = i;
    int t = 0;
    while (t + 1 < num_steps() && p_stop[s][t] < 0.5) ++t;
    int c = 0;
    for (int i = 1; i < num_candidates(); ++i)
      if (scores[s][t][i] > scores[s][t][c]) c = i;
    d.strategy = strategies[s];
    d.step = first_step + t;
    d.answer = c;
    d.correct = c == gold;
    return d;
  }

  // One stochastic episode: G ~ gate, T ~ Bernoulli chain, C ~ answer softmax.
  Decision sample(SplitMix64& rng) const {
    Decision d;
    int s = 0;
    {
      double u = rng.next_double(), acc = 0;
      for (int i = 0; i < num_strategies(); ++i) {
        acc += gate[i];
        if (u < acc) { s = i; break; }
        s = i;
      }
    }
    int t = 0;
    while (t + 1 < num_steps() && rng.next_double() >= p_stop[s][t]) ++t;
    int c = 0;
    {
      double u = rng.next_double(), acc = 0;
      for (int i = 0; i < num_candidates(); ++i) {
        acc += ans[s][t][i];
        if (u < acc) { c = i; break; }
        c = i;
      }
    }
    d.strategy = strategies[s];
    d.step = first_step + t;
    d.answer = c;
    d.correct = c == gold;
    return d;
  }

  double gate_entropy() const {
    double e = 0;
    for (double p : gate)
      if (p > 0) e -= p * std::log(p);
    return e;
  }
};

}  // namespace dfn
