#pragma once

#include <string>

#include "dfn/common.hpp"

namespace dfn {

enum class Ablation { Full, NoDF, NoMR, NoDFMR };
enum class Advantage { Ratio, RB };  // (r/b - 1) vs (r - b)

constexpr int kNumStrategies = 3;
constexpr int kIntegral = 0;
constexpr int kAnswerOnly = 1;
constexpr int kEntangled = 2;

const char* strategy_name(int g);
int strategy_from_name(const std::string& s);  // -1 if unknown

// Flat key=value configuration. Unknown keys are errors.
struct TrainConfig {
  int h = 100;          // context/aggregation/memory LSTM hidden size
  int char_h = 50;      // character LSTM hidden size
  int char_dim = 20;    // character embedding size
  int word_dim = 300;   // word vector size
  int n_perspectives = 10;
  double lambda = 10.0;  // attention score scale
  int t_max = 5;         // maximum reasoning steps
  int d_s = 300;         // strategy output / GRU state size
  int n_strategies = 3;
  double dropout = 0.1;
  double lr = 0.001;
  int batch = 64;
  int max_passage = 500;
  int max_question = 100;
  int max_answer = 100;
  uint64_t seed = 1;
  Ablation ablation = Ablation::Full;
  int fixed_strategy = -1;  // required for no-df modes
  double b_floor = 1e-6;
  int epochs = 20;
  Advantage advantage = Advantage::Ratio;
  bool step0 = true;  // evaluate the termination gate before the first read

  bool has_gate() const {
    return ablation == Ablation::Full || ablation == Ablation::NoMR;
  }
  bool has_reasoner() const {
    return ablation == Ablation::Full || ablation == Ablation::NoDF;
  }
  // Decision points of the stop policy: t = 0..t_max (or 1..t_max without
  // the step-0 gate); a single point when the reasoner is ablated.
  int first_step() const { return has_reasoner() ? (step0 ? 0 : 1) : 0; }
  int last_step() const { return has_reasoner() ? t_max : 0; }
  int num_steps() const { return last_step() - first_step() + 1; }

  void validate() const;
  std::string to_text() const;  // key=value lines, round-trippable
  static TrainConfig from_text(const std::string& text);
  static TrainConfig load(const std::string& path);
  void set(const std::string& key, const std::string& value);
};

}  // namespace dfn
