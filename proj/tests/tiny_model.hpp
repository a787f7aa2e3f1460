#pragma once

// Small shared fixtures: a tiny configuration, corpus and model used across
// the module tests.

#include "dfn/forward.hpp"
#include "dfn/model.hpp"

namespace dfn::test {

inline TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.h = 4;
  cfg.char_h = 3;
  cfg.char_dim = 2;
  cfg.word_dim = 5;
  cfg.n_perspectives = 2;
  cfg.lambda = 10.0;
  cfg.t_max = 2;
  cfg.d_s = 6;
  cfg.dropout = 0.0;
  cfg.batch = 4;
  cfg.seed = 42;
  return cfg;
}

inline Sample tiny_sample(int gold = 1) {
  Sample s;
  s.id = "tiny-0";
  s.passage = {"ada", "likes", "maps", ".", "bob", "likes", "tea", "."};
  s.question = {"who", "likes", "tea", "?"};
  s.candidates = {{"ada"}, {"bob"}, {"maps", "and", "tea"}};
  s.gold = gold;
  return s;
}

inline Sample tiny_sample2() {
  Sample s;
  s.id = "tiny-1";
  s.passage = {"sun", "is", "hot", ".", "ice", "is", "cold", "."};
  s.question = {"sun", "is", "_"};
  s.candidates = {{"cold"}, {"hot"}, {"ice"}, {"sun"}};
  s.gold = 1;
  return s;
}

template <class T>
std::unique_ptr<ModelParams<T>> tiny_model(TrainConfig cfg = tiny_config(),
                                           uint64_t init_seed = 7) {
  std::vector<Sample> corpus = {tiny_sample(), tiny_sample2()};
  Vocabulary vocab = Vocabulary::build(corpus);
  auto m = std::make_unique<ModelParams<T>>(cfg, std::move(vocab));
  m->init(init_seed);
  // frozen word vectors: deterministic pseudo-random, standing in for a
  // pretrained table
  SplitMix64 rng(91);
  for (auto& x : m->word_table->v) x = T(rng.next_range(-0.5, 0.5));
  return m;
}

template <class T>
void randomize_params(ModelParams<T>& m, uint64_t seed, double scale = 0.5) {
  SplitMix64 rng(seed);
  for (size_t i = 0; i < m.set.count(); ++i) {
    Tensor<T>* t = m.set.at(i);
    if (t->frozen) continue;
    for (auto& x : t->v) x = T(rng.next_range(-scale, scale));
  }
}

}  // namespace dfn::test
