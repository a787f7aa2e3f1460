#pragma once

#include <fstream>
#include <sstream>

#include "dfn/config.hpp"
#include "dfn/seqnet.hpp"
#include "dfn/tensor.hpp"
#include "dfn/vocab.hpp"

namespace dfn {

// Weights of one one-sided matching operator: w[0]/w[1] full matching,
// w[2]/w[3] maxpool, w[4]/w[5] attentive, w[6]/w[7] max-attentive.
template <class T>
struct MatchW {
  Tensor<T>* w[8] = {};
  int n = 0, d = 0;
};

// The complete named-tensor set of one DFN instance.
template <class T>
struct ModelParams {
  ParamSet<T> set;
  TrainConfig cfg;
  Vocabulary vocab;

  Tensor<T>* word_table = nullptr;  // frozen
  Tensor<T>* char_table = nullptr;
  LstmP<T> char_lstm;
  BiLstmP<T> ctx;  // shared context encoder (question, passage, question+answer)

  Tensor<T>* gate_w = nullptr;  // [n_strategies, 2h]

  MatchW<T> m_integral;  // (Q+A) vs P
  MatchW<T> m_answer;    // A vs P, shared by answer-only and entangled
  MatchW<T> m_question;  // Q vs P (entangled)
  MatchW<T> m_ent_q;     // M_q vs M_a
  MatchW<T> m_ent_a;     // M_a vs M_q
  MatchW<T> m_memory;    // P vs Q

  BiLstmP<T> agg_q[kNumStrategies], agg_a[kNumStrategies];
  Tensor<T>* proj_w[kNumStrategies] = {};
  Tensor<T>* proj_b[kNumStrategies] = {};

  BiLstmP<T> mem_rnn;  // aggregates P-vs-Q matches into the memory
  GruP<T> gru;         // reasoning state update
  Tensor<T>* W2 = nullptr;  // [d_s, 2h] memory side of the attention score
  Tensor<T>* W3 = nullptr;  // [d_s, d_s] state side
  Tensor<T>* W4 = nullptr;  // [d_s, d_s] score head hidden
  Tensor<T>* W5 = nullptr;  // [1, d_s]  score head output
  Tensor<T>* W6 = nullptr;  // [2, d_s]  termination logits, shared across candidates

  int lex_dim() const { return cfg.word_dim + cfg.char_h; }
  int match_dim() const { return 4 * cfg.n_perspectives; }  // per direction

  ModelParams(const TrainConfig& c, Vocabulary v) : cfg(c), vocab(std::move(v)) {
    const int h = cfg.h, N = cfg.n_perspectives, ds = cfg.d_s;
    word_table = set.add("embed.word_table",
                         {int(vocab.tokens.size()), cfg.word_dim}, true);
    char_table =
        set.add("embed.char_table", {int(vocab.chars.size()), cfg.char_dim});
    char_lstm = add_lstm("embed.char_lstm", cfg.char_dim, cfg.char_h);
    ctx.fwd = add_lstm("embed.ctx.fwd", lex_dim(), h);
    ctx.bwd = add_lstm("embed.ctx.bwd", lex_dim(), h);

    gate_w = set.add("fusion.gate.w", {kNumStrategies, 2 * h});

    m_integral = add_match("match.integral", N, h);
    m_answer = add_match("match.answer", N, h);
    m_question = add_match("match.question", N, h);
    m_ent_q = add_match("match.ent_q", N, match_dim());
    m_ent_a = add_match("match.ent_a", N, match_dim());
    m_memory = add_match("match.memory", N, h);

    const char* tag[kNumStrategies] = {"int", "aso", "ent"};
    for (int g = 0; g < kNumStrategies; ++g) {
      int q_in = (g == kAnswerOnly) ? 2 * h : 2 * match_dim();
      std::string base = std::string("fusion.agg.") + tag[g];
      agg_q[g].fwd = add_lstm(base + ".q.fwd", q_in, h);
      agg_q[g].bwd = add_lstm(base + ".q.bwd", q_in, h);
      agg_a[g].fwd = add_lstm(base + ".a.fwd", 2 * match_dim(), h);
      agg_a[g].bwd = add_lstm(base + ".a.bwd", 2 * match_dim(), h);
      proj_w[g] = set.add(std::string("fusion.proj.") + tag[g] + ".w", {ds, 4 * h});
      proj_b[g] = set.add(std::string("fusion.proj.") + tag[g] + ".b", {ds});
    }

    mem_rnn.fwd = add_lstm("memory.rnn.fwd", 2 * match_dim(), h);
    mem_rnn.bwd = add_lstm("memory.rnn.bwd", 2 * match_dim(), h);

    gru.Wx = set.add("reasoner.gru.wx", {3 * ds, 2 * h});
    gru.Wh = set.add("reasoner.gru.wh", {3 * ds, ds});
    gru.b = set.add("reasoner.gru.b", {3 * ds});
    gru.in = 2 * h;
    gru.hid = ds;
    W2 = set.add("reasoner.w2", {ds, 2 * h});
    W3 = set.add("reasoner.w3", {ds, ds});
    W4 = set.add("reasoner.w4", {ds, ds});
    W5 = set.add("reasoner.w5", {1, ds});
    W6 = set.add("reasoner.w6", {2, ds});
  }

  // Uniform +-1/sqrt(fan-in) weights, zero biases except forget gates at 1,
  // character embeddings uniform in [-0.1, 0.1].
  void init(uint64_t seed) {
    SplitMix64 rng(SplitMix64::mix(seed, 0x1117));
    for (size_t i = 0; i < set.count(); ++i) {
      Tensor<T>* t = set.at(i);
      if (t->frozen) continue;  // word table is filled by load_pretrained
      if (t == char_table) {
        for (auto& x : t->v) x = T(rng.next_range(-0.1, 0.1));
      } else if (t->name.size() > 2 &&
                 t->name.compare(t->name.size() - 2, 2, ".b") == 0) {
        std::fill(t->v.begin(), t->v.end(), T(0));
      } else if (t->shape.size() == 1) {  // projection biases
        std::fill(t->v.begin(), t->v.end(), T(0));
      } else {
        init_uniform_fanin(t, t->cols(), rng);
      }
    }
    // forget-gate bias = 1 (rows [H, 2H) of the fused LSTM bias)
    for (Tensor<T>* b : lstm_biases_) {
      int H = int(b->size()) / 4;
      for (int k = H; k < 2 * H; ++k) b->v[k] = T(1);
    }
  }

 private:
  std::vector<Tensor<T>*> lstm_biases_;

  LstmP<T> add_lstm(const std::string& base, int in, int hid) {
    LstmP<T> p;
    p.Wx = set.add(base + ".wx", {4 * hid, in});
    p.Wh = set.add(base + ".wh", {4 * hid, hid});
    p.b = set.add(base + ".b", {4 * hid});
    p.in = in;
    p.hid = hid;
    lstm_biases_.push_back(p.b);
    return p;
  }
  MatchW<T> add_match(const std::string& base, int n, int d) {
    MatchW<T> m;
    m.n = n;
    m.d = d;
    for (int k = 0; k < 8; ++k)
      m.w[k] = set.add(base + ".w" + std::to_string(k + 1), {n, d});
    return m;
  }
};

// Fill frozen word vectors from a `word v1 ... vD` text file; rows of words
// absent from the file stay exactly zero. Returns the number of rows filled.
template <class T>
size_t load_pretrained(const std::string& path, ModelParams<T>& model) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open embeddings file: " + path);
  const int D = model.cfg.word_dim;
  std::string line;
  size_t filled = 0, lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string word;
    is >> word;
    int idx = model.vocab.token(word);
    std::vector<T> row(D);
    int got = 0;
    double x;
    while (is >> x) {
      if (got < D) row[got] = T(x);
      ++got;
    }
    if (got != D)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(D) + " values, got " + std::to_string(got));
    if (idx >= 0) {
      std::copy(row.begin(), row.end(),
                model.word_table->v.begin() + size_t(idx) * D);
      ++filled;
    }
  }
  return filled;
}

}  // namespace dfn
