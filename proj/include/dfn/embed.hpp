#pragma once

#include <unordered_map>

#include "dfn/corpus.hpp"
#include "dfn/model.hpp"
#include "dfn/seqnet.hpp"

namespace dfn {

// Per-sample forward context: tape, parameters, dropout state and the
// per-token lexicon cache (a question re-appears in every Q+A stream).
template <class T>
struct RunCtx {
  Tape<T>& tp;
  ModelParams<T>& P;
  bool training = false;
  SplitMix64 rng{0};
  std::unordered_map<std::string, NodeId> lex_cache;

  RunCtx(Tape<T>& t, ModelParams<T>& p, bool train = false, uint64_t seed = 0)
      : tp(t), P(p), training(train), rng(seed) {}

  NodeId drop(NodeId x) {
    return dropout(tp, x, P.cfg.dropout, training, rng);
  }
};

// Final state of the character LSTM over a word's characters. Unknown
// characters map to row 0 of the character table.
template <class T>
NodeId char_encode(RunCtx<T>& ctx, const std::string& word) {
  auto& tp = ctx.tp;
  const int Dc = ctx.P.cfg.char_dim;
  NodeId table = tp.param(ctx.P.char_table);
  NodeId h = tp.zeros(ctx.P.cfg.char_h);
  NodeId c = tp.zeros(ctx.P.cfg.char_h);
  for (unsigned char ch : word) {
    NodeId x = tp.slice(table, ctx.P.vocab.chr(ch) * Dc, Dc);
    auto [h2, c2] = lstm_cell(tp, x, h, c, ctx.P.char_lstm);
    h = h2;
    c = c2;
  }
  return h;
}

// Per-token vector: [frozen word vector ; char encoding]. Out-of-vocabulary
// words keep an all-zero word part.
template <class T>
NodeId lexicon_token(RunCtx<T>& ctx, const std::string& word) {
  auto it = ctx.lex_cache.find(word);
  if (it != ctx.lex_cache.end()) return it->second;
  auto& tp = ctx.tp;
  const int Dw = ctx.P.cfg.word_dim;
  int idx = ctx.P.vocab.token(word);
  NodeId wvec = idx < 0 ? tp.zeros(Dw)
                        : tp.view(ctx.P.word_table->v.data() + size_t(idx) * Dw, Dw);
  NodeId out = tp.concat2(wvec, char_encode(ctx, word));
  ctx.lex_cache.emplace(word, out);
  return out;
}

template <class T>
std::vector<NodeId> lexicon_encode(RunCtx<T>& ctx,
                                   const std::vector<std::string>& tokens) {
  std::vector<NodeId> out(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i)
    out[i] = lexicon_token(ctx, tokens[i]);
  return out;
}

// Context representations from the shared BiLSTM. The question is appended
// before each answer candidate and the concatenation encoded jointly.
template <class T>
struct Encoded {
  BiSeqN q, p;
  std::vector<BiSeqN> qa;  // one per candidate, length l_q + l_a^j
  int lq = 0, lp = 0;
  std::vector<int> la;
};

template <class T>
BiSeqN encode_stream(RunCtx<T>& ctx, const std::vector<NodeId>& lex) {
  std::vector<NodeId> in(lex.size());
  for (size_t i = 0; i < lex.size(); ++i) in[i] = ctx.drop(lex[i]);
  BiSeqN enc = bilstm(ctx.tp, std::span<const NodeId>(in), ctx.P.ctx);
  for (auto& n : enc.fwd) n = ctx.drop(n);
  for (auto& n : enc.bwd) n = ctx.drop(n);
  return enc;
}

template <class T>
Encoded<T> context_encode(RunCtx<T>& ctx, const Sample& s) {
  Encoded<T> e;
  e.lq = int(s.question.size());
  e.lp = int(s.passage.size());
  auto lex_q = lexicon_encode(ctx, s.question);
  e.q = encode_stream(ctx, lex_q);
  e.p = encode_stream(ctx, lexicon_encode(ctx, s.passage));
  for (const auto& cand : s.candidates) {
    std::vector<NodeId> lex_qa = lex_q;
    auto lex_a = lexicon_encode(ctx, cand);
    lex_qa.insert(lex_qa.end(), lex_a.begin(), lex_a.end());
    e.qa.push_back(encode_stream(ctx, lex_qa));
    e.la.push_back(int(cand.size()));
  }
  return e;
}

// The answer part of a jointly encoded question+answer stream: its last
// l_a positions.
inline BiSeqN answer_suffix(const BiSeqN& qa, int lq) {
  BiSeqN a;
  a.fwd.assign(qa.fwd.begin() + lq, qa.fwd.end());
  a.bwd.assign(qa.bwd.begin() + lq, qa.bwd.end());
  return a;
}

}  // namespace dfn
