#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "dfn/embed.hpp"
#include "dfn/policy.hpp"

#include "fd_check.hpp"
#include "tiny_model.hpp"

using namespace dfn;
using test::tiny_config;
using test::tiny_model;
namespace fs = std::filesystem;

TEST_CASE("load_pretrained") {
  auto model = tiny_model<double>();
  std::fill(model->word_table->v.begin(), model->word_table->v.end(), 0.0);
  fs::path tmp = fs::temp_directory_path() / "dfn_vecs_test.txt";
  {
    std::ofstream f(tmp);
    f << "ada 1 2 3 4 5\n";
    f << "notinvocab 9 9 9 9 9\n";
    f << "tea -1 -2 -3 -4 -5\n";
  }
  size_t filled = load_pretrained(tmp.string(), *model);
  CHECK(filled == 2);
  int ada = model->vocab.token("ada");
  REQUIRE(ada >= 0);
  CHECK(model->word_table->v[size_t(ada) * 5 + 0] == 1.0);
  CHECK(model->word_table->v[size_t(ada) * 5 + 4] == 5.0);
  // absent word rows stay exactly zero
  int bob = model->vocab.token("bob");
  REQUIRE(bob >= 0);
  for (int k = 0; k < 5; ++k)
    CHECK(model->word_table->v[size_t(bob) * 5 + k] == 0.0);

  SUBCASE("wrong arity is a parse error with the line number") {
    std::ofstream f(tmp);
    f << "ada 1 2 3 4\n";
    f.close();
    try {
      load_pretrained(tmp.string(), *model);
      CHECK(false);
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":1") != std::string::npos);
    }
  }
  fs::remove(tmp);
}

TEST_CASE("char_encode") {
  auto model = tiny_model<double>();

  SUBCASE("all-zero parameters give a zero vector") {
    std::fill(model->char_table->v.begin(), model->char_table->v.end(), 0.0);
    for (Tensor<double>* t : {model->char_lstm.Wx, model->char_lstm.Wh,
                              model->char_lstm.b})
      std::fill(t->v.begin(), t->v.end(), 0.0);
    Tape<double> tp(&model->set);
    RunCtx<double> ctx(tp, *model);
    NodeId h = char_encode(ctx, "ada");
    for (double v : tp.val(h)) CHECK(v == 0.0);
  }

  SUBCASE("deterministic") {
    Tape<double> tp(&model->set);
    RunCtx<double> ctx(tp, *model);
    auto a = tp.val(char_encode(ctx, "maps"));
    Tape<double> tp2(&model->set);
    RunCtx<double> ctx2(tp2, *model);
    auto b = tp2.val(char_encode(ctx2, "maps"));
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }

  SUBCASE("one-character word equals a single cell step from zero") {
    Tape<double> tp(&model->set);
    RunCtx<double> ctx(tp, *model);
    NodeId enc = char_encode(ctx, "?");
    NodeId table = tp.param(model->char_table);
    NodeId x = tp.slice(table, model->vocab.chr('?') * model->cfg.char_dim,
                        model->cfg.char_dim);
    auto [h, c] = lstm_cell(tp, x, tp.zeros(3), tp.zeros(3), model->char_lstm);
    for (int i = 0; i < 3; ++i)
      CHECK(tp.val(enc)[i] == doctest::Approx(tp.val(h)[i]).epsilon(1e-12));
  }

  SUBCASE("unknown characters map to index 0") {
    CHECK(model->vocab.chr('Z') == 0);
    Tape<double> tp(&model->set);
    RunCtx<double> ctx(tp, *model);
    CHECK_NOTHROW(char_encode(ctx, "Z"));
  }
}

TEST_CASE("lexicon_encode") {
  auto model = tiny_model<double>();
  Tape<double> tp(&model->set);
  RunCtx<double> ctx(tp, *model);

  SUBCASE("output length matches input and word slice matches the table") {
    std::vector<std::string> toks = {"ada", "likes", "tea"};
    auto lex = lexicon_encode(ctx, toks);
    CHECK(lex.size() == 3);
    int ada = model->vocab.token("ada");
    auto v = tp.val(lex[0]);
    CHECK(v.size() == size_t(model->lex_dim()));
    for (int k = 0; k < 5; ++k)
      CHECK(v[k] == model->word_table->v[size_t(ada) * 5 + k]);
  }

  SUBCASE("oov word with zero char params is all zero") {
    std::fill(model->char_table->v.begin(), model->char_table->v.end(), 0.0);
    for (Tensor<double>* t : {model->char_lstm.Wx, model->char_lstm.Wh,
                              model->char_lstm.b})
      std::fill(t->v.begin(), t->v.end(), 0.0);
    NodeId n = lexicon_token(ctx, "zzzz");  // not in vocabulary
    for (double v : tp.val(n)) CHECK(v == 0.0);
  }
}

TEST_CASE("context_encode") {
  auto model = tiny_model<double>();
  Sample s = test::tiny_sample();

  SUBCASE("lengths: q, p, and q+a per candidate") {
    Tape<double> tp(&model->set);
    RunCtx<double> ctx(tp, *model);
    auto enc = context_encode(ctx, s);
    CHECK(enc.q.size() == int(s.question.size()));
    CHECK(enc.p.size() == int(s.passage.size()));
    REQUIRE(enc.qa.size() == s.candidates.size());
    for (size_t j = 0; j < s.candidates.size(); ++j)
      CHECK(enc.qa[j].size() ==
            int(s.question.size() + s.candidates[j].size()));
    CHECK(tp.val(enc.q.fwd[0]).size() == size_t(model->cfg.h));
  }

  SUBCASE("eval mode is deterministic") {
    Tape<double> t1(&model->set);
    RunCtx<double> c1(t1, *model, false, 1);
    auto e1 = context_encode(c1, s);
    Tape<double> t2(&model->set);
    RunCtx<double> c2(t2, *model, false, 2);
    auto e2 = context_encode(c2, s);
    for (int i = 0; i < e1.q.size(); ++i)
      for (int k = 0; k < model->cfg.h; ++k)
        CHECK(t1.val(e1.q.fwd[i])[k] == t2.val(e2.q.fwd[i])[k]);
  }

  SUBCASE("question encoding differs from the q+a prefix on random params") {
    // the backward pass of (Q+A) sees the answer, so prefixes differ
    Tape<double> tp(&model->set);
    RunCtx<double> ctx(tp, *model);
    auto enc = context_encode(ctx, s);
    double diff = 0;
    for (int k = 0; k < model->cfg.h; ++k)
      diff += std::abs(tp.val(enc.q.bwd[0])[k] - tp.val(enc.qa[0].bwd[0])[k]);
    CHECK(diff > 1e-6);
  }

  SUBCASE("training mode applies dropout noise") {
    TrainConfig cfg = tiny_config();
    cfg.dropout = 0.3;
    auto m2 = tiny_model<double>(cfg);
    Tape<double> t1(&m2->set);
    RunCtx<double> c1(t1, *m2, true, 1);
    auto e1 = context_encode(c1, s);
    Tape<double> t2(&m2->set);
    RunCtx<double> c2(t2, *m2, true, 99);
    auto e2 = context_encode(c2, s);
    double diff = 0;
    for (int k = 0; k < m2->cfg.h; ++k)
      diff += std::abs(t1.val(e1.p.fwd[2])[k] - t2.val(e2.p.fwd[2])[k]);
    CHECK(diff > 0);
  }
}

TEST_CASE("word rows never move under training; char grads flow") {
  auto model = tiny_model<float>();
  std::vector<Sample> corpus = {test::tiny_sample(), test::tiny_sample2()};
  std::vector<float> words_before = model->word_table->v;

  AdamState<float> adam;
  adam.match(model->set);
  BatchScratch<float> scratch;
  std::vector<int> idx = {0, 1};
  model->set.zero_grad();
  process_batch(*model, corpus, idx, 1, true, false, scratch);

  // char table gradient is nonzero for characters appearing in the batch
  int a_row = model->vocab.chr('a');
  REQUIRE(a_row > 0);
  double g = 0;
  for (int k = 0; k < model->cfg.char_dim; ++k)
    g += std::abs(model->char_table->g[size_t(a_row) * model->cfg.char_dim + k]);
  CHECK(g > 0);

  adam_step(model->set, adam, 0.01);
  for (size_t i = 0; i < words_before.size(); ++i)
    CHECK(model->word_table->v[i] == words_before[i]);
}
