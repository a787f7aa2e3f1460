#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dfn/matching.hpp"

#include "fd_check.hpp"
#include "tiny_model.hpp"

using namespace dfn;

namespace {

BiSeqN make_biseq(Tape<double>& tp, const std::vector<std::vector<double>>& fwd,
                  const std::vector<std::vector<double>>& bwd) {
  BiSeqN s;
  for (const auto& v : fwd) s.fwd.push_back(tp.constant(std::span<const double>(v)));
  for (const auto& v : bwd) s.bwd.push_back(tp.constant(std::span<const double>(v)));
  return s;
}

BiSeqN random_biseq(Tape<double>& tp, int len, int d, SplitMix64& rng) {
  std::vector<std::vector<double>> f(len, std::vector<double>(d)), b = f;
  for (auto& v : f)
    for (auto& x : v) x = rng.next_range(-1, 1);
  for (auto& v : b)
    for (auto& x : v) x = rng.next_range(-1, 1);
  return make_biseq(tp, f, b);
}

struct MatchFixture {
  ParamSet<double> ps;
  MatchW<double> w;
  MatchFixture(int n, int d, uint64_t seed) {
    w.n = n;
    w.d = d;
    for (int k = 0; k < 8; ++k)
      w.w[k] = ps.add("w" + std::to_string(k), {n, d});
    SplitMix64 rng(seed);
    for (size_t i = 0; i < ps.count(); ++i)
      for (auto& x : ps.at(i)->v) x = rng.next_range(-1, 1);
  }
};

}  // namespace

TEST_CASE("mp_g basics") {
  ParamSet<double> ps;
  auto* W = ps.add("w", {2, 2});

  SUBCASE("identical inputs give all ones") {
    W->v = {1.0, 0.5, -0.3, 0.8};
    Tape<double> tp(&ps);
    NodeId v = tp.constant({0.7, -0.2});
    auto g = tp.val(tp.mp_g(tp.param(W), 2, 2, v, v));
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(1.0));
  }

  SUBCASE("orthogonal after masking gives zero") {
    W->v = {1.0, 1.0, 1.0, 1.0};
    Tape<double> tp(&ps);
    NodeId v1 = tp.constant({1.0, 0.0});
    NodeId v2 = tp.constant({0.0, 1.0});
    auto g = tp.val(tp.mp_g(tp.param(W), 2, 2, v1, v2));
    CHECK(g[0] == 0.0);
  }

  SUBCASE("components stay in [-1, 1] over 1000 random draws") {
    SplitMix64 rng(31);
    for (int i = 0; i < 1000; ++i) {
      Tape<double> tp(&ps);
      for (auto& x : W->v) x = rng.next_range(-2, 2);
      std::vector<double> a(2), b(2);
      for (auto& x : a) x = rng.next_range(-2, 2);
      for (auto& x : b) x = rng.next_range(-2, 2);
      auto g = tp.val(tp.mp_g(tp.param(W), 2, 2,
                              tp.constant(std::span<const double>(a)),
                              tp.constant(std::span<const double>(b))));
      for (double v : g) {
        CHECK(v <= 1.0);
        CHECK(v >= -1.0);
      }
    }
  }
}

TEST_CASE("mp_match length contract and range") {
  MatchFixture fx(2, 3, 5);
  SplitMix64 rng(11);
  for (int lx = 2; lx <= 7; ++lx) {
    for (int lxp : {1, 3, 5}) {
      Tape<double> tp(&fx.ps);
      BiSeqN X = random_biseq(tp, lx, 3, rng);
      BiSeqN Xp = random_biseq(tp, lxp, 3, rng);
      BiSeqN out = mp_match(tp, X, Xp, fx.w);
      CHECK(out.size() == lx);
      for (int i = 0; i < lx; ++i) {
        CHECK(tp.val(out.fwd[i]).size() == 8);  // 4 parts x N
        for (double v : tp.val(out.fwd[i])) {
          CHECK(v <= 1.0);
          CHECK(v >= -1.0);
        }
      }
    }
  }
}

TEST_CASE("mp_match with a length-1 right operand degenerates") {
  // single j: full, maxpool, attentive and max-attentive all see the same
  // vector, but through different perspective weights; tie the weights and
  // all four parts coincide.
  MatchFixture fx(2, 3, 6);
  for (int k = 1; k < 8; ++k) fx.ps.at(k)->v = fx.ps.at(0)->v;
  Tape<double> tp(&fx.ps);
  SplitMix64 rng(12);
  BiSeqN X = random_biseq(tp, 3, 3, rng);
  BiSeqN Xp = random_biseq(tp, 1, 3, rng);
  BiSeqN out = mp_match(tp, X, Xp, fx.w);
  for (int i = 0; i < 3; ++i) {
    auto v = tp.val(out.fwd[i]);
    for (int part = 1; part < 4; ++part)
      for (int n = 0; n < 2; ++n)
        CHECK(v[part * 2 + n] == doctest::Approx(v[n]).epsilon(1e-12));
  }
}

TEST_CASE("all-guarded attention weights give a zero mean and no NaN") {
  MatchFixture fx(2, 3, 7);
  Tape<double> tp(&fx.ps);
  SplitMix64 rng(13);
  BiSeqN X = random_biseq(tp, 2, 3, rng);
  // zero right operand: every cosine guards to 0, sum of weights is 0
  std::vector<std::vector<double>> zeros(3, std::vector<double>(3, 0.0));
  BiSeqN Xp = make_biseq(tp, zeros, zeros);
  BiSeqN out = mp_match(tp, X, Xp, fx.w);
  for (int i = 0; i < 2; ++i)
    for (double v : tp.val(out.fwd[i])) {
      CHECK(std::isfinite(v));
      // attentive part (components 4..5) is g(x, 0, .) = 0 by the guard
    }
  auto v0 = tp.val(out.fwd[0]);
  CHECK(v0[4] == 0.0);
  CHECK(v0[5] == 0.0);
}

TEST_CASE("mp_match permutation covariance in X") {
  MatchFixture fx(2, 3, 8);
  Tape<double> tp(&fx.ps);
  SplitMix64 rng(14);
  std::vector<std::vector<double>> f(4, std::vector<double>(3)), b = f;
  for (auto& v : f)
    for (auto& x : v) x = rng.next_range(-1, 1);
  for (auto& v : b)
    for (auto& x : v) x = rng.next_range(-1, 1);
  BiSeqN X = make_biseq(tp, f, b);
  BiSeqN Xp = random_biseq(tp, 3, 3, rng);
  BiSeqN out = mp_match(tp, X, Xp, fx.w);
  // permute X by rotation
  std::vector<std::vector<double>> fr = {f[2], f[0], f[3], f[1]};
  std::vector<std::vector<double>> br = {b[2], b[0], b[3], b[1]};
  BiSeqN Xr = make_biseq(tp, fr, br);
  BiSeqN outr = mp_match(tp, Xr, Xp, fx.w);
  int perm[4] = {2, 0, 3, 1};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 8; ++k)
      CHECK(tp.val(outr.fwd[i])[k] == tp.val(out.fwd[perm[i]])[k]);
}

TEST_CASE("mp_match rejects an empty right operand") {
  MatchFixture fx(2, 3, 9);
  Tape<double> tp(&fx.ps);
  SplitMix64 rng(15);
  BiSeqN X = random_biseq(tp, 2, 3, rng);
  BiSeqN empty;
  CHECK_THROWS_AS(mp_match(tp, X, empty, fx.w), std::invalid_argument);
}

TEST_CASE("split") {
  Tape<double> tp;
  SplitMix64 rng(16);
  BiSeqN m = random_biseq(tp, 5, 2, rng);
  auto [q, a] = split(m, 3, 2);
  CHECK(q.size() == 3);
  CHECK(a.size() == 2);
  // concatenation of outputs is the input
  for (int i = 0; i < 3; ++i) CHECK(q.fwd[i] == m.fwd[i]);
  for (int i = 0; i < 2; ++i) CHECK(a.fwd[i] == m.fwd[3 + i]);
  CHECK_THROWS_AS(split(m, 4, 2), std::invalid_argument);
  CHECK_THROWS_AS(split(m, 0, 5), std::invalid_argument);
}

TEST_CASE("gradients flow through a full match (fd oracle)") {
  MatchFixture fx(2, 4, 21);
  SplitMix64 rng(22);
  std::vector<std::vector<double>> xf(2, std::vector<double>(4)), xb = xf;
  std::vector<std::vector<double>> pf(3, std::vector<double>(4)), pb = pf;
  for (auto* m : {&xf, &xb, &pf, &pb})
    for (auto& v : *m)
      for (auto& x : v) x = rng.next_range(-1, 1);
  auto run = [&](Tape<double>& tp) {
    BiSeqN X = make_biseq(tp, xf, xb);
    BiSeqN Xp = make_biseq(tp, pf, pb);
    BiSeqN out = mp_match(tp, X, Xp, fx.w);
    NodeId acc = tp.sum_vec(tp.tanh_(out.fwd[0]));
    for (int i = 0; i < out.size(); ++i) {
      acc = tp.add(acc, tp.sum_vec(tp.tanh_(tp.scale(out.fwd[i], 0.7))));
      acc = tp.add(acc, tp.sum_vec(tp.tanh_(tp.scale(out.bwd[i], -1.1))));
    }
    return acc;
  };
  GradBuffer<double> buf;
  buf.match(fx.ps);
  {
    Tape<double> tp(&fx.ps);
    tp.backward(run(tp), 1.0);
    tp.export_grads(buf);
  }
  auto rep = test::fd_check_params<double>(
      fx.ps,
      [&] {
        Tape<double> tp(&fx.ps);
        return double(tp.scalar(run(tp)));
      },
      [&](size_t ti, size_t k) { return buf.g[ti][k]; });
  INFO("worst: ", rep.worst);
  CHECK(rep.max_rel_err < 1e-5);
}
