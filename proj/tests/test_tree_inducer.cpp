#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arbolatent/autodiff.hpp"
#include "arbolatent/error.hpp"
#include "arbolatent/rng.hpp"
#include "arbolatent/tree_inducer.hpp"
#include "arbolatent/tree_tools.hpp"
#include "arbolatent/verify.hpp"

using namespace arbolatent;

namespace {

Tensor random_h(std::size_t m, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor h({m, d});
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = rng.uniform(-1.0, 1.0);
  return h;
}

ParamStore score_params(std::size_t d, std::uint64_t seed) {
  ParamStore store;
  store.declare("tree.w_p", {d, d}, {InitKind::Glorot, 0.0});
  store.declare("tree.w_c", {d, d}, {InitKind::Glorot, 0.0});
  store.declare("tree.w_b", {d, d}, {InitKind::Glorot, 0.0});
  store.declare("tree.w_r", {1, d}, {InitKind::Glorot, 0.0});
  store.initialize(seed);
  return store;
}

// naive per-pair evaluation of Eq-style scores, independent of the tape path
double edge_score_loop(const Tensor& h, const Tensor& wp, const Tensor& wc, const Tensor& wb,
                       std::size_t i, std::size_t j) {
  const std::size_t d = h.cols();
  std::vector<double> hp(d, 0.0), hc(d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    double sp = 0.0, sc = 0.0;
    for (std::size_t b = 0; b < d; ++b) {
      sp += wp.at(a, b) * h.at(i, b);
      sc += wc.at(a, b) * h.at(j, b);
    }
    hp[a] = std::tanh(sp);
    hc[a] = std::tanh(sc);
  }
  double out = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) out += hp[a] * wb.at(a, b) * hc[b];
  }
  return out;
}

}  // namespace

TEST_CASE("edge scores match the naive double-loop oracle") {
  const std::size_t m = 5, d = 6;
  ParamStore store = score_params(d, 3);
  const Tensor h = random_h(m, d, 4);
  Tape tape(&store);
  const Var e = edge_scores(tape, tape.constant(h), store);
  const Tensor& ev = tape.value(e);
  REQUIRE(ev.rows() == m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double expect = edge_score_loop(h, store.value("tree.w_p"), store.value("tree.w_c"),
                                            store.value("tree.w_b"), i, j);
      CHECK(std::abs(ev.at(i, j) - expect) <= 1e-12);
    }
  }
}

TEST_CASE("zero bilinear weight annihilates edge scores") {
  ParamStore store = score_params(4, 5);
  store.value("tree.w_b").fill(0.0);
  Tape tape(&store);
  const Var e = edge_scores(tape, tape.constant(random_h(3, 4, 6)), store);
  CHECK(tape.value(e).max_abs() == 0.0);
}

TEST_CASE("identical rows give a constant edge score matrix") {
  ParamStore store = score_params(4, 7);
  Tensor h({3, 4});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) h.at(i, j) = 0.1 * static_cast<double>(j + 1);
  }
  Tape tape(&store);
  const Tensor& ev = tape.value(edge_scores(tape, tape.constant(h), store));
  for (std::size_t i = 0; i < ev.size(); ++i) CHECK(ev[i] == doctest::Approx(ev[0]).epsilon(1e-12));
}

TEST_CASE("root scores match a per-row dot product") {
  const std::size_t m = 4, d = 5;
  ParamStore store = score_params(d, 9);
  const Tensor h = random_h(m, d, 10);
  Tape tape(&store);
  const Tensor& rv = tape.value(root_scores(tape, tape.constant(h), store));
  REQUIRE(rv.size() == m);
  for (std::size_t i = 0; i < m; ++i) {
    double expect = 0.0;
    for (std::size_t j = 0; j < d; ++j) expect += store.value("tree.w_r").at(0, j) * h.at(i, j);
    CHECK(std::abs(rv[i] - expect) <= 1e-12);
  }
  store.value("tree.w_r").fill(0.0);
  Tape t2(&store);
  CHECK(t2.value(root_scores(t2, t2.constant(h), store)).max_abs() == 0.0);
}

TEST_CASE("single node: root marginal is 1") {
  ScoreSet s{Tensor({1, 1}), Tensor::vec({0.7})};
  const TreeMarginals mg = mtt_marginals(s);
  CHECK(mg.root_p[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mg.P.at(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("two symmetric nodes split root and edge mass evenly") {
  ScoreSet s{Tensor::full({2, 2}, 0.3), Tensor::full({2}, 0.3)};
  const TreeMarginals mg = mtt_marginals(s);
  CHECK(mg.root_p[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(mg.root_p[1] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(mg.P.at(0, 1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(mg.P.at(1, 0) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("three-node weighted case matches the enumeration oracle and hand counts") {
  // weights: (0,1):2 (0,2):1 (1,0):1 (1,2):3 (2,0):1 (2,1):1, uniform roots.
  // 9 trees, Z = 20; root mass 9/20, 7/20, 4/20 by hand enumeration.
  ScoreSet s;
  s.E = Tensor({3, 3});
  s.E.at(0, 1) = std::log(2.0);
  s.E.at(0, 2) = std::log(1.0);
  s.E.at(1, 0) = std::log(1.0);
  s.E.at(1, 2) = std::log(3.0);
  s.E.at(2, 0) = std::log(1.0);
  s.E.at(2, 1) = std::log(1.0);
  s.r = Tensor::vec({0.0, 0.0, 0.0});

  const TreeMarginals fast = mtt_marginals(s);
  const TreeMarginals oracle = oracle_marginals(s);
  CHECK(max_abs_diff(fast.P, oracle.P) <= 1e-10);
  CHECK(max_abs_diff(fast.root_p, oracle.root_p) <= 1e-10);
  CHECK(fast.root_p[0] == doctest::Approx(9.0 / 20.0).epsilon(1e-10));
  CHECK(fast.root_p[1] == doctest::Approx(7.0 / 20.0).epsilon(1e-10));
  CHECK(fast.root_p[2] == doctest::Approx(4.0 / 20.0).epsilon(1e-10));
  CHECK(fast.log_z == doctest::Approx(std::log(20.0)).epsilon(1e-10));
}

TEST_CASE("oracle equivalence over random scores up to m = 5") {
  const PropertyResult res = check_oracle_equivalence(5, 20, 1e-8, 101);
  CHECK_MESSAGE(res.pass, res.detail);
}

TEST_CASE("normalization identities hold for m in 1..8") {
  const PropertyResult res = check_normalization(120, 8, 1e-8, 103);
  CHECK_MESSAGE(res.pass, res.detail);
}

TEST_CASE("marginals are invariant to a shared score shift") {
  const PropertyResult res = check_shift_invariance(40, 1e-10, 107);
  CHECK_MESSAGE(res.pass, res.detail);
}

TEST_CASE("marginals stay within [-1e-10, 1 + 1e-10]") {
  for (std::uint64_t c = 0; c < 40; ++c) {
    const std::size_t m = 2 + c % 6;
    const TreeMarginals mg = mtt_marginals(random_score_set(m, mix_seed(11, 0, c)));
    for (std::size_t i = 0; i < mg.P.size(); ++i) {
      CHECK(mg.P[i] >= -1e-10);
      CHECK(mg.P[i] <= 1.0 + 1e-10);
    }
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(mg.root_p[i] >= -1e-10);
      CHECK(mg.root_p[i] <= 1.0 + 1e-10);
    }
  }
}

TEST_CASE("log partition matches the oracle") {
  for (std::uint64_t c = 0; c < 10; ++c) {
    const std::size_t m = 2 + c % 4;
    const ScoreSet s = random_score_set(m, mix_seed(13, 1, c));
    const double fast = mtt_marginals(s).log_z;
    const double slow = oracle_marginals(s).log_z;
    CHECK(std::abs(fast - slow) / std::max(1.0, std::abs(slow)) <= 1e-10);
  }
}

TEST_CASE("underflowed tree mass raises a singularity error naming the instance") {
  // root scores so dominant that every competing structure underflows to zero
  ScoreSet s;
  s.E = Tensor({3, 3});
  s.r = Tensor::vec({0.0, 1500.0, 1500.0});
  ParamStore store;
  Tape tape(&store);
  tape.set_context("instance rest14-17");
  const Var E = tape.constant(s.E);
  const Var r = tape.constant(s.r);
  try {
    (void)mtt_marginals(tape, E, r);
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(std::string(e.what()).find("instance rest14-17") != std::string::npos);
  }
}

TEST_CASE("zero nodes are rejected") {
  Tape tape;
  CHECK_THROWS_AS((void)mtt_marginals(tape, tape.constant(Tensor::vec({1.0})), tape.constant(Tensor::vec({1.0}))),
                  ShapeError);
}

TEST_CASE("root refinement loss values") {
  Tape tape;
  SUBCASE("near-perfect assignment is near zero") {
    const Var pr = tape.constant(Tensor::vec({1e-12, 1.0 - 1e-12}));
    const Var loss = root_refinement_loss(tape, pr, {false, true});
    CHECK(tape.scalar(loss) >= 0.0);
    CHECK(tape.scalar(loss) <= 1e-9);
  }
  SUBCASE("uniform marginals over m=4 with one aspect token") {
    const Var pr = tape.constant(Tensor::full({4}, 0.25));
    const Var loss = root_refinement_loss(tape, pr, {false, true, false, false});
    const double expect = -(std::log(0.25) + 3.0 * std::log(0.75));
    CHECK(tape.scalar(loss) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(tape.scalar(loss) == doctest::Approx(2.2493).epsilon(1e-4));
  }
  SUBCASE("all-false mask still penalizes spread mass") {
    const Var pr = tape.constant(Tensor::vec({0.5, 0.3, 0.2}));
    const Var loss = root_refinement_loss(tape, pr, {false, false, false});
    CHECK(tape.scalar(loss) > 0.0);
  }
  SUBCASE("mask length mismatch raises") {
    const Var pr = tape.constant(Tensor::vec({0.5, 0.5}));
    CHECK_THROWS_AS((void)root_refinement_loss(tape, pr, {true}), ShapeError);
  }
}

TEST_CASE("raising an aspect root score never increases the loss") {
  Rng rng(71);
  for (int c = 0; c < 20; ++c) {
    const std::size_t m = 3 + rng.below(4);
    ScoreSet s = random_score_set(m, mix_seed(17, 2, static_cast<std::uint64_t>(c)));
    std::vector<bool> mask(m, false);
    const std::size_t aspect = 1 + rng.below(m - 1);
    mask[aspect] = true;

    const auto loss_at = [&](const ScoreSet& scores) {
      Tape tape;
      const MarginalVars mv =
          mtt_marginals(tape, tape.constant(scores.E), tape.constant(scores.r));
      return tape.scalar(root_refinement_loss(tape, mv.root_p, mask));
    };
    const double base = loss_at(s);
    s.r[aspect] += rng.uniform(0.1, 3.0);
    CHECK(loss_at(s) <= base + 1e-12);
  }
}

TEST_CASE("gradient of the refinement loss w.r.t. scores matches finite differences") {
  const std::size_t m = 4;
  ParamStore store;
  store.declare("E", {m, m}, {InitKind::Uniform, 1.0});
  store.declare("r", {m}, {InitKind::Uniform, 1.0});
  store.initialize(23);
  const std::vector<bool> mask = {false, true, true, false};
  const double err = grad_check(
      [&](Tape& tape, ParamStore&) {
        const MarginalVars mv = mtt_marginals(tape, tape.param("E"), tape.param("r"));
        return root_refinement_loss(tape, mv.root_p, mask);
      },
      store, 1e-5);
  CHECK(err <= 1e-4);
}

TEST_CASE("an injected sign bug in the edge marginals is caught by the oracle") {
  detail::mtt_flip_second_term = true;
  const ScoreSet s = random_score_set(3, 301);
  const double diff = max_abs_diff(mtt_marginals(s).P, oracle_marginals(s).P);
  detail::mtt_flip_second_term = false;
  CHECK(diff > 1e-3);
  // and the restored path agrees again
  CHECK(max_abs_diff(mtt_marginals(s).P, oracle_marginals(s).P) <= 1e-10);
}
