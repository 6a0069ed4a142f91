#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arbolatent/autodiff.hpp"
#include "arbolatent/error.hpp"
#include "arbolatent/linalg.hpp"
#include "arbolatent/rng.hpp"
#include "arbolatent/tape.hpp"

using namespace arbolatent;

namespace {

// test-only determinant by cofactor expansion, independent of the LU path
double det_laplace(const Tensor& a) {
  const std::size_t n = a.rows();
  if (n == 1) return a.at(0, 0);
  double det = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    Tensor minor({n - 1, n - 1});
    for (std::size_t i = 1; i < n; ++i) {
      std::size_t col = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == c) continue;
        minor.at(i - 1, col++) = a.at(i, j);
      }
    }
    det += (c % 2 == 0 ? 1.0 : -1.0) * a.at(0, c) * det_laplace(minor);
  }
  return det;
}

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
  Rng rng(seed);
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Tensor well_conditioned(std::size_t n, std::uint64_t seed) {
  Tensor a = random_matrix(n, n, seed);
  for (std::size_t i = 0; i < n; ++i) a.at(i, i) += static_cast<double>(n);
  return a;
}

}  // namespace

TEST_CASE("inverse of identity and diagonal matrices") {
  Tape tape;
  const Var i3 = tape.inverse(tape.constant(Tensor::identity(3)));
  CHECK(max_abs_diff(tape.value(i3), Tensor::identity(3)) == 0.0);

  const Var d = tape.inverse(tape.constant(Tensor::matrix(2, 2, {2, 0, 0, 4})));
  CHECK(tape.value(d).at(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tape.value(d).at(1, 1) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(tape.value(d).at(0, 1) == 0.0);
}

TEST_CASE("inverse residual against identity on a well-conditioned 4x4") {
  const Tensor a = well_conditioned(4, 11);
  Tape tape;
  const Var b = tape.inverse(tape.constant(a));
  // residual A * B - I
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * tape.value(b).at(k, j);
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("inversion of a singular matrix raises") {
  Tape tape;
  CHECK_THROWS_AS((void)tape.inverse(tape.constant(Tensor::matrix(2, 2, {1, 1, 1, 1}))),
                  SingularMatrixError);
  tape.set_context("instance softmax-7");
  try {
    (void)tape.inverse(tape.constant(Tensor({3, 3})));
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(std::string(e.what()).find("instance softmax-7") != std::string::npos);
  }
}

TEST_CASE("backward of a linear map: d sum(A x)/dA = outer(1, x)") {
  ParamStore store;
  store.declare("A", {3, 2}, {InitKind::Glorot, 0.0});
  store.initialize(5);
  const Tensor x = Tensor::vec({0.3, -1.7});

  Tape tape(&store);
  const Var loss = tape.sum(tape.matmul(tape.param("A"), tape.constant(x)));
  store.zero_grads();
  tape.backward(loss);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(store.grad("A").at(i, j) == doctest::Approx(x[j]).epsilon(1e-14));
    }
  }
}

TEST_CASE("logdet gradient on a diagonal matrix is the inverse transpose") {
  ParamStore store;
  store.declare_external("A", Tensor::matrix(2, 2, {2, 0, 0, 5}));
  Tape tape(&store);
  const Var loss = tape.logdet(tape.param("A"));
  CHECK(tape.scalar(loss) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  store.zero_grads();
  tape.backward(loss);
  CHECK(store.grad("A").at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(store.grad("A").at(1, 1) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(store.grad("A").at(0, 1) == 0.0);
}

TEST_CASE("logdet equals log(det) from the Laplace-expansion oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const Tensor a = well_conditioned(4, seed);
    const double expected = std::log(std::abs(det_laplace(a)));
    const double got = logdet(a);
    CHECK(std::abs(got - expected) / std::max(1.0, std::abs(expected)) <= 1e-10);
  }
}

TEST_CASE("inverse backward identity: d sum(A^-1)/dA = -B^T J B^T") {
  const Tensor a = well_conditioned(3, 21);
  ParamStore store;
  store.declare_external("A", a);
  Tape tape(&store);
  const Var b = tape.inverse(tape.param("A"));
  const Var loss = tape.sum(b);
  store.zero_grads();
  tape.backward(loss);

  const Tensor& binv = tape.value(b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      // (-B^T J B^T)_{ij} = -(sum_k B_ki)(sum_l B_jl)
      double row_i = 0.0, col_j = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        row_i += binv.at(k, i);
        col_j += binv.at(j, k);
      }
      CHECK(store.grad("A").at(i, j) == doctest::Approx(-row_i * col_j).epsilon(1e-10));
    }
  }
}

TEST_CASE("grad_check on a quadratic is near machine precision") {
  ParamStore store;
  store.declare("theta", {4, 3}, {InitKind::Glorot, 0.0});
  store.initialize(9);
  const double err = grad_check(
      [](Tape& t, ParamStore&) {
        const Var th = t.param("theta");
        return t.sum(t.mul(th, th));
      },
      store, 1e-4);
  CHECK(err <= 1e-9);
}

TEST_CASE("grad_check rejects a bad step") {
  ParamStore store;
  store.declare("theta", {2}, {InitKind::Uniform, 1.0});
  store.initialize(1);
  const LossFn f = [](Tape& t, ParamStore&) { return t.sum(t.param("theta")); };
  CHECK_THROWS_AS((void)grad_check(f, store, 0.0), ValidationError);
  CHECK_THROWS_AS((void)grad_check(f, store, 0.5), ValidationError);
}

TEST_CASE("composite expression matches finite differences") {
  for (std::uint64_t seed : {3u, 17u}) {
    ParamStore store;
    store.declare("W", {4, 4}, {InitKind::Glorot, 0.0});
    store.declare("v", {4}, {InitKind::Uniform, 0.5});
    store.initialize(seed);

    const LossFn f = [](Tape& t, ParamStore&) {
      const Var w = t.param("W");
      const Var v = t.param("v");
      const Var base = t.add(t.tanh(w), t.constant(Tensor::full({4, 4}, 5.0)));
      const Var inv = t.inverse(base);
      const Var scaled = t.scale_rows(inv, t.sigmoid(v));
      const Var rows = t.slice_rows(t.softmax_rows(scaled), 1, 3);
      const Var mixed = t.add_rowvec(t.matmul(t.transpose(rows), rows), t.relu(v));
      const Var gathered = t.reciprocal(t.add_scalar(t.mul(mixed, mixed), 1.0));
      const Var capped = t.clamp(t.concat_cols({gathered, mixed}), -0.9, 0.9);
      return t.add(t.sum(capped), t.logdet(base));
    };
    CHECK(grad_check(f, store, 1e-5) <= 1e-4);
  }
}

TEST_CASE("tape replay determinism is bitwise") {
  const auto run = [](std::vector<double>& values, GradMap& grads) {
    ParamStore store;
    store.declare("W", {5, 5}, {InitKind::Glorot, 0.0});
    store.initialize(77);
    Tape tape(&store);
    const Var w = tape.param("W");
    const Var y = tape.softmax_rows(tape.matmul(tape.tanh(w), tape.transpose(w)));
    const Var loss = tape.sum(tape.mul(y, y));
    values.assign(tape.value(y).data(), tape.value(y).data() + tape.value(y).size());
    values.push_back(tape.scalar(loss));
    grads = tape.backward_collect(loss);
  };
  std::vector<double> v1, v2;
  GradMap g1, g2;
  run(v1, g1);
  run(v2, g2);
  CHECK(v1 == v2);
  REQUIRE(g1.size() == g2.size());
  for (const auto& [name, g] : g1) CHECK(g == g2.at(name));
}

TEST_CASE("parameters not reachable from the loss keep zero gradients") {
  ParamStore store;
  store.declare("used", {2}, {InitKind::Uniform, 1.0});
  store.declare("unused", {3}, {InitKind::Uniform, 1.0});
  store.initialize(4);
  Tape tape(&store);
  const Var loss = tape.sum(tape.param("used"));
  store.zero_grads();
  tape.backward(loss);
  for (std::size_t i = 0; i < 3; ++i) CHECK(store.grad("unused")[i] == 0.0);
  for (std::size_t i = 0; i < 2; ++i) CHECK(store.grad("used")[i] == 1.0);
}

TEST_CASE("backward requires a scalar loss") {
  ParamStore store;
  store.declare("v", {3}, {InitKind::Uniform, 1.0});
  store.initialize(2);
  Tape tape(&store);
  const Var v = tape.param("v");
  CHECK_THROWS_AS(tape.backward(v), ShapeError);
}

TEST_CASE("non-finite forward values are an error state") {
  Tape tape;
  const Var neg = tape.constant(Tensor::vec({-1.0}));
  CHECK_THROWS_AS((void)tape.log(neg), NumericError);
  const Var big = tape.constant(Tensor::vec({1e308}));
  CHECK_THROWS_AS((void)tape.mul(big, big), NumericError);
}

TEST_CASE("matmul shape mismatch raises") {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3}));
  const Var b = tape.constant(Tensor({2, 2}));
  CHECK_THROWS_AS((void)tape.matmul(a, b), ShapeError);
}

TEST_CASE("gather_rows routes gradients only to touched rows") {
  ParamStore store;
  store.declare("table", {5, 3}, {InitKind::Glorot, 0.0});
  store.initialize(8);
  Tape tape(&store);
  const Var loss = tape.sum(tape.gather_rows(tape.param("table"), {1, 3, 1}));
  store.zero_grads();
  tape.backward(loss);
  const Tensor& g = store.grad("table");
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(g.at(0, j) == 0.0);
    CHECK(g.at(1, j) == 2.0);  // gathered twice
    CHECK(g.at(2, j) == 0.0);
    CHECK(g.at(3, j) == 1.0);
    CHECK(g.at(4, j) == 0.0);
  }
}
