#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdint>
#include <vector>

#include "gradsim/problem.hpp"
#include "gradsim/rng.hpp"
#include "gradsim/vector_ops.hpp"

using namespace gradsim;

namespace {

QuadraticShard identity_shard(ModelVector center) {
  QuadraticShard sh;
  sh.diag.assign(center.size(), 1.0);
  sh.center = std::move(center);
  return sh;
}

}  // namespace

TEST_CASE("explicit identity quadratic: gradient is x - c, loss vanishes at c") {
  Problem p = Problem::quadratic_explicit({identity_shard({-3.0, -1.0})}, 0.0, 1);
  CHECK(p.smoothness() == 1.0);
  CHECK(p.loss({-3.0, -1.0}) == 0.0);
  CHECK(p.worker_grad(0, {0.0, 0.0}) == ModelVector{3.0, 1.0});
  CHECK(p.full_grad({1.0, 1.0}) == ModelVector{4.0, 2.0});
  REQUIRE(p.minimizer().has_value());
  CHECK((*p.minimizer())[0] == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK((*p.minimizer())[1] == doctest::Approx(-1.0).epsilon(1e-12));
  // sigma = 0 means the stochastic gradient is the exact gradient
  CHECK(p.stoch_grad(0, {0.0, 0.0}, 5).grad == ModelVector{3.0, 1.0});
}

TEST_CASE("explicit quadratic with a linear term shifts the minimizer") {
  QuadraticShard sh = identity_shard({0.0, 0.0});
  sh.linear = {3.0, 1.0};
  Problem p = Problem::quadratic_explicit({sh}, 0.0, 1);
  CHECK(p.worker_grad(0, {0.0, 0.0}) == ModelVector{3.0, 1.0});
  REQUIRE(p.minimizer().has_value());
  CHECK((*p.minimizer())[0] == doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("condition 1 collapses the curvature to the exact identity") {
  Problem p = Problem::make_quadratic(8, 3, 1.0, 0.0, 11, true);
  CHECK(p.smoothness() == 1.0);
  const ModelVector x(8, 0.5);
  const ModelVector g = p.worker_grad(1, x);
  const QuadraticShard& sh = p.quadratic_shard(1);
  for (int j = 0; j < 8; ++j) CHECK(g[j] == x[j] - sh.center[j]);
}

TEST_CASE("generated quadratic: minimizer solves the stationarity system") {
  Problem p = Problem::make_quadratic(20, 4, 10.0, 1.0, 7, true);
  REQUIRE(p.minimizer().has_value());
  const ModelVector& xs = *p.minimizer();
  CHECK(std::sqrt(sq_norm(p.full_grad(xs))) <= 1e-8 * (1.0 + std::sqrt(sq_norm(xs))));

  // gradient descent at 1/L from zero must approach the same point
  ModelVector x(20, 0.0);
  for (int t = 0; t < 4000; ++t) {
    const ModelVector g = p.full_grad(x);
    for (int j = 0; j < 20; ++j) x[j] -= g[j] / p.smoothness();
  }
  double gap = 0.0;
  for (int j = 0; j < 20; ++j) gap = std::max(gap, std::abs(x[j] - xs[j]));
  CHECK(gap <= 1e-6);
  CHECK(p.loss(x) >= *p.min_loss() - 1e-12);
}

TEST_CASE("quadratic eigenvalues stay within [1, condition]") {
  // Gradient steps at eta = 1/L never diverge and the Lipschitz pairwise
  // bound holds for random pairs; both fail if smoothness were understated.
  Problem p = Problem::make_quadratic(12, 3, 25.0, 0.0, 3, true);
  CHECK(p.smoothness() == 25.0);
  auto eng = RngStream{99, 0, StreamPurpose::data}.engine();
  ModelVector x(12), y(12);
  for (int trial = 0; trial < 50; ++trial) {
    gaussian_fill(eng, x);
    gaussian_fill(eng, y);
    ModelVector gx = p.full_grad(x);
    ModelVector gy = p.full_grad(y);
    double gd = 0.0, xd = 0.0;
    for (int j = 0; j < 12; ++j) {
      gd += (gx[j] - gy[j]) * (gx[j] - gy[j]);
      xd += (x[j] - y[j]) * (x[j] - y[j]);
    }
    CHECK(std::sqrt(gd) <= p.smoothness() * std::sqrt(xd) * (1.0 + 1e-12));
  }
}

TEST_CASE("heterogeneous shards differ; homogeneous shards coincide") {
  Problem het = Problem::make_quadratic(6, 3, 10.0, 0.0, 5, true);
  CHECK(het.quadratic_shard(0).center != het.quadratic_shard(1).center);
  Problem hom = Problem::make_quadratic(6, 3, 10.0, 0.0, 5, false);
  CHECK(hom.quadratic_shard(0).center == hom.quadratic_shard(1).center);
  CHECK(hom.quadratic_shard(0).diag == hom.quadratic_shard(2).diag);

  Problem lhet = Problem::make_logistic(5, 3, 8, 5, true);
  CHECK(lhet.logistic_shard(0).rows != lhet.logistic_shard(1).rows);
  Problem lhom = Problem::make_logistic(5, 3, 8, 5, false);
  CHECK(lhom.logistic_shard(0).rows == lhom.logistic_shard(1).rows);
  CHECK(lhom.logistic_shard(0).labels == lhom.logistic_shard(2).labels);
}

TEST_CASE("same seed reproduces the same problem, different seeds differ") {
  Problem a = Problem::make_quadratic(7, 2, 5.0, 1.0, 42, true);
  Problem b = Problem::make_quadratic(7, 2, 5.0, 1.0, 42, true);
  CHECK(a.quadratic_shard(0).center == b.quadratic_shard(0).center);
  CHECK(a.quadratic_shard(1).diag == b.quadratic_shard(1).diag);
  Problem c = Problem::make_quadratic(7, 2, 5.0, 1.0, 43, true);
  CHECK(a.quadratic_shard(0).center != c.quadratic_shard(0).center);
}

TEST_CASE("quadratic stochastic gradients: reproducible, unbiased, sigma-scaled") {
  Problem p = Problem::make_quadratic(16, 2, 5.0, 2.0, 9, true);
  const ModelVector x(16, 0.25);
  const GradientSample s1 = p.stoch_grad(0, x, 3);
  const GradientSample s2 = p.stoch_grad(0, x, 3);
  CHECK(s1.grad == s2.grad);
  CHECK(s1.draw_id == 3);
  CHECK(p.stoch_grad(0, x, 4).grad != s1.grad);

  const ModelVector exact = p.worker_grad(0, x);
  const int n = 20000;
  ModelVector mean(16, 0.0);
  double noise_sq = 0.0;
  for (int t = 0; t < n; ++t) {
    const ModelVector g = p.stoch_grad(0, x, static_cast<std::uint64_t>(t)).grad;
    double acc = 0.0;
    for (int j = 0; j < 16; ++j) {
      mean[j] += g[j];
      acc += (g[j] - exact[j]) * (g[j] - exact[j]);
    }
    noise_sq += acc;
  }
  // per-coordinate noise is sigma/sqrt(d); 4 sigma band on the mean
  const double se = 2.0 / std::sqrt(16.0 * n);
  for (int j = 0; j < 16; ++j)
    CHECK(std::abs(mean[j] / n - exact[j]) <= 4.0 * se);
  // E ||noise||^2 = sigma^2 = 4; chi-square concentration is ~sqrt(2/(d n))
  CHECK(noise_sq / n == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("logistic stochastic gradients average to the shard gradient") {
  Problem p = Problem::make_logistic(6, 2, 10, 31, true);
  const ModelVector x(6, 0.1);
  const ModelVector exact = p.worker_grad(1, x);

  // enumerate: the mean of the per-sample gradients equals worker_grad
  const LogisticShard& sh = p.logistic_shard(1);
  ModelVector enumerated(6, 0.0);
  for (std::size_t s = 0; s < sh.labels.size(); ++s) {
    double margin = 0.0;
    for (int j = 0; j < 6; ++j) margin += sh.rows[s * 6 + j] * x[j];
    const double w = -sh.labels[s] / (1.0 + std::exp(sh.labels[s] * margin));
    for (int j = 0; j < 6; ++j) enumerated[j] += w * sh.rows[s * 6 + j];
  }
  for (int j = 0; j < 6; ++j) {
    enumerated[j] = enumerated[j] / static_cast<double>(sh.labels.size()) +
                    p.regularizer() * x[j];
    CHECK(enumerated[j] == doctest::Approx(exact[j]).epsilon(1e-12));
  }

  // Monte Carlo over draws; sample mean within 4 standard errors
  const int n = 20000;
  ModelVector mean(6, 0.0);
  double max_norm_sq = 0.0;
  for (int t = 0; t < n; ++t) {
    const GradientSample g = p.stoch_grad(1, x, static_cast<std::uint64_t>(t));
    REQUIRE(g.draw_id < sh.labels.size());
    for (int j = 0; j < 6; ++j) mean[j] += g.grad[j];
    max_norm_sq = std::max(max_norm_sq, sq_norm(g.grad));
  }
  for (int j = 0; j < 6; ++j) {
    const double se = p.noise_sigma() / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean[j] / n - exact[j]) <= 4.0 * se);
  }
  // the advertised noise level dominates every single-sample gradient
  CHECK(max_norm_sq <=
        (p.noise_sigma() + p.regularizer() * std::sqrt(sq_norm(x))) *
                (p.noise_sigma() + p.regularizer() * std::sqrt(sq_norm(x))) +
            1e-12);
}

TEST_CASE("finite differences confirm the analytic gradients") {
  Problem q = Problem::make_quadratic(10, 3, 8.0, 0.0, 17, true);
  ModelVector x(10);
  auto eng = RngStream{17, 5, StreamPurpose::data}.engine();
  gaussian_fill(eng, x);
  const ModelVector g = q.full_grad(x);
  const ModelVector fd = q.fd_gradient(x, 1e-4);
  for (int j = 0; j < 10; ++j) CHECK(std::abs(g[j] - fd[j]) <= 1e-5);

  Problem l = Problem::make_logistic(8, 2, 12, 23, true);
  ModelVector y(8);
  gaussian_fill(eng, y);
  const ModelVector gl = l.full_grad(y);
  const ModelVector fdl = l.fd_gradient(y, 1e-5);
  for (int j = 0; j < 8; ++j) CHECK(std::abs(gl[j] - fdl[j]) <= 1e-4);
}

TEST_CASE("factory input validation") {
  CHECK_THROWS_AS(Problem::make_quadratic(0, 1, 1.0, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(Problem::make_quadratic(1, 0, 1.0, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(Problem::make_quadratic(1, 1, 0.5, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(Problem::make_quadratic(1, 1, 1.0, -1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(Problem::make_logistic(0, 1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(Problem::quadratic_explicit({}, 0.0, 1), std::invalid_argument);
  QuadraticShard bad = identity_shard({1.0});
  bad.diag[0] = -1.0;
  CHECK_THROWS_AS(Problem::quadratic_explicit({bad}, 0.0, 1), std::invalid_argument);
  Problem p = Problem::make_quadratic(4, 2, 2.0, 0.0, 1);
  CHECK_THROWS_AS(p.worker_grad(2, ModelVector(4, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(p.loss(ModelVector(3, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(p.logistic_shard(0), std::invalid_argument);
}
