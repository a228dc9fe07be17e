#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gradsim/rng.hpp"
#include "gradsim/vector_ops.hpp"

namespace gradsim {

enum class ProblemKind { quadratic, logistic };

const char* problem_kind_name(ProblemKind k);

// One stochastic gradient draw. Reproducible as a pure function of
// (problem seed, worker, iteration); draw_id records the sample index
// (logistic) or the noise counter (quadratic).
struct GradientSample {
  std::uint32_t worker = 0;
  std::uint64_t iteration = 0;
  std::uint64_t draw_id = 0;
  ModelVector grad;
};

// Worker i's share of a synthetic quadratic:
//   f_i(x) = 1/2 (x-c)^T (diag(diag) + rho u u^T) (x-c) + linear^T x
// u/linear may be empty (treated as zero). The matrix is PSD whenever
// diag >= 0 and rho >= 0.
struct QuadraticShard {
  std::vector<double> diag;
  ModelVector u;
  double rho = 0.0;
  ModelVector center;
  ModelVector linear;
};

// Worker i's shard of a synthetic binary classification set; rows is
// samples x dim row-major, labels are +-1. The local objective is
// mean_j log(1 + exp(-y_j a_j^T x)) + reg/2 ||x||^2.
struct LogisticShard {
  std::vector<double> rows;
  std::vector<double> labels;
};

class Problem {
 public:
  // Random quadratic with per-shard eigenvalues inside [1, condition]
  // (condition = 1 gives exactly the identity), additive Gaussian gradient
  // noise with E||noise||^2 = sigma^2. Heterogeneous shards differ in both
  // curvature ordering and centers; homogeneous shards are identical.
  static Problem make_quadratic(std::uint32_t dim, std::uint32_t workers,
                                double condition, double sigma,
                                std::uint64_t seed, bool heterogeneous = true);

  // Synthetic l2-regularized logistic regression; stochastic gradients are
  // single uniformly drawn samples from the worker's shard. Heterogeneous
  // shards partition the dataset disjointly; homogeneous gives every worker
  // the same shard.
  static Problem make_logistic(std::uint32_t dim, std::uint32_t workers,
                               std::uint32_t samples_per_worker,
                               std::uint64_t seed, bool heterogeneous = true);

  // Explicit-shard factory for hand-constructed instances in tests.
  static Problem quadratic_explicit(std::vector<QuadraticShard> shards,
                                    double sigma, std::uint64_t seed);

  ProblemKind kind() const { return kind_; }
  std::uint32_t dim() const { return dim_; }
  std::uint32_t workers() const { return workers_; }
  bool heterogeneous() const { return heterogeneous_; }
  std::uint64_t seed() const { return seed_; }
  double smoothness() const { return smoothness_; }   // valid Lipschitz L
  double noise_sigma() const { return sigma_; }       // E||g - grad_i||^2 <= sigma^2
  double regularizer() const { return reg_; }         // logistic only

  double loss(const ModelVector& x) const;             // f = mean_i f_i
  double worker_loss(std::uint32_t i, const ModelVector& x) const;
  ModelVector full_grad(const ModelVector& x) const;
  ModelVector worker_grad(std::uint32_t i, const ModelVector& x) const;

  // Unbiased stochastic gradient of f_i at x; pure in (seed(), i, t).
  GradientSample stoch_grad(std::uint32_t i, const ModelVector& x,
                            std::uint64_t t) const;

  // Central differences on the global loss, step h per coordinate.
  ModelVector fd_gradient(const ModelVector& x, double h) const;

  // Closed-form global minimizer (quadratic with positive-definite mean
  // curvature only; nullopt otherwise).
  const std::optional<ModelVector>& minimizer() const { return minimizer_; }
  std::optional<double> min_loss() const;

  const QuadraticShard& quadratic_shard(std::uint32_t i) const;
  const LogisticShard& logistic_shard(std::uint32_t i) const;
  std::uint32_t shard_samples(std::uint32_t i) const;

 private:
  Problem() = default;
  void compute_quadratic_minimizer();

  ProblemKind kind_ = ProblemKind::quadratic;
  std::uint32_t dim_ = 0;
  std::uint32_t workers_ = 0;
  bool heterogeneous_ = true;
  std::uint64_t seed_ = 0;
  double smoothness_ = 0.0;
  double sigma_ = 0.0;
  double reg_ = 0.0;
  std::vector<QuadraticShard> quad_;
  std::vector<LogisticShard> logi_;
  std::optional<ModelVector> minimizer_;
};

}  // namespace gradsim
