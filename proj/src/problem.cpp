#include "gradsim/problem.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gradsim {

namespace {

constexpr double kLogisticReg = 1e-2;
constexpr double kRowScale = 2.0;        // target feature-row norm
constexpr double kLabelNoise = 0.5;
constexpr double kShardShift = 1.0;      // heterogeneous feature-mean offset
// Fraction of the curvature range carried by the rank-1 factor; the rest
// spreads across the diagonal, keeping all eigenvalues inside [1, condition].
constexpr double kLowRankShare = 0.5;
// Dense minimizer solves are meant for desk-scale dimensions only.
constexpr std::uint32_t kMinimizerMaxDim = 4096;

double stable_log1pexp(double t) {
  // log(1 + exp(t)) without overflow.
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

const char* problem_kind_name(ProblemKind k) {
  return k == ProblemKind::quadratic ? "quadratic" : "logistic";
}

Problem Problem::make_quadratic(std::uint32_t dim, std::uint32_t workers,
                                double condition, double sigma,
                                std::uint64_t seed, bool heterogeneous) {
  if (dim == 0 || workers == 0) {
    throw std::invalid_argument("make_quadratic: dim and workers must be >= 1");
  }
  if (!(condition >= 1.0) || !(sigma >= 0.0)) {
    throw std::invalid_argument("make_quadratic: need condition >= 1, sigma >= 0");
  }
  Problem p;
  p.kind_ = ProblemKind::quadratic;
  p.dim_ = dim;
  p.workers_ = workers;
  p.heterogeneous_ = heterogeneous;
  p.seed_ = seed;
  p.sigma_ = sigma;
  p.smoothness_ = condition;

  const double rho = kLowRankShare * (condition - 1.0);
  const double diag_max = 1.0 + (1.0 - kLowRankShare) * (condition - 1.0);
  const std::uint32_t built = heterogeneous ? workers : 1;
  p.quad_.resize(built);
  for (std::uint32_t i = 0; i < built; ++i) {
    auto eng = RngStream{seed, i, StreamPurpose::data}.engine();
    QuadraticShard& sh = p.quad_[i];
    sh.diag.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      sh.diag[j] = dim > 1 ? 1.0 + (diag_max - 1.0) * static_cast<double>(j) /
                                       static_cast<double>(dim - 1)
                           : 1.0;
    }
    // Per-shard curvature ordering.
    for (std::uint32_t j = dim - 1; j > 0; --j) {
      const auto r = static_cast<std::uint32_t>(uniform_index(eng, j + 1));
      std::swap(sh.diag[j], sh.diag[r]);
    }
    sh.rho = rho;
    if (rho > 0.0) {
      sh.u.resize(dim);
      gaussian_fill(eng, sh.u);
      const double n = std::sqrt(sq_norm(sh.u));
      for (double& v : sh.u) v /= n;
    }
    sh.center.resize(dim);
    gaussian_fill(eng, sh.center);
  }
  if (!heterogeneous) {
    p.quad_.resize(workers, p.quad_[0]);
  }
  p.compute_quadratic_minimizer();
  return p;
}

Problem Problem::quadratic_explicit(std::vector<QuadraticShard> shards,
                                    double sigma, std::uint64_t seed) {
  if (shards.empty()) {
    throw std::invalid_argument("quadratic_explicit: no shards");
  }
  Problem p;
  p.kind_ = ProblemKind::quadratic;
  p.dim_ = static_cast<std::uint32_t>(shards[0].diag.size());
  if (p.dim_ == 0) {
    throw std::invalid_argument("quadratic_explicit: zero dimension");
  }
  p.workers_ = static_cast<std::uint32_t>(shards.size());
  p.seed_ = seed;
  p.sigma_ = sigma;
  double lmax = 0.0;
  for (auto& sh : shards) {
    if (sh.diag.size() != p.dim_ ||
        (!sh.u.empty() && sh.u.size() != p.dim_) ||
        sh.center.size() != p.dim_ ||
        (!sh.linear.empty() && sh.linear.size() != p.dim_)) {
      throw std::invalid_argument("quadratic_explicit: shard size mismatch");
    }
    if (sh.rho < 0.0) {
      throw std::invalid_argument("quadratic_explicit: rho must be >= 0");
    }
    double dmax = 0.0;
    for (double v : sh.diag) {
      if (v < 0.0) {
        throw std::invalid_argument("quadratic_explicit: diag must be >= 0");
      }
      dmax = std::max(dmax, v);
    }
    lmax = std::max(lmax, dmax + sh.rho * sq_norm(sh.u));
  }
  p.smoothness_ = lmax;
  p.quad_ = std::move(shards);
  p.compute_quadratic_minimizer();
  return p;
}

Problem Problem::make_logistic(std::uint32_t dim, std::uint32_t workers,
                               std::uint32_t samples_per_worker,
                               std::uint64_t seed, bool heterogeneous) {
  if (dim == 0 || workers == 0 || samples_per_worker == 0) {
    throw std::invalid_argument("make_logistic: sizes must be >= 1");
  }
  Problem p;
  p.kind_ = ProblemKind::logistic;
  p.dim_ = dim;
  p.workers_ = workers;
  p.heterogeneous_ = heterogeneous;
  p.seed_ = seed;
  p.reg_ = kLogisticReg;

  auto truth_eng = RngStream{seed, kServerMember, StreamPurpose::data}.engine();
  ModelVector w_star(dim);
  gaussian_fill(truth_eng, w_star);

  const double feat = kRowScale / std::sqrt(static_cast<double>(dim));
  const std::uint32_t built = heterogeneous ? workers : 1;
  double max_row_sq = 0.0;
  p.logi_.resize(built);
  for (std::uint32_t i = 0; i < built; ++i) {
    auto eng = RngStream{seed, i, StreamPurpose::data}.engine();
    LogisticShard& sh = p.logi_[i];
    ModelVector shift(dim, 0.0);
    if (heterogeneous && workers > 1) {
      gaussian_fill(eng, shift);
      for (double& v : shift) v *= kShardShift * feat;
    }
    sh.rows.resize(static_cast<std::size_t>(samples_per_worker) * dim);
    sh.labels.resize(samples_per_worker);
    ModelVector row(dim);
    for (std::uint32_t s = 0; s < samples_per_worker; ++s) {
      gaussian_fill(eng, row);
      double margin = 0.0;
      double row_sq = 0.0;
      for (std::uint32_t j = 0; j < dim; ++j) {
        const double a = row[j] * feat + shift[j];
        sh.rows[static_cast<std::size_t>(s) * dim + j] = a;
        margin += a * w_star[j];
        row_sq += a * a;
      }
      max_row_sq = std::max(max_row_sq, row_sq);
      const double noisy = margin + kLabelNoise * normal_draw(eng);
      sh.labels[s] = noisy >= 0.0 ? 1.0 : -1.0;
    }
  }
  if (!heterogeneous) {
    p.logi_.resize(workers, p.logi_[0]);
  }
  p.smoothness_ = max_row_sq / 4.0 + p.reg_;
  // Single-sample draws satisfy E||g - grad_i||^2 <= max_j ||a_j||^2.
  p.sigma_ = std::sqrt(max_row_sq);
  return p;
}

void Problem::compute_quadratic_minimizer() {
  if (dim_ > kMinimizerMaxDim) return;
  const auto n = static_cast<double>(workers_);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim_, dim_);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim_);
  for (const QuadraticShard& sh : quad_) {
    for (std::uint32_t j = 0; j < dim_; ++j) A(j, j) += sh.diag[j];
    Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(sh.center.data(), dim_);
    Eigen::VectorXd Ac = sh.diag.empty() ? Eigen::VectorXd::Zero(dim_)
                                         : Eigen::VectorXd(c);
    for (std::uint32_t j = 0; j < dim_; ++j) Ac(j) = sh.diag[j] * c(j);
    if (sh.rho > 0.0 && !sh.u.empty()) {
      Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(sh.u.data(), dim_);
      A.noalias() += sh.rho * (u * u.transpose());
      Ac.noalias() += sh.rho * u * u.dot(c);
    }
    rhs += Ac;
    if (!sh.linear.empty()) {
      rhs -= Eigen::Map<const Eigen::VectorXd>(sh.linear.data(), dim_);
    }
  }
  A /= n;
  rhs /= n;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
  Eigen::VectorXd x = ldlt.solve(rhs);
  if (!x.allFinite()) return;
  // Reject near-singular systems the factorization did not flag.
  if ((A * x - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) return;
  minimizer_ = ModelVector(x.data(), x.data() + dim_);
}

double Problem::worker_loss(std::uint32_t i, const ModelVector& x) const {
  if (i >= workers_ || x.size() != dim_) {
    throw std::invalid_argument("worker_loss: bad worker or dimension");
  }
  if (kind_ == ProblemKind::quadratic) {
    const QuadraticShard& sh = quad_[i];
    double qs = 0.0;
    double udot = 0.0;
    for (std::uint32_t j = 0; j < dim_; ++j) {
      const double dxj = x[j] - sh.center[j];
      qs += sh.diag[j] * dxj * dxj;
      if (!sh.u.empty()) udot += sh.u[j] * dxj;
    }
    double out = 0.5 * qs + 0.5 * sh.rho * udot * udot;
    if (!sh.linear.empty()) out += dot(sh.linear, x);
    return out;
  }
  const LogisticShard& sh = logi_[i];
  const std::size_t n = sh.labels.size();
  double acc = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = sh.rows.data() + s * dim_;
    double margin = 0.0;
    for (std::uint32_t j = 0; j < dim_; ++j) margin += row[j] * x[j];
    acc += stable_log1pexp(-sh.labels[s] * margin);
  }
  return acc / static_cast<double>(n) + 0.5 * reg_ * sq_norm(x);
}

double Problem::loss(const ModelVector& x) const {
  double acc = 0.0;
  for (std::uint32_t i = 0; i < workers_; ++i) acc += worker_loss(i, x);
  return acc / static_cast<double>(workers_);
}

ModelVector Problem::worker_grad(std::uint32_t i, const ModelVector& x) const {
  if (i >= workers_ || x.size() != dim_) {
    throw std::invalid_argument("worker_grad: bad worker or dimension");
  }
  ModelVector g(dim_, 0.0);
  if (kind_ == ProblemKind::quadratic) {
    const QuadraticShard& sh = quad_[i];
    double udot = 0.0;
    if (!sh.u.empty()) {
      for (std::uint32_t j = 0; j < dim_; ++j) udot += sh.u[j] * (x[j] - sh.center[j]);
    }
    for (std::uint32_t j = 0; j < dim_; ++j) {
      g[j] = sh.diag[j] * (x[j] - sh.center[j]);
      if (!sh.u.empty()) g[j] += sh.rho * udot * sh.u[j];
      if (!sh.linear.empty()) g[j] += sh.linear[j];
    }
    return g;
  }
  const LogisticShard& sh = logi_[i];
  const std::size_t n = sh.labels.size();
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = sh.rows.data() + s * dim_;
    double margin = 0.0;
    for (std::uint32_t j = 0; j < dim_; ++j) margin += row[j] * x[j];
    const double w = -sh.labels[s] * sigmoid(-sh.labels[s] * margin);
    for (std::uint32_t j = 0; j < dim_; ++j) g[j] += w * row[j];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (std::uint32_t j = 0; j < dim_; ++j) g[j] = g[j] * inv + reg_ * x[j];
  return g;
}

ModelVector Problem::full_grad(const ModelVector& x) const {
  std::vector<ModelVector> grads(workers_);
  for (std::uint32_t i = 0; i < workers_; ++i) grads[i] = worker_grad(i, x);
  return mean_reduce(grads);
}

GradientSample Problem::stoch_grad(std::uint32_t i, const ModelVector& x,
                                   std::uint64_t t) const {
  GradientSample out;
  out.worker = i;
  out.iteration = t;
  if (kind_ == ProblemKind::quadratic) {
    out.grad = worker_grad(i, x);
    out.draw_id = t;
    if (sigma_ > 0.0) {
      auto eng = RngStream{seed_, i, StreamPurpose::noise}.engine_at(t);
      ModelVector z(dim_);
      gaussian_fill(eng, z);
      const double scale = sigma_ / std::sqrt(static_cast<double>(dim_));
      for (std::uint32_t j = 0; j < dim_; ++j) out.grad[j] += scale * z[j];
    }
    return out;
  }
  if (i >= workers_ || x.size() != dim_) {
    throw std::invalid_argument("stoch_grad: bad worker or dimension");
  }
  const LogisticShard& sh = logi_[i];
  auto eng = RngStream{seed_, i, StreamPurpose::noise}.engine_at(t);
  const std::uint64_t s = uniform_index(eng, sh.labels.size());
  out.draw_id = s;
  const double* row = sh.rows.data() + s * dim_;
  double margin = 0.0;
  for (std::uint32_t j = 0; j < dim_; ++j) margin += row[j] * x[j];
  const double w = -sh.labels[s] * sigmoid(-sh.labels[s] * margin);
  out.grad.resize(dim_);
  for (std::uint32_t j = 0; j < dim_; ++j) out.grad[j] = w * row[j] + reg_ * x[j];
  return out;
}

ModelVector Problem::fd_gradient(const ModelVector& x, double h) const {
  if (!(h > 0.0)) {
    throw std::invalid_argument("fd_gradient: step must be > 0");
  }
  ModelVector probe = x;
  ModelVector g(dim_);
  for (std::uint32_t j = 0; j < dim_; ++j) {
    const double xj = probe[j];
    probe[j] = xj + h;
    const double up = loss(probe);
    probe[j] = xj - h;
    const double down = loss(probe);
    probe[j] = xj;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

std::optional<double> Problem::min_loss() const {
  if (!minimizer_) return std::nullopt;
  return loss(*minimizer_);
}

const QuadraticShard& Problem::quadratic_shard(std::uint32_t i) const {
  if (kind_ != ProblemKind::quadratic || i >= quad_.size()) {
    throw std::invalid_argument("quadratic_shard: bad access");
  }
  return quad_[i];
}

const LogisticShard& Problem::logistic_shard(std::uint32_t i) const {
  if (kind_ != ProblemKind::logistic || i >= logi_.size()) {
    throw std::invalid_argument("logistic_shard: bad access");
  }
  return logi_[i];
}

std::uint32_t Problem::shard_samples(std::uint32_t i) const {
  return static_cast<std::uint32_t>(logistic_shard(i).labels.size());
}

}  // namespace gradsim
