#include "gradsim/vector_ops.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace gradsim {

ModelVector axpy(double alpha, const ModelVector& x, const ModelVector& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("axpy: length mismatch");
  }
  ModelVector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = alpha * x[j] + y[j];
  }
  return out;
}

namespace {

ModelVector mean_reduce_impl(const ModelVector* const* vs, std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("mean_reduce: empty input");
  }
  const ModelVector& anchor = *vs[0];
  const std::size_t d = anchor.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (vs[i]->size() != d) {
      throw std::invalid_argument("mean_reduce: length mismatch");
    }
  }
  ModelVector acc(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const ModelVector& v = *vs[i];
    for (std::size_t j = 0; j < d; ++j) {
      acc[j] += v[j] - anchor[j];
    }
  }
  ModelVector out(d);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = anchor[j] + acc[j] * inv;
  }
  return out;
}

}  // namespace

ModelVector mean_reduce(const std::vector<ModelVector>& vs) {
  std::vector<const ModelVector*> ptrs(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) ptrs[i] = &vs[i];
  return mean_reduce_impl(ptrs.data(), ptrs.size());
}

ModelVector mean_reduce(const std::vector<const ModelVector*>& vs) {
  return mean_reduce_impl(vs.data(), vs.size());
}

double sq_norm(const ModelVector& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double dot(const ModelVector& x, const ModelVector& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * y[j];
  return s;
}

double l1_norm(const ModelVector& x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

double linf_norm(const ModelVector& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const ModelVector& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace gradsim
