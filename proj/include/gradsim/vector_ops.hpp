#pragma once

#include <vector>

namespace gradsim {

// Dense model/gradient vector. Length is fixed by the problem dimension for
// the lifetime of a run.
using ModelVector = std::vector<double>;

// alpha * x + y, elementwise. Lengths must match.
ModelVector axpy(double alpha, const ModelVector& x, const ModelVector& y);

// Elementwise mean. Summation runs in ascending index order, anchored at
// element 0 (mean = v0 + sum_i(v_i - v0)/n), which keeps the result bitwise
// deterministic and makes the mean of n identical vectors reproduce that
// vector exactly for every n, not just powers of two.
ModelVector mean_reduce(const std::vector<ModelVector>& vs);
ModelVector mean_reduce(const std::vector<const ModelVector*>& vs);

double sq_norm(const ModelVector& x);
double dot(const ModelVector& x, const ModelVector& y);
double l1_norm(const ModelVector& x);
double linf_norm(const ModelVector& x);
bool all_finite(const ModelVector& x);

}  // namespace gradsim
