#pragma once

#include <cstdint>

namespace gradsim {

enum class ScheduleKind { constant, theory };

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::constant;
  double eta = 0.01;  // constant schedule only
};

// Horizon-aware step size
//   eta(T, N, L, delta) = 1 / (sqrt(T/N) + L + T^(1/3) / delta^(2/3)).
// Satisfies eta < delta / (10 L) whenever T >= 1000 L^3 / delta, since the
// last denominator term alone then reaches 10 L / delta.
double theory_lr(std::uint64_t iterations, std::uint32_t workers, double L,
                 double delta);

double resolve_eta(const ScheduleSpec& s, std::uint64_t iterations,
                   std::uint32_t workers, double L, double delta);

}  // namespace gradsim
