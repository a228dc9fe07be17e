#include "gradsim/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace gradsim {

double theory_lr(std::uint64_t iterations, std::uint32_t workers, double L,
                 double delta) {
  if (iterations == 0 || workers == 0) {
    throw std::invalid_argument("theory_lr: iterations and workers must be >= 1");
  }
  if (!(L > 0.0)) {
    throw std::invalid_argument("theory_lr: L must be > 0");
  }
  if (!(delta > 0.0) || delta > 1.0) {
    throw std::invalid_argument("theory_lr: delta outside (0, 1]");
  }
  const double t = static_cast<double>(iterations);
  const double n = static_cast<double>(workers);
  // cbrt(delta^2) evaluates delta^(2/3) without the rounded-exponent error of
  // pow(delta, 2.0/3.0).
  const double denom = std::sqrt(t / n) + L + std::cbrt(t) / std::cbrt(delta * delta);
  return 1.0 / denom;
}

double resolve_eta(const ScheduleSpec& s, std::uint64_t iterations,
                   std::uint32_t workers, double L, double delta) {
  if (s.kind == ScheduleKind::constant) {
    if (!(s.eta > 0.0)) {
      throw std::invalid_argument("schedule: constant eta must be > 0");
    }
    return s.eta;
  }
  return theory_lr(iterations, workers, L, delta);
}

}  // namespace gradsim
