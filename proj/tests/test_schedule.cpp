#include <doctest.h>

#include <stdexcept>

#include "gradsim/schedule.hpp"

using namespace gradsim;

// Frozen against a 60-digit decimal evaluation of
// 1 / (sqrt(T/N) + L + T^(1/3) / delta^(2/3)).
TEST_CASE("theory_lr matches high-precision reference points") {
  CHECK(theory_lr(1, 1, 1.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(theory_lr(64, 4, 2.0, 0.5) ==
        doctest::Approx(0.080974254977540580251).epsilon(1e-14));
  CHECK(theory_lr(1000000, 8, 10.0, 0.25) ==
        doctest::Approx(0.0016245961238928823769).epsilon(1e-14));
}

TEST_CASE("theory_lr shrinks with the horizon and grows with the fleet") {
  CHECK(theory_lr(1000, 4, 2.0, 0.5) > theory_lr(100000, 4, 2.0, 0.5));
  CHECK(theory_lr(1000, 8, 2.0, 0.5) > theory_lr(1000, 4, 2.0, 0.5));
  CHECK(theory_lr(1000, 4, 2.0, 0.9) > theory_lr(1000, 4, 2.0, 0.1));
}

TEST_CASE("theory_lr clears the small-step gate once T >= 1000 L^3 / delta") {
  const double L = 2.0, delta = 0.25;
  const double threshold = 1000.0 * L * L * L / delta;  // 32000
  CHECK(theory_lr(static_cast<std::uint64_t>(threshold), 8, L, delta) <
        delta / (10.0 * L));
  CHECK(theory_lr(1u << 20, 8, L, delta) < delta / (10.0 * L));
}

TEST_CASE("theory_lr validates its domain") {
  CHECK_THROWS_AS(theory_lr(0, 1, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(theory_lr(1, 0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(theory_lr(1, 1, 0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(theory_lr(1, 1, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(theory_lr(1, 1, 1.0, 1.5), std::invalid_argument);
}

TEST_CASE("resolve_eta honours both schedule kinds") {
  CHECK(resolve_eta(ScheduleSpec{ScheduleKind::constant, 0.125}, 999, 3, 50.0,
                    0.1) == 0.125);
  CHECK(resolve_eta(ScheduleSpec{ScheduleKind::theory, 0.0}, 64, 4, 2.0, 0.5) ==
        theory_lr(64, 4, 2.0, 0.5));
}
