#include "gradsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gradsim {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t RngStream::stream_seed() const {
  std::uint64_t s = mix64(master_seed);
  s = mix64(s ^ (static_cast<std::uint64_t>(member) + 0x51ed2701ull));
  s = mix64(s ^ (static_cast<std::uint64_t>(purpose) << 32));
  return s;
}

std::mt19937_64 RngStream::engine_at(std::uint64_t counter) const {
  return std::mt19937_64(mix64(stream_seed() ^ mix64(counter)));
}

double uniform_unit(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

double normal_draw(std::mt19937_64& eng) {
  // Box-Muller, cosine leg only; fixed consumption of two engine words.
  const double u1 = static_cast<double>((eng() >> 11) + 1) * 0x1.0p-53;  // (0,1]
  const double u2 = static_cast<double>(eng() >> 11) * 0x1.0p-53;        // [0,1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void gaussian_fill(std::mt19937_64& eng, ModelVector& out) {
  std::size_t j = 0;
  while (j < out.size()) {
    const double u1 = static_cast<double>((eng() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    out[j++] = r * std::cos(a);
    if (j < out.size()) out[j++] = r * std::sin(a);
  }
}

std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n) {
  if (n == 0) {
    throw std::invalid_argument("uniform_index: empty range");
  }
  // Classic rejection to kill modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

std::vector<std::uint32_t> sample_indices(std::mt19937_64& eng, std::uint32_t d,
                                          std::uint32_t k) {
  if (k > d) {
    throw std::invalid_argument("sample_indices: k > d");
  }
  std::vector<std::uint32_t> pool(d);
  for (std::uint32_t i = 0; i < d; ++i) pool[i] = i;
  // Partial Fisher-Yates: after i swaps, pool[0..i) is a uniform i-subset.
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto r = i + static_cast<std::uint32_t>(uniform_index(eng, d - i));
    std::swap(pool[i], pool[r]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace gradsim
