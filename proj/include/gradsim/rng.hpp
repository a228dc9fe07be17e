#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gradsim/vector_ops.hpp"

namespace gradsim {

// Each consumer of randomness in a run draws from its own stream so that
// changing how one consumer samples (e.g. swapping the compressor) cannot
// perturb the others.
enum class StreamPurpose : std::uint32_t {
  data = 1,        // problem/data generation
  noise = 2,       // stochastic gradient noise / sample picks
  compressor = 3,  // random-k index selection
};

// Member id reserved for the parameter server's own streams.
inline constexpr std::uint32_t kServerMember = 0xffffffffu;

// splitmix64 finalizer; the standard cheap 64-bit hash step.
std::uint64_t mix64(std::uint64_t z);

// Deterministic family of engines keyed by (master seed, member, purpose).
// engine_at(c) is a pure function of the key and the counter, so every draw
// made from it is reproducible regardless of thread schedule or of what any
// other stream consumed.
struct RngStream {
  std::uint64_t master_seed = 0;
  std::uint32_t member = 0;
  StreamPurpose purpose = StreamPurpose::data;

  std::uint64_t stream_seed() const;
  std::mt19937_64 engine_at(std::uint64_t counter) const;
  std::mt19937_64 engine() const { return engine_at(0); }
};

// Distribution transforms are hand-rolled on top of mt19937_64 (whose output
// the standard pins bit-exactly); std::*_distribution is implementation
// defined and would break cross-toolchain reproducibility.
double uniform_unit(std::mt19937_64& eng);   // [0, 1), 53-bit
double normal_draw(std::mt19937_64& eng);    // N(0,1); consumes 2 words
void gaussian_fill(std::mt19937_64& eng, ModelVector& out);
std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n);  // [0, n)

// Uniform k-subset of {0..d-1} without replacement, returned ascending.
std::vector<std::uint32_t> sample_indices(std::mt19937_64& eng, std::uint32_t d,
                                          std::uint32_t k);

}  // namespace gradsim
