#pragma once

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "gradsim/rng.hpp"
#include "gradsim/vector_ops.hpp"

namespace gradsim {

// Default contraction estimate for the sign family, whose true factor depends
// on the gradient distribution; replace it with a measured value from
// measure_delta when tighter schedules or bounds are needed.
inline constexpr double kDefaultSignDelta = 0.3;

enum class CompressorKind { identity, top_k, random_k, sign, blockwise_sign };

// Static description of one compression operator.
//
// nominal_delta is the contraction parameter schedules and monitors use:
// exact (k/d) for random-k, a lower bound (k/d) for top-k, 1 for identity,
// and a configured estimate for the sign family.
struct CompressorSpec {
  CompressorKind kind = CompressorKind::identity;
  std::uint32_t k = 0;           // top-k / random-k
  std::uint32_t num_blocks = 1;  // blockwise sign
  double nominal_delta = 1.0;

  static CompressorSpec identity();
  static CompressorSpec top_k(std::uint32_t k, std::uint32_t dim);
  static CompressorSpec random_k(std::uint32_t k, std::uint32_t dim);
  static CompressorSpec sign(double nominal_delta = kDefaultSignDelta);
  static CompressorSpec blockwise_sign(std::uint32_t blocks,
                                       double nominal_delta = kDefaultSignDelta);

  bool needs_rng() const { return kind == CompressorKind::random_k; }
  void validate(std::uint32_t dim) const;  // throws std::invalid_argument
};

const char* compressor_kind_name(CompressorKind k);

// ---- payloads -------------------------------------------------------------

struct DensePayload {
  std::vector<double> values;
};

struct SparsePayload {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> indices;  // strictly ascending, < dim
  std::vector<double> values;          // one per index; explicit zeros allowed
};

struct SignScalePayload {
  // Exclusive end offsets of the contiguous blocks; strictly increasing,
  // back() == dim. Scales carry wire precision (32-bit) by construction.
  std::vector<std::uint32_t> block_ends;
  std::vector<float> scales;
  // One bit per coordinate, MSB first, zero-padded to a byte boundary.
  // A set bit means negative; zero therefore encodes as +1.
  std::vector<std::uint8_t> sign_bits;
};

using CompressedPayload =
    std::variant<DensePayload, SparsePayload, SignScalePayload>;

std::uint32_t payload_dim(const CompressedPayload& p);

// ---- operators -------------------------------------------------------------

// Keeps the k entries of largest magnitude; ties break toward the lower
// index, so the kept set is a deterministic function of the input.
CompressedPayload compress_topk(const ModelVector& x, std::uint32_t k);

// Keeps a uniformly random k-subset of coordinates, no rescaling.
CompressedPayload compress_randk(const ModelVector& x, std::uint32_t k,
                                 std::mt19937_64& eng);

// l1(x)/d * sign(x), with sign(0) = +1.
CompressedPayload compress_sign(const ModelVector& x);

// Per-block l1(x_b)/|b| * sign(x_b) over contiguous blocks of size
// floor(d/B) or ceil(d/B). With one block this produces a payload
// byte-identical to compress_sign.
CompressedPayload compress_blockwise_sign(const ModelVector& x,
                                          std::uint32_t num_blocks);

CompressedPayload compress_identity(const ModelVector& x);

// Dispatch on spec.kind; eng is required exactly when spec.needs_rng().
CompressedPayload compress(const CompressorSpec& spec, const ModelVector& x,
                           std::mt19937_64* eng = nullptr);

ModelVector decompress(const CompressedPayload& p, std::uint32_t dim);

// Empirical contraction factor: 1 - mean ||x - C(x)||^2 / ||x||^2 over
// standard Gaussian draws (zero-norm draws skipped).
double measure_delta(const CompressorSpec& spec, std::uint32_t dim,
                     std::uint32_t samples, const RngStream& stream);

}  // namespace gradsim
