#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradsim/compressor.hpp"

namespace gradsim {

// Frame layout, all multi-byte fields little-endian:
//
//   offset 0   tag        u8   0x00 dense | 0x01 sparse | 0x02 sign-scale
//   offset 1   dimension  u32
//   dense      d x f32 values
//   sparse     u32 k, then k strictly ascending u32 indices, then k f32 values
//   sign-scale u32 block count, per block { u32 end offset, f32 scale },
//              then ceil(d/8) sign bytes (MSB first, set bit = negative,
//              zero-padded)
//
// Values always travel as 32-bit floats; payloads hold doubles in memory, so
// decode(encode(p)) returns p with values rounded through f32.

inline constexpr std::uint8_t kTagDense = 0x00;
inline constexpr std::uint8_t kTagSparse = 0x01;
inline constexpr std::uint8_t kTagSignScale = 0x02;

// Raised for any malformed frame; offset is the byte position of the first
// inconsistency.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : std::runtime_error("decode error at offset " + std::to_string(offset) +
                           ": " + what),
        offset(offset) {}
  std::size_t offset;
};

std::vector<std::uint8_t> encode_frame(const CompressedPayload& p);
CompressedPayload decode_frame(std::span<const std::uint8_t> bytes);

// Exact encoded size, without encoding.
std::size_t frame_length(const CompressedPayload& p);
// Closed-form encoded size of any frame the described operator emits at dim d.
std::size_t frame_length(const CompressorSpec& spec, std::uint32_t dim);

}  // namespace gradsim
