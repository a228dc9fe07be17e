#include "gradsim/wire.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gradsim {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

float to_f32_checked(double v, const char* what) {
  const float f = static_cast<float>(v);
  if (!std::isfinite(f)) {
    throw std::invalid_argument(std::string("encode_frame: ") + what +
                                " not representable as a finite f32");
  }
  return f;
}

// Sequential reader that reports the byte offset of the first inconsistency.
struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t at = 0;

  void need(std::size_t n, const char* what) const {
    if (bytes.size() - at < n) {
      throw DecodeError(at, std::string("truncated frame, expected ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes[at++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = static_cast<std::uint32_t>(bytes[at]) |
                      static_cast<std::uint32_t>(bytes[at + 1]) << 8 |
                      static_cast<std::uint32_t>(bytes[at + 2]) << 16 |
                      static_cast<std::uint32_t>(bytes[at + 3]) << 24;
    at += 4;
    return v;
  }
  float f32(const char* what) {
    const std::size_t here = at;
    const std::uint32_t bits = u32(what);
    float f;
    std::memcpy(&f, &bits, 4);
    if (!std::isfinite(f)) {
      throw DecodeError(here, std::string(what) + " is not finite");
    }
    return f;
  }
};

}  // namespace

std::vector<std::uint8_t> encode_frame(const CompressedPayload& p) {
  std::vector<std::uint8_t> out;
  out.reserve(frame_length(p));
  const std::uint32_t dim = payload_dim(p);
  if (dim == 0) {
    throw std::invalid_argument("encode_frame: zero dimension");
  }
  if (const auto* dp = std::get_if<DensePayload>(&p)) {
    out.push_back(kTagDense);
    put_u32(out, dim);
    for (double v : dp->values) put_f32(out, to_f32_checked(v, "value"));
    return out;
  }
  if (const auto* sp = std::get_if<SparsePayload>(&p)) {
    if (sp->indices.size() != sp->values.size()) {
      throw std::invalid_argument("encode_frame: sparse index/value mismatch");
    }
    out.push_back(kTagSparse);
    put_u32(out, dim);
    put_u32(out, static_cast<std::uint32_t>(sp->indices.size()));
    std::uint32_t prev = 0;
    bool first = true;
    for (std::uint32_t idx : sp->indices) {
      if (idx >= dim || (!first && idx <= prev)) {
        throw std::invalid_argument("encode_frame: sparse indices not ascending");
      }
      put_u32(out, idx);
      prev = idx;
      first = false;
    }
    for (double v : sp->values) put_f32(out, to_f32_checked(v, "value"));
    return out;
  }
  const auto& ss = std::get<SignScalePayload>(p);
  if (ss.scales.size() != ss.block_ends.size() || ss.block_ends.empty()) {
    throw std::invalid_argument("encode_frame: malformed sign-scale payload");
  }
  if (ss.sign_bits.size() != (static_cast<std::size_t>(dim) + 7) / 8) {
    throw std::invalid_argument("encode_frame: sign bit count mismatch");
  }
  out.push_back(kTagSignScale);
  put_u32(out, dim);
  put_u32(out, static_cast<std::uint32_t>(ss.block_ends.size()));
  std::uint32_t prev = 0;
  for (std::size_t b = 0; b < ss.block_ends.size(); ++b) {
    if (ss.block_ends[b] <= prev || ss.block_ends[b] > dim) {
      throw std::invalid_argument("encode_frame: block ends not increasing");
    }
    put_u32(out, ss.block_ends[b]);
    if (!std::isfinite(ss.scales[b])) {
      throw std::invalid_argument("encode_frame: scale not finite");
    }
    put_f32(out, ss.scales[b]);
    prev = ss.block_ends[b];
  }
  out.insert(out.end(), ss.sign_bits.begin(), ss.sign_bits.end());
  return out;
}

CompressedPayload decode_frame(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  const std::uint8_t tag = r.u8("tag");
  if (tag != kTagDense && tag != kTagSparse && tag != kTagSignScale) {
    throw DecodeError(0, "unknown tag");
  }
  const std::size_t dim_at = r.at;
  const std::uint32_t dim = r.u32("dimension");
  if (dim == 0) {
    throw DecodeError(dim_at, "zero dimension");
  }

  // Declared counts are untrusted: buffers grow element by element, with a
  // reservation capped by what the remaining bytes could possibly back, so a
  // forged count cannot force a huge allocation before the reads run dry.
  if (tag == kTagDense) {
    DensePayload out;
    out.values.reserve(std::min<std::size_t>(dim, (bytes.size() - r.at) / 4));
    for (std::uint32_t j = 0; j < dim; ++j) {
      out.values.push_back(static_cast<double>(r.f32("dense value")));
    }
    if (r.at != bytes.size()) throw DecodeError(r.at, "trailing bytes");
    return out;
  }

  if (tag == kTagSparse) {
    const std::size_t k_at = r.at;
    const std::uint32_t k = r.u32("sparse count");
    if (k > dim) {
      throw DecodeError(k_at, "sparse count exceeds dimension");
    }
    SparsePayload out;
    out.dim = dim;
    const std::size_t plausible = (bytes.size() - r.at) / 8;
    out.indices.reserve(std::min<std::size_t>(k, plausible));
    out.values.reserve(std::min<std::size_t>(k, plausible));
    std::uint32_t prev = 0;
    for (std::uint32_t i = 0; i < k; ++i) {
      const std::size_t idx_at = r.at;
      const std::uint32_t idx = r.u32("sparse index");
      if (idx >= dim || (i > 0 && idx <= prev)) {
        throw DecodeError(idx_at, "sparse indices not strictly ascending");
      }
      out.indices.push_back(idx);
      prev = idx;
    }
    for (std::uint32_t i = 0; i < k; ++i) {
      out.values.push_back(static_cast<double>(r.f32("sparse value")));
    }
    if (r.at != bytes.size()) throw DecodeError(r.at, "trailing bytes");
    return out;
  }

  const std::size_t bc_at = r.at;
  const std::uint32_t blocks = r.u32("block count");
  if (blocks == 0 || blocks > dim) {
    throw DecodeError(bc_at, "block count outside [1, dimension]");
  }
  SignScalePayload out;
  const std::size_t plausible = (bytes.size() - r.at) / 8;
  out.block_ends.reserve(std::min<std::size_t>(blocks, plausible));
  out.scales.reserve(std::min<std::size_t>(blocks, plausible));
  std::uint32_t prev = 0;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    const std::size_t end_at = r.at;
    const std::uint32_t end = r.u32("block end");
    if (end <= prev || end > dim) {
      throw DecodeError(end_at, "block ends not strictly increasing");
    }
    out.block_ends.push_back(end);
    out.scales.push_back(r.f32("block scale"));
    prev = end;
  }
  if (prev != dim) {
    throw DecodeError(r.at, "blocks do not cover the dimension");
  }
  const std::size_t nbytes = (static_cast<std::size_t>(dim) + 7) / 8;
  r.need(nbytes, "sign bits");
  out.sign_bits.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.at),
                       bytes.begin() + static_cast<std::ptrdiff_t>(r.at + nbytes));
  r.at += nbytes;
  if (dim % 8 != 0) {
    const std::uint8_t pad_mask =
        static_cast<std::uint8_t>(0xffu >> (dim % 8));
    if ((out.sign_bits.back() & pad_mask) != 0) {
      throw DecodeError(r.at - 1, "nonzero padding bits");
    }
  }
  if (r.at != bytes.size()) throw DecodeError(r.at, "trailing bytes");
  return out;
}

std::size_t frame_length(const CompressedPayload& p) {
  const std::size_t dim = payload_dim(p);
  if (std::holds_alternative<DensePayload>(p)) {
    return 5 + 4 * dim;
  }
  if (const auto* sp = std::get_if<SparsePayload>(&p)) {
    return 9 + 8 * sp->indices.size();
  }
  const auto& ss = std::get<SignScalePayload>(p);
  return 9 + 8 * ss.block_ends.size() + (dim + 7) / 8;
}

std::size_t frame_length(const CompressorSpec& spec, std::uint32_t dim) {
  spec.validate(dim);
  switch (spec.kind) {
    case CompressorKind::identity:
      return 5 + 4 * static_cast<std::size_t>(dim);
    case CompressorKind::top_k:
    case CompressorKind::random_k:
      return 9 + 8 * static_cast<std::size_t>(spec.k);
    case CompressorKind::sign:
      return 9 + 8 + (static_cast<std::size_t>(dim) + 7) / 8;
    case CompressorKind::blockwise_sign:
      return 9 + 8 * static_cast<std::size_t>(spec.num_blocks) +
             (static_cast<std::size_t>(dim) + 7) / 8;
  }
  throw std::invalid_argument("frame_length: unknown kind");
}

}  // namespace gradsim
