#include "gradsim/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gradsim {

CompressorSpec CompressorSpec::identity() {
  return CompressorSpec{CompressorKind::identity, 0, 1, 1.0};
}

CompressorSpec CompressorSpec::top_k(std::uint32_t k, std::uint32_t dim) {
  CompressorSpec s{CompressorKind::top_k, k, 1, 0.0};
  if (dim == 0 || k == 0 || k > dim) {
    throw std::invalid_argument("top_k: need 1 <= k <= dim");
  }
  s.nominal_delta = static_cast<double>(k) / static_cast<double>(dim);
  return s;
}

CompressorSpec CompressorSpec::random_k(std::uint32_t k, std::uint32_t dim) {
  CompressorSpec s{CompressorKind::random_k, k, 1, 0.0};
  if (dim == 0 || k == 0 || k > dim) {
    throw std::invalid_argument("random_k: need 1 <= k <= dim");
  }
  s.nominal_delta = static_cast<double>(k) / static_cast<double>(dim);
  return s;
}

CompressorSpec CompressorSpec::sign(double nominal_delta) {
  CompressorSpec s{CompressorKind::sign, 0, 1, nominal_delta};
  return s;
}

CompressorSpec CompressorSpec::blockwise_sign(std::uint32_t blocks,
                                              double nominal_delta) {
  CompressorSpec s{CompressorKind::blockwise_sign, 0, blocks, nominal_delta};
  return s;
}

void CompressorSpec::validate(std::uint32_t dim) const {
  if (dim == 0) {
    throw std::invalid_argument("compressor: zero dimension");
  }
  if (!(nominal_delta > 0.0) || nominal_delta > 1.0) {
    throw std::invalid_argument("compressor: nominal_delta outside (0, 1]");
  }
  switch (kind) {
    case CompressorKind::identity:
      break;
    case CompressorKind::top_k:
    case CompressorKind::random_k:
      if (k == 0 || k > dim) {
        throw std::invalid_argument("compressor: need 1 <= k <= dim");
      }
      break;
    case CompressorKind::sign:
      break;
    case CompressorKind::blockwise_sign:
      if (num_blocks == 0 || num_blocks > dim) {
        throw std::invalid_argument("compressor: need 1 <= blocks <= dim");
      }
      break;
  }
}

const char* compressor_kind_name(CompressorKind k) {
  switch (k) {
    case CompressorKind::identity: return "identity";
    case CompressorKind::top_k: return "topk";
    case CompressorKind::random_k: return "randk";
    case CompressorKind::sign: return "sign";
    case CompressorKind::blockwise_sign: return "blocksign";
  }
  return "?";
}

std::uint32_t payload_dim(const CompressedPayload& p) {
  if (const auto* d = std::get_if<DensePayload>(&p)) {
    return static_cast<std::uint32_t>(d->values.size());
  }
  if (const auto* s = std::get_if<SparsePayload>(&p)) {
    return s->dim;
  }
  const auto& ss = std::get<SignScalePayload>(p);
  return ss.block_ends.empty() ? 0 : ss.block_ends.back();
}

CompressedPayload compress_topk(const ModelVector& x, std::uint32_t k) {
  const auto d = static_cast<std::uint32_t>(x.size());
  if (k == 0 || k > d) {
    throw std::invalid_argument("compress_topk: need 1 <= k <= dim");
  }
  std::vector<std::uint32_t> order(d);
  std::iota(order.begin(), order.end(), 0u);
  // Strict total order (magnitude desc, index asc) makes the kept set unique,
  // so nth_element yields the same selection on every platform.
  const auto before = [&x](std::uint32_t a, std::uint32_t b) {
    const double ma = std::abs(x[a]);
    const double mb = std::abs(x[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  };
  if (k < d) {
    std::nth_element(order.begin(), order.begin() + k, order.end(), before);
  }
  order.resize(k);
  std::sort(order.begin(), order.end());
  SparsePayload out;
  out.dim = d;
  out.indices = std::move(order);
  out.values.resize(k);
  for (std::uint32_t i = 0; i < k; ++i) out.values[i] = x[out.indices[i]];
  return out;
}

CompressedPayload compress_randk(const ModelVector& x, std::uint32_t k,
                                 std::mt19937_64& eng) {
  const auto d = static_cast<std::uint32_t>(x.size());
  if (k == 0 || k > d) {
    throw std::invalid_argument("compress_randk: need 1 <= k <= dim");
  }
  SparsePayload out;
  out.dim = d;
  out.indices = sample_indices(eng, d, k);
  out.values.resize(k);
  for (std::uint32_t i = 0; i < k; ++i) out.values[i] = x[out.indices[i]];
  return out;
}

namespace {

std::vector<std::uint32_t> block_ends_for(std::uint32_t d, std::uint32_t blocks) {
  // Contiguous blocks of size floor(d/B) or ceil(d/B); the larger ones first.
  std::vector<std::uint32_t> ends(blocks);
  const std::uint32_t base = d / blocks;
  const std::uint32_t extra = d % blocks;
  std::uint32_t at = 0;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    at += base + (b < extra ? 1u : 0u);
    ends[b] = at;
  }
  return ends;
}

void pack_signs(const ModelVector& x, std::vector<std::uint8_t>& bits) {
  bits.assign((x.size() + 7) / 8, 0u);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (std::signbit(x[j]) && x[j] != 0.0) {  // sign(0) = +1, including -0.0
      bits[j >> 3] |= static_cast<std::uint8_t>(0x80u >> (j & 7));
    }
  }
}

}  // namespace

CompressedPayload compress_blockwise_sign(const ModelVector& x,
                                          std::uint32_t num_blocks) {
  const auto d = static_cast<std::uint32_t>(x.size());
  if (num_blocks == 0 || num_blocks > d) {
    throw std::invalid_argument("compress_blockwise_sign: need 1 <= blocks <= dim");
  }
  SignScalePayload out;
  out.block_ends = block_ends_for(d, num_blocks);
  out.scales.resize(num_blocks);
  std::uint32_t begin = 0;
  for (std::uint32_t b = 0; b < num_blocks; ++b) {
    const std::uint32_t end = out.block_ends[b];
    double l1 = 0.0;
    for (std::uint32_t j = begin; j < end; ++j) l1 += std::abs(x[j]);
    out.scales[b] = static_cast<float>(l1 / static_cast<double>(end - begin));
    begin = end;
  }
  pack_signs(x, out.sign_bits);
  return out;
}

CompressedPayload compress_sign(const ModelVector& x) {
  return compress_blockwise_sign(x, 1);
}

CompressedPayload compress_identity(const ModelVector& x) {
  return DensePayload{x};
}

CompressedPayload compress(const CompressorSpec& spec, const ModelVector& x,
                           std::mt19937_64* eng) {
  spec.validate(static_cast<std::uint32_t>(x.size()));
  switch (spec.kind) {
    case CompressorKind::identity:
      return compress_identity(x);
    case CompressorKind::top_k:
      return compress_topk(x, spec.k);
    case CompressorKind::random_k:
      if (eng == nullptr) {
        throw std::invalid_argument("compress: random_k needs an engine");
      }
      return compress_randk(x, spec.k, *eng);
    case CompressorKind::sign:
      return compress_sign(x);
    case CompressorKind::blockwise_sign:
      return compress_blockwise_sign(x, spec.num_blocks);
  }
  throw std::invalid_argument("compress: unknown kind");
}

ModelVector decompress(const CompressedPayload& p, std::uint32_t dim) {
  if (payload_dim(p) != dim) {
    throw std::invalid_argument("decompress: dimension mismatch");
  }
  if (const auto* dp = std::get_if<DensePayload>(&p)) {
    return dp->values;
  }
  if (const auto* sp = std::get_if<SparsePayload>(&p)) {
    if (sp->indices.size() != sp->values.size()) {
      throw std::invalid_argument("decompress: sparse index/value mismatch");
    }
    ModelVector out(dim, 0.0);
    std::uint32_t prev = 0;
    bool first = true;
    for (std::size_t i = 0; i < sp->indices.size(); ++i) {
      const std::uint32_t idx = sp->indices[i];
      if (idx >= dim || (!first && idx <= prev)) {
        throw std::invalid_argument("decompress: sparse indices not ascending");
      }
      out[idx] = sp->values[i];
      prev = idx;
      first = false;
    }
    return out;
  }
  const auto& ss = std::get<SignScalePayload>(p);
  if (ss.scales.size() != ss.block_ends.size() || ss.block_ends.empty()) {
    throw std::invalid_argument("decompress: malformed sign-scale payload");
  }
  if (ss.sign_bits.size() != (static_cast<std::size_t>(dim) + 7) / 8) {
    throw std::invalid_argument("decompress: sign bit count mismatch");
  }
  ModelVector out(dim);
  std::uint32_t begin = 0;
  for (std::size_t b = 0; b < ss.block_ends.size(); ++b) {
    const std::uint32_t end = ss.block_ends[b];
    if (end <= begin || end > dim) {
      throw std::invalid_argument("decompress: block ends not increasing");
    }
    const double scale = static_cast<double>(ss.scales[b]);
    for (std::uint32_t j = begin; j < end; ++j) {
      const bool neg = (ss.sign_bits[j >> 3] >> (7 - (j & 7))) & 1u;
      out[j] = neg ? -scale : scale;
    }
    begin = end;
  }
  return out;
}

double measure_delta(const CompressorSpec& spec, std::uint32_t dim,
                     std::uint32_t samples, const RngStream& stream) {
  spec.validate(dim);
  if (samples == 0) {
    throw std::invalid_argument("measure_delta: zero samples");
  }
  auto eng = stream.engine();
  ModelVector x(dim);
  double acc = 0.0;
  std::uint32_t used = 0;
  while (used < samples) {
    gaussian_fill(eng, x);
    const double xn = sq_norm(x);
    if (xn == 0.0) continue;  // degenerate draw carries no information
    const CompressedPayload p = compress(spec, x, &eng);
    const ModelVector back = decompress(p, dim);
    double res = 0.0;
    for (std::uint32_t j = 0; j < dim; ++j) {
      const double r = x[j] - back[j];
      res += r * r;
    }
    acc += res / xn;
    ++used;
  }
  return 1.0 - acc / static_cast<double>(samples);
}

}  // namespace gradsim
