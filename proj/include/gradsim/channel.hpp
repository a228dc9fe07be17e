#pragma once

#include <cstdint>

#include "gradsim/compressor.hpp"

namespace gradsim {

// wire:     every delivery really encodes and decodes a frame, so values
//           reach the peer rounded through 32-bit floats.
// lossless: values pass through untouched (for exact-algebra checks).
// Byte accounting is identical in both modes.
enum class Fidelity { lossless, wire };

enum class Direction { uplink, downlink };

const char* fidelity_name(Fidelity f);

// In-process delivery fabric with per-direction byte meters. Model transfers
// ride a separate meter (model_bytes) so gradient traffic stays comparable
// between algorithms with and without model averaging.
class Channel {
 public:
  explicit Channel(Fidelity fidelity) : fidelity_(fidelity) {}

  // Deliver one frame. The returned payload is what the receiver sees; the
  // sender must use it for its own error bookkeeping so both sides stay
  // consistent with what was actually transmitted.
  CompressedPayload send(Direction dir, const CompressedPayload& p) {
    return deliver(dir, p, 1, false);
  }
  // Same frame to each of n receivers: accounted n times, delivered once.
  CompressedPayload broadcast(Direction dir, const CompressedPayload& p,
                              std::uint32_t receivers) {
    return deliver(dir, p, receivers, false);
  }
  CompressedPayload send_model(Direction dir, const CompressedPayload& p) {
    return deliver(dir, p, 1, true);
  }
  CompressedPayload broadcast_model(Direction dir, const CompressedPayload& p,
                                    std::uint32_t receivers) {
    return deliver(dir, p, receivers, true);
  }

  void begin_round() {
    round_uplink_ = round_downlink_ = round_model_ = 0;
  }
  std::uint64_t round_uplink() const { return round_uplink_; }
  std::uint64_t round_downlink() const { return round_downlink_; }
  std::uint64_t round_model_bytes() const { return round_model_; }
  std::uint64_t total_uplink() const { return total_uplink_; }
  std::uint64_t total_downlink() const { return total_downlink_; }
  std::uint64_t total_model_bytes() const { return total_model_; }
  Fidelity fidelity() const { return fidelity_; }

 private:
  CompressedPayload deliver(Direction dir, const CompressedPayload& p,
                            std::uint32_t copies, bool model);

  Fidelity fidelity_;
  std::uint64_t round_uplink_ = 0, round_downlink_ = 0, round_model_ = 0;
  std::uint64_t total_uplink_ = 0, total_downlink_ = 0, total_model_ = 0;
};

}  // namespace gradsim
