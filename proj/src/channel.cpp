#include "gradsim/channel.hpp"

#include "gradsim/wire.hpp"

namespace gradsim {

const char* fidelity_name(Fidelity f) {
  return f == Fidelity::lossless ? "lossless" : "wire";
}

CompressedPayload Channel::deliver(Direction dir, const CompressedPayload& p,
                                   std::uint32_t copies, bool model) {
  std::uint64_t len;
  CompressedPayload delivered = [&]() -> CompressedPayload {
    if (fidelity_ == Fidelity::wire) {
      const auto bytes = encode_frame(p);
      len = bytes.size();
      return decode_frame(bytes);
    }
    len = frame_length(p);
    return p;
  }();
  const std::uint64_t total = len * copies;
  if (model) {
    round_model_ += total;
    total_model_ += total;
  } else if (dir == Direction::uplink) {
    round_uplink_ += total;
    total_uplink_ += total;
  } else {
    round_downlink_ += total;
    total_downlink_ += total;
  }
  return delivered;
}

}  // namespace gradsim
