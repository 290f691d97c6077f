#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "tfln/tensor.hpp"

namespace tfln {

/// The parameter-server wire unit: gradients a worker computed against the
/// parameter snapshot taken at `basis_step`.
struct GradientMessage {
  std::uint32_t worker_id = 0;
  std::uint64_t basis_step = 0;
  std::map<std::string, Tensor> gradients;

  bool operator==(const GradientMessage&) const = default;
};

/// Fresh parameters pushed from the server to a worker.
struct ParamBroadcast {
  std::uint64_t global_step = 0;
  std::map<std::string, Tensor> parameters;

  bool operator==(const ParamBroadcast&) const = default;
};

enum class ControlKind : std::uint8_t {
  kPullRequest = 1,
  kStop = 2,
  kStaleGradient = 3,
  kError = 4,
};

struct ControlMessage {
  ControlKind kind = ControlKind::kPullRequest;
  std::string detail;

  bool operator==(const ControlMessage&) const = default;
};

using WireMessage = std::variant<GradientMessage, ParamBroadcast, ControlMessage>;

inline constexpr std::uint32_t kWireVersion = 1;

/// Frame layout (all little-endian):
///   magic "TFLW" | version u32 | message type u8
///   (1=gradient, 2=param-broadcast, 3=control) | payload length u64 |
///   payload | CRC32 (u32) of all preceding bytes.
std::vector<std::uint8_t> encode_message(const WireMessage& msg);

/// Decodes one complete frame. CRC mismatch, truncation, bad magic, or an
/// unknown type raise FormatError naming the offset.
WireMessage decode_message(const std::vector<std::uint8_t>& frame);

/// Frame header length up to and including the payload-length field.
inline constexpr std::size_t kFrameHeaderSize = 4 + 4 + 1 + 8;

}  // namespace tfln
