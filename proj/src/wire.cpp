#include "tfln/wire.hpp"

#include "tfln/binary_io.hpp"
#include "tfln/error.hpp"

namespace tfln {

namespace {

constexpr char kMagic[4] = {'T', 'F', 'L', 'W'};
constexpr std::uint8_t kTypeGradient = 1;
constexpr std::uint8_t kTypeParamBroadcast = 2;
constexpr std::uint8_t kTypeControl = 3;

std::uint8_t type_of(const WireMessage& msg) {
  if (std::holds_alternative<GradientMessage>(msg)) return kTypeGradient;
  if (std::holds_alternative<ParamBroadcast>(msg)) return kTypeParamBroadcast;
  return kTypeControl;
}

std::vector<std::uint8_t> encode_payload(const WireMessage& msg) {
  ByteWriter w;
  if (const auto* grad = std::get_if<GradientMessage>(&msg)) {
    w.u32(grad->worker_id);
    w.u64(grad->basis_step);
    w.named_tensor_map(grad->gradients);
  } else if (const auto* bcast = std::get_if<ParamBroadcast>(&msg)) {
    w.u64(bcast->global_step);
    w.named_tensor_map(bcast->parameters);
  } else {
    const auto& ctrl = std::get<ControlMessage>(msg);
    w.u8(static_cast<std::uint8_t>(ctrl.kind));
    if (ctrl.detail.size() > 0xFFFF) {
      throw ValidationError("control detail longer than 65535 bytes");
    }
    w.u16(static_cast<std::uint16_t>(ctrl.detail.size()));
    w.raw(ctrl.detail.data(), ctrl.detail.size());
  }
  return w.take();
}

}  // namespace

std::vector<std::uint8_t> encode_message(const WireMessage& msg) {
  const std::vector<std::uint8_t> payload = encode_payload(msg);
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kWireVersion);
  w.u8(type_of(msg));
  w.u64(payload.size());
  w.raw(payload.data(), payload.size());
  const std::uint32_t crc = crc32(w.bytes());
  w.u32(crc);
  return w.take();
}

WireMessage decode_message(const std::vector<std::uint8_t>& frame) {
  ByteReader r(frame, "frame");
  if (r.string(4) != std::string(kMagic, 4)) {
    throw FormatError("frame: bad magic at offset 0");
  }
  const std::uint32_t version = r.u32();
  if (version != kWireVersion) {
    throw FormatError("frame: unsupported version " + std::to_string(version) +
                      " at offset 4");
  }
  const std::uint8_t type = r.u8();
  const std::uint64_t payload_len = r.u64();
  if (payload_len != frame.size() - kFrameHeaderSize - 4) {
    throw FormatError("frame: payload length " + std::to_string(payload_len) +
                      " disagrees with frame size " + std::to_string(frame.size()));
  }
  const std::size_t crc_offset = kFrameHeaderSize + payload_len;
  const std::uint32_t stored = crc32(frame.data(), crc_offset);
  ByteReader crc_reader(frame.data() + crc_offset, 4, "frame");
  const std::uint32_t declared = crc_reader.u32();
  if (stored != declared) {
    throw FormatError("frame: CRC mismatch at offset " + std::to_string(crc_offset) +
                      " (stored " + std::to_string(declared) + ", computed " +
                      std::to_string(stored) + ")");
  }

  switch (type) {
    case kTypeGradient: {
      GradientMessage msg;
      msg.worker_id = r.u32();
      msg.basis_step = r.u64();
      msg.gradients = r.named_tensor_map();
      return msg;
    }
    case kTypeParamBroadcast: {
      ParamBroadcast msg;
      msg.global_step = r.u64();
      msg.parameters = r.named_tensor_map();
      return msg;
    }
    case kTypeControl: {
      ControlMessage msg;
      const std::uint8_t kind = r.u8();
      if (kind < 1 || kind > 4) {
        r.fail("unknown control kind " + std::to_string(kind));
      }
      msg.kind = static_cast<ControlKind>(kind);
      msg.detail = r.string(r.u16());
      return msg;
    }
    default:
      throw FormatError("frame: unknown message type " + std::to_string(type) +
                        " at offset 8");
  }
}

}  // namespace tfln
