#include <doctest.h>

#include "tfln/error.hpp"
#include "tfln/rng.hpp"
#include "tfln/wire.hpp"
#include "testutil.hpp"

using namespace tfln;

namespace {

GradientMessage sample_gradient() {
  RngState rng(12);
  GradientMessage msg;
  msg.worker_id = 3;
  msg.basis_step = 77;
  msg.gradients.emplace("linear/weights", testutil::random_tensor(4, 2, rng));
  msg.gradients.emplace("linear/bias", testutil::random_tensor(1, 2, rng));
  return msg;
}

}  // namespace

TEST_CASE("gradient messages round-trip losslessly") {
  const GradientMessage msg = sample_gradient();
  const WireMessage decoded = decode_message(encode_message(msg));
  CHECK(std::get<GradientMessage>(decoded) == msg);
}

TEST_CASE("an empty gradient map is a valid minimal frame") {
  GradientMessage msg;
  msg.worker_id = 0;
  msg.basis_step = 0;
  const WireMessage decoded = decode_message(encode_message(msg));
  CHECK(std::get<GradientMessage>(decoded) == msg);
}

TEST_CASE("param broadcasts and control messages round-trip") {
  RngState rng(13);
  ParamBroadcast bcast;
  bcast.global_step = 12;
  bcast.parameters.emplace("w", testutil::random_tensor(2, 2, rng));
  CHECK(std::get<ParamBroadcast>(decode_message(encode_message(bcast))) == bcast);

  const ControlMessage ctrl{ControlKind::kStaleGradient, "server is at step 9"};
  CHECK(std::get<ControlMessage>(decode_message(encode_message(ctrl))) == ctrl);
}

TEST_CASE("frames start with the TFLW magic and the type byte") {
  const auto bytes = encode_message(sample_gradient());
  CHECK(bytes[0] == 'T');
  CHECK(bytes[1] == 'F');
  CHECK(bytes[2] == 'L');
  CHECK(bytes[3] == 'W');
  CHECK(bytes[8] == 1);  // gradient
  CHECK(encode_message(ControlMessage{ControlKind::kStop, ""})[8] == 3);
}

TEST_CASE("a flipped payload byte is caught by the CRC") {
  auto bytes = encode_message(sample_gradient());
  bytes[kFrameHeaderSize + 2] ^= 0x40;
  try {
    decode_message(bytes);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("CRC") != std::string::npos);
  }
}

TEST_CASE("unknown message types and truncated frames are rejected") {
  auto bytes = encode_message(sample_gradient());
  bytes[8] = 9;
  CHECK_THROWS_AS(decode_message(bytes), FormatError);

  auto truncated = encode_message(sample_gradient());
  truncated.resize(truncated.size() - 6);
  CHECK_THROWS_AS(decode_message(truncated), FormatError);

  auto bad_magic = encode_message(sample_gradient());
  bad_magic[0] = 'x';
  CHECK_THROWS_AS(decode_message(bad_magic), FormatError);
}

TEST_CASE("encoding is deterministic") {
  CHECK(encode_message(sample_gradient()) == encode_message(sample_gradient()));
}
