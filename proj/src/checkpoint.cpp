#include "tfln/checkpoint.hpp"

#include <charconv>
#include <fstream>

#include "tfln/binary_io.hpp"
#include "tfln/error.hpp"

namespace tfln {

namespace {
constexpr char kMagic[4] = {'T', 'F', 'L', 'N'};
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(static_cast<std::uint64_t>(ckpt.global_step));
  w.named_tensor_map(ckpt.tensors);
  const std::uint32_t crc = crc32(w.bytes());
  w.u32(crc);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "checkpoint");
  const std::string magic = r.string(4);
  if (magic != std::string(kMagic, 4)) {
    throw FormatError("checkpoint: bad magic at offset 0");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                      " at offset 4");
  }
  Checkpoint ckpt;
  ckpt.global_step = static_cast<std::int64_t>(r.u64());
  ckpt.tensors = r.named_tensor_map();
  const std::size_t crc_offset = r.offset();
  const std::uint32_t stored = r.u32();
  if (r.remaining() != 0) {
    r.fail("trailing bytes after CRC");
  }
  const std::uint32_t computed = crc32(bytes.data(), crc_offset);
  if (stored != computed) {
    throw FormatError("checkpoint: CRC mismatch at offset " +
                      std::to_string(crc_offset) + " (stored " + std::to_string(stored) +
                      ", computed " + std::to_string(computed) + ")");
  }
  return ckpt;
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open checkpoint for writing: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("failed writing checkpoint: " + path.string());
  }
}

Checkpoint checkpoint_restore(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::string checkpoint_file_name(std::int64_t global_step) {
  return "ckpt-" + std::to_string(global_step);
}

std::optional<std::filesystem::path> find_latest_checkpoint(
    const std::filesystem::path& dir) {
  std::optional<std::filesystem::path> best;
  std::int64_t best_step = -1;
  if (!std::filesystem::is_directory(dir)) return std::nullopt;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("ckpt-", 0) != 0) continue;
    std::int64_t step = 0;
    const char* begin = name.data() + 5;
    const char* end = name.data() + name.size();
    auto [ptr, ec] = std::from_chars(begin, end, step);
    if (ec != std::errc() || ptr != end) continue;
    if (step > best_step) {
      best_step = step;
      best = entry.path();
    }
  }
  return best;
}

}  // namespace tfln
