#include "tfln/binary_io.hpp"

#include <array>
#include <bit>

#include "tfln/error.hpp"

namespace tfln {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) {
      c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    }
    table[i] = c;
  }
  return table;
}

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed) {
  static const std::array<std::uint32_t, 256> table = make_crc_table();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) {
    c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

std::uint32_t crc32(const std::vector<std::uint8_t>& data) {
  return crc32(data.data(), data.size());
}

void ByteWriter::u16(std::uint16_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v));
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    buf_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void ByteWriter::u64(std::uint64_t v) {
  for (int shift = 0; shift < 64; shift += 8) {
    buf_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(const void* data, std::size_t len) {
  const auto* bytes = static_cast<const std::uint8_t*>(data);
  buf_.insert(buf_.end(), bytes, bytes + len);
}

void ByteWriter::named_tensor(const std::string& name, const Tensor& tensor) {
  if (name.size() > 0xFFFF) {
    throw ValidationError("tensor name longer than 65535 bytes: " + name);
  }
  u16(static_cast<std::uint16_t>(name.size()));
  raw(name.data(), name.size());
  u32(static_cast<std::uint32_t>(tensor.rows()));
  u32(static_cast<std::uint32_t>(tensor.cols()));
  for (double v : tensor.data()) f64(v);
}

void ByteWriter::named_tensor_map(const std::map<std::string, Tensor>& tensors) {
  u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) named_tensor(name, tensor);
}

void ByteReader::need(std::size_t n) const {
  if (pos_ + n > len_) {
    throw FormatError(context_ + ": truncated at offset " + std::to_string(pos_) +
                      " (need " + std::to_string(n) + " bytes, have " +
                      std::to_string(len_ - pos_) + ")");
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  std::uint16_t v = static_cast<std::uint16_t>(data_[pos_]) |
                    static_cast<std::uint16_t>(data_[pos_ + 1]) << 8;
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::string(std::size_t len) {
  need(len);
  std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
  pos_ += len;
  return s;
}

Tensor ByteReader::named_tensor(std::string& name_out) {
  const std::uint16_t name_len = u16();
  name_out = string(name_len);
  const std::uint32_t rows = u32();
  const std::uint32_t cols = u32();
  if (rows == 0 || cols == 0) {
    fail("tensor '" + name_out + "' has zero dimension " + std::to_string(rows) + "x" +
         std::to_string(cols));
  }
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  // Bound the element count by the bytes actually present, so corrupt
  // dimension fields fail here instead of provoking a giant allocation.
  if (count > remaining() / 8) {
    fail("tensor '" + name_out + "' claims " + std::to_string(count) +
         " values but only " + std::to_string(remaining()) + " bytes remain");
  }
  std::vector<double> values;
  values.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    values.push_back(f64());
  }
  return Tensor(rows, cols, std::move(values));
}

std::map<std::string, Tensor> ByteReader::named_tensor_map() {
  const std::uint32_t count = u32();
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name;
    Tensor tensor = named_tensor(name);
    if (!tensors.emplace(name, std::move(tensor)).second) {
      fail("duplicate tensor name '" + name + "'");
    }
  }
  return tensors;
}

void ByteReader::fail(const std::string& what) const {
  throw FormatError(context_ + ": " + what + " at offset " + std::to_string(pos_));
}

}  // namespace tfln
