#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tfln/tensor.hpp"

namespace tfln {

/// IEEE CRC-32 (the zlib polynomial) over a byte range.
std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed = 0);
std::uint32_t crc32(const std::vector<std::uint8_t>& data);

/// Appends little-endian primitives to a byte buffer.
class ByteWriter {
 public:
  std::vector<std::uint8_t>& bytes() { return buf_; }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(const void* data, std::size_t len);

  /// name length u16 + name bytes, rows u32, cols u32, then rows*cols f64.
  void named_tensor(const std::string& name, const Tensor& tensor);

  /// count u32, then each entry in map (name-sorted) order.
  void named_tensor_map(const std::map<std::string, Tensor>& tensors);

 private:
  std::vector<std::uint8_t> buf_;
};

/// Reads little-endian primitives from a byte range, tracking the offset so
/// failures can name the exact byte. Throws FormatError on truncation.
class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t len, std::string context)
      : data_(data), len_(len), context_(std::move(context)) {}
  explicit ByteReader(const std::vector<std::uint8_t>& data, std::string context)
      : ByteReader(data.data(), data.size(), std::move(context)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return len_ - pos_; }

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string string(std::size_t len);

  Tensor named_tensor(std::string& name_out);
  std::map<std::string, Tensor> named_tensor_map();

  /// Raises FormatError at the current offset.
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void need(std::size_t n) const;

  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
  std::string context_;
};

}  // namespace tfln
