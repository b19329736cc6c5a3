#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ltsar/error.hpp"

namespace ltsar::detail {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swapping");

/// Append-only little-endian byte buffer.
class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void f32s(std::span<const float> v) { raw(v.data(), v.size_bytes()); }

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  std::vector<char> bytes_;
};

/// Bounds-checked cursor over an in-memory file. Every short read is a FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const char> data) : data_(data) {}

  void expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0) {
      throw FormatError("bad magic, expected \"" + std::string(m) + "\"");
    }
    pos_ += m.size();
  }
  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, sizeof v, "u32");
    return v;
  }
  float f32() {
    float v;
    read(&v, sizeof v, "f32");
    return v;
  }
  void f32s(std::span<float> out) { read(out.data(), out.size_bytes(), "f32 block"); }

  std::size_t remaining() const { return data_.size() - pos_; }

  /// Sign of remaining() - count * record_bytes, computed without overflow.
  int compare_payload(std::uint64_t count, std::uint64_t record_bytes) const {
    const std::uint64_t rem = remaining();
    if (record_bytes == 0) return rem == 0 ? 0 : 1;
    if (count > rem / record_bytes) return -1;
    return count * record_bytes == rem ? 0 : 1;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated file while reading ") + what);
    }
  }
  void read(void* p, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::span<const char> data_;
  std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  return bytes;
}

inline void write_file(const std::string& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_text_file(const std::string& path, std::string_view text) {
  write_file(path, std::span<const char>(text.data(), text.size()));
}

}  // namespace ltsar::detail
