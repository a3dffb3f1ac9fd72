#pragma once

// Little-endian byte buffers shared by the dataset and checkpoint formats.

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmri/errors.hpp"

namespace pmri::io {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void text(std::string_view s) { bytes(s.data(), s.size()); }
  void floats(std::span<const float> v) { bytes(v.data(), v.size_bytes()); }
  void complex_floats(std::span<const std::complex<float>> v) { bytes(v.data(), v.size_bytes()); }
  void u8s(std::span<const std::uint8_t> v) { bytes(v.data(), v.size()); }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string context) : data_(data), context_(std::move(context)) {}

  void need(std::size_t n) const {
    if (n > data_.size() - pos_) {
      throw TruncationError(context_ + ": unexpected end of file at byte " + std::to_string(pos_) + " (need " +
                            std::to_string(n) + " more bytes)");
    }
  }
  void read(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read(&v, sizeof v);
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  template <typename T>
  std::vector<T> array(std::size_t count) {
    if (count > (data_.size() - pos_) / sizeof(T)) need(count * sizeof(T) + 1);
    std::vector<T> v(count);
    read(v.data(), count * sizeof(T));
    return v;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void seek(std::size_t pos) {
    if (pos > data_.size()) throw TruncationError(context_ + ": offset beyond end of file");
    pos_ = pos;
  }
  const std::string& context() const { return context_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

}  // namespace pmri::io
