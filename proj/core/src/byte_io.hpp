// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

// Little-endian encoding helpers shared by the feature and model formats.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "fusionforge/error.hpp"

namespace fusionforge::detail {

template <typename T>
T to_little_endian(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    value = to_little_endian(value);
    const auto* p = reinterpret_cast<const std::byte*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) {
    const auto* p = reinterpret_cast<const std::byte*>(s.data());
    bytes_.insert(bytes_.end(), p, p + s.size());
  }
  /// u16 length prefix followed by the raw bytes.
  void put_short_string(std::string_view s, std::string_view what) {
    if (s.size() > 0xFFFF) {
      throw ValidationError(std::string(what) + " longer than 65535 bytes");
    }
    put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    put_bytes(s);
  }
  void put_floats(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const std::byte*>(values.data());
      bytes_.insert(bytes_.end(), p, p + values.size_bytes());
    } else {
      for (float v : values) put(v);
    }
  }

  std::vector<std::byte> take() && { return std::move(bytes_); }

 private:
  std::vector<std::byte> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> bytes, std::string_view context)
      : bytes_(bytes), context_(context) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void require(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      throw FormatError(FormatErrorCode::kTruncated,
                        std::string(context_) + ": truncated at byte offset " +
                            std::to_string(pos_) + " while reading " + std::string(what) +
                            " (need " + std::to_string(n) + " bytes, have " +
                            std::to_string(remaining()) + ")",
                        pos_);
    }
  }

  template <typename T>
  T get(std::string_view what) {
    require(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little_endian(value);
  }

  std::string get_bytes(std::size_t n, std::string_view what) {
    require(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::string get_short_string(std::string_view what) {
    const auto len = get<std::uint16_t>(what);
    return get_bytes(len, what);
  }

  void get_floats(std::span<float> out, std::string_view what) {
    require(out.size_bytes(), what);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
    if constexpr (std::endian::native != std::endian::little) {
      for (float& v : out) v = to_little_endian(v);
    }
  }

 private:
  std::span<const std::byte> bytes_;
  std::string_view context_;
  std::size_t pos_ = 0;
};

std::vector<std::byte> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, std::span<const std::byte> bytes);

}  // namespace fusionforge::detail
