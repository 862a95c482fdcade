// Copyright 2026 The CMKT-SE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian byte buffers shared by the checkpoint and archive codecs.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "cmkt/error.hpp"

namespace cmkt::io {

class ByteWriter {
 public:
  void Raw(const void *data, std::size_t n) {
    const auto *p = static_cast<const char *>(data);
    buf_.append(p, n);
  }
  template <typename U>
  void Put(U v) {
    static_assert(std::is_arithmetic_v<U>);
    if constexpr (std::endian::native == std::endian::little) {
      Raw(&v, sizeof(U));
    } else {
      unsigned char bytes[sizeof(U)];
      std::memcpy(bytes, &v, sizeof(U));
      for (std::size_t i = sizeof(U); i-- > 0;) buf_.push_back(static_cast<char>(bytes[i]));
    }
  }
  void U32(std::uint32_t v) { Put(v); }
  void I32(std::int32_t v) { Put(v); }
  void U8(std::uint8_t v) { Put(v); }
  void F32(float v) { Put(v); }
  void String(const std::string &s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Raw(s.data(), s.size());
  }
  void F32Array(const float *data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      Raw(data, n * sizeof(float));
    } else {
      for (std::size_t i = 0; i < n; ++i) F32(data[i]);
    }
  }

  const std::string &bytes() const { return buf_; }
  void WriteFile(const std::filesystem::path &path) const;

 private:
  std::string buf_;
};

std::string ReadFileBytes(const std::filesystem::path &path);

class ByteReader {
 public:
  explicit ByteReader(std::string bytes, std::string source)
      : buf_(std::move(bytes)), source_(std::move(source)) {}
  static ByteReader FromFile(const std::filesystem::path &path);

  template <typename U>
  U Get() {
    Need(sizeof(U));
    U v;
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(&v, buf_.data() + pos_, sizeof(U));
    } else {
      unsigned char bytes[sizeof(U)];
      for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = buf_[pos_ + sizeof(U) - 1 - i];
      std::memcpy(&v, bytes, sizeof(U));
    }
    pos_ += sizeof(U);
    return v;
  }
  std::uint32_t U32() { return Get<std::uint32_t>(); }
  std::int32_t I32() { return Get<std::int32_t>(); }
  std::uint8_t U8() { return Get<std::uint8_t>(); }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string out = buf_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::string String() { return Bytes(U32()); }
  void F32Array(float *out, std::size_t n) {
    Need(n * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) out[i] = Get<float>();
  }

  bool AtEnd() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }
  const std::string &source() const { return source_; }

 private:
  void Need(std::size_t n) const {
    if (buf_.size() - pos_ < n) {
      Fail(ErrorKind::kFormat, source_ + ": unexpected end of data");
    }
  }
  std::string buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace cmkt::io
