/* Copyright 2026 The MCM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef MCM_BINIO_HPP_
#define MCM_BINIO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcm/error.hpp"

namespace mcm {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with native little-endian stores");

class ByteWriter {
 public:
  void U8(std::uint8_t v) { bytes_.push_back(v); }
  void U32(std::uint32_t v) { Raw(&v, sizeof v); }
  void U64(std::uint64_t v) { Raw(&v, sizeof v); }
  void F32(float v) { Raw(&v, sizeof v); }
  void F64(double v) { Raw(&v, sizeof v); }
  void Bytes(std::string_view s) { Raw(s.data(), s.size()); }
  // u32 length followed by the bytes.
  void String(std::string_view s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Bytes(s);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> Take() { return std::move(bytes_); }

 private:
  void Raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked reader; running past the end raises a format error naming
// the field being read.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t U8(const char* what) { return Pod<std::uint8_t>(what); }
  std::uint32_t U32(const char* what) { return Pod<std::uint32_t>(what); }
  std::uint64_t U64(const char* what) { return Pod<std::uint64_t>(what); }
  float F32(const char* what) { return Pod<float>(what); }
  double F64(const char* what) { return Pod<double>(what); }
  std::string Bytes(std::size_t n, const char* what) {
    Need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string String(const char* what) { return Bytes(U32(what), what); }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(std::size_t n, const char* what) {
    if (remaining() < n) {
      Fail(ErrorKind::kFormat, std::string("truncated data while reading ") + what +
                                   " at byte offset " + std::to_string(pos_));
    }
  }
  template <typename T>
  T Pod(const char* what) {
    Need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace mcm

#endif  // MCM_BINIO_HPP_
