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
#ifndef MCM_ERROR_HPP_
#define MCM_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcm {

enum class ErrorKind {
  kDimension,
  kContract,
  kState,
  kNumeric,
  kParse,
  kData,
  kIo,
  kFormat,
  kConfig,
};

const char* ErrorKindName(ErrorKind kind);

// All library failures are reported through this single exception type; the
// kind decides how the C API and the CLI classify it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(ErrorKind::kParse,
              message + " (at byte offset " + std::to_string(offset) + ")"),
        detail_(message),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }
  // Message without the offset suffix.
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void Require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace mcm

#endif  // MCM_ERROR_HPP_
