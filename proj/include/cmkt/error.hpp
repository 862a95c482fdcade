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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmkt {

/// Failure categories raised across the library. Every throw site uses one
/// of these so callers (and the CLI) can branch on the kind, not the text.
enum class ErrorKind {
  kInputTooShort,
  kShape,
  kMaskRange,
  kDegenerateSignal,
  kVocab,
  kInput,
  kEmptyText,
  kDegenerateEmbedding,
  kNumerics,
  kCheckpoint,
  kIngest,
  kConfig,
  kIo,
  kFormat,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string &what) {
  throw Error(kind, what);
}

}  // namespace cmkt
