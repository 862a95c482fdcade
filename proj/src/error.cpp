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

#include "cmkt/error.hpp"

namespace cmkt {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInputTooShort: return "InputTooShort";
    case ErrorKind::kShape: return "ShapeError";
    case ErrorKind::kMaskRange: return "MaskRangeError";
    case ErrorKind::kDegenerateSignal: return "DegenerateSignal";
    case ErrorKind::kVocab: return "VocabError";
    case ErrorKind::kInput: return "InputError";
    case ErrorKind::kEmptyText: return "EmptyText";
    case ErrorKind::kDegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorKind::kNumerics: return "NumericsError";
    case ErrorKind::kCheckpoint: return "CheckpointError";
    case ErrorKind::kIngest: return "IngestError";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kFormat: return "FormatError";
  }
  return "Error";
}

}  // namespace cmkt
