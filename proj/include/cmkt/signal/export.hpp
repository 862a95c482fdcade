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

#include <filesystem>

#include "cmkt/signal/stft.hpp"

namespace cmkt::signal {

/// One CSV row per matrix row, "." decimal separator, LF line endings.
void WriteMatrixCsv(const std::filesystem::path &path, const RealMatrix &m);

/// Binary 8-bit PGM (P5), min-max normalized to 0..255. A constant matrix
/// maps to mid-gray (128). Image row i is matrix row i.
void WritePgm(const std::filesystem::path &path, const RealMatrix &m);

/// Spectrogram figure: frequency on the vertical axis (low at the bottom),
/// frames left to right.
void WriteSpectrogramPgm(const std::filesystem::path &path,
                         const Spectrogram &spec);

}  // namespace cmkt::signal
