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

#include <vector>

namespace cmkt::eval {

inline constexpr double kSiSdrCapDb = 80.0;

/// Scale-invariant SDR in dB: the estimate is projected onto the reference
/// and the projection is compared with the remainder. Clamped to +-80 dB.
double SiSdr(const std::vector<double> &reference, const std::vector<double> &estimate);

}  // namespace cmkt::eval
