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

#include <cstdint>
#include <string>

#include "cmkt/model/config.hpp"

namespace cmkt::train {

enum class LossSelector { kSeOnly, kCmaOnly, kCombined };

std::string LossSelectorName(LossSelector s);
LossSelector ParseLossSelector(const std::string &name);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t checked = 0;  // scalars compared
};

/// Reverse-mode vs five-point central differences (h = 1e-4) in double
/// precision for every scalar parameter of a tiny instance: SE network,
/// cross-modality transformer and a trainable token table. Relative error is
/// |a - n| / max(|a|, |n|, floor).
GradCheckReport GradCheck(model::BlockKind kind, LossSelector selector, std::uint64_t seed,
                          double alpha = 0.7, double floor = 1e-6);

}  // namespace cmkt::train
