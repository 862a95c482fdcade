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

#include "cmkt/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cmkt/error.hpp"

namespace cmkt::eval {

double SiSdr(const std::vector<double> &reference, const std::vector<double> &estimate) {
  if (reference.size() != estimate.size()) Fail(ErrorKind::kShape, "SI-SDR inputs differ in length");
  double rr = 0.0, re = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    rr += reference[i] * reference[i];
    re += reference[i] * estimate[i];
  }
  if (rr == 0.0) Fail(ErrorKind::kDegenerateSignal, "SI-SDR reference is zero");
  const double scale = re / rr;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = scale * reference[i];
    const double r = estimate[i] - t;
    target += t * t;
    residual += r * r;
  }
  if (target == 0.0) return -kSiSdrCapDb;
  if (residual == 0.0) return kSiSdrCapDb;
  return std::clamp(10.0 * std::log10(target / residual), -kSiSdrCapDb, kSiSdrCapDb);
}

}  // namespace cmkt::eval
