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
#include <vector>

#include "cmkt/model/param_store.hpp"

namespace cmkt::train {

/// Adam moments, one pair per parameter tensor in store order.
template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<ag::Mat<T>> m;
  std::vector<ag::Mat<T>> v;

  static AdamState ForStore(const model::ParamStore<T> &store);
};

/// Global L2 norm over all parameter gradients (missing gradients count as 0).
template <typename T>
double GlobalGradNorm(const model::ParamStore<T> &store);

/// Clips to `grad_clip` global norm, then applies one bias-corrected Adam
/// update. Non-finite gradients raise NumericsError before anything changes.
/// Returns the pre-clip gradient norm.
template <typename T>
double AdamStep(model::ParamStore<T> &store, AdamState<T> &state, double lr, double grad_clip);

}  // namespace cmkt::train
