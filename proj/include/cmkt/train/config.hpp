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

#include <nlohmann/json.hpp>

#include <cstdint>

#include "cmkt/transfer/cmt.hpp"

namespace cmkt::train {

struct TrainConfig {
  double alpha = 0.7;
  double lr_peak = 1e-3;
  std::int64_t warmup_steps = 20000;
  int epochs = 130;
  int avg_last_k = 10;
  transfer::AlignMode align_mode = transfer::AlignMode::kAligned;
  int batch_size = 8;
  std::uint64_t seed = 0;
  double grad_clip = 5.0;
  /// 0 means "run all epochs".
  std::int64_t max_steps = 0;
  /// When false the text branch is skipped entirely (SE-only baseline).
  bool cmkt_enabled = true;
  /// Text-free utterances contribute alpha * MAE (true) or plain MAE (false).
  bool scale_text_free = true;
  /// Keep every epoch checkpoint instead of only the last avg_last_k.
  bool keep_all_checkpoints = false;

  void Validate() const;
};

void to_json(nlohmann::json &j, const TrainConfig &cfg);
void from_json(const nlohmann::json &j, TrainConfig &cfg);

}  // namespace cmkt::train
