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
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "cmkt/model/config.hpp"
#include "cmkt/model/param_store.hpp"
#include "cmkt/signal/stft.hpp"
#include "cmkt/train/config.hpp"
#include "cmkt/train/data.hpp"
#include "cmkt/transfer/archive.hpp"
#include "cmkt/transfer/cmt.hpp"

namespace cmkt::train {

/// Everything needed to rebuild the network around a checkpoint.
struct ModelBundle {
  model::ModelConfig model;
  transfer::CmtConfig cmt;
  signal::StftConfig stft;
};

void to_json(nlohmann::json &j, const ModelBundle &b);
void from_json(const nlohmann::json &j, ModelBundle &b);
void WriteModelBundle(const std::filesystem::path &path, const ModelBundle &b);
ModelBundle ReadModelBundle(const std::filesystem::path &path);

struct StepLog {
  std::int64_t step = 0;
  double lr = 0.0;
  double l_mae = 0.0;
  std::optional<double> l_cma;  // mean over text-bearing utterances in the batch
  double total = 0.0;
};

struct TrainOptions {
  /// Output directory for metrics.csv, checkpoints/ and averaged.cmkp.
  /// Empty runs fully in memory.
  std::filesystem::path out_dir;
  /// Called after every optimizer step.
  std::function<void(const StepLog &, const model::ParamStore<float> &)> on_step;
};

struct TrainResult {
  std::vector<StepLog> log;
  model::ParamStore<float> params;
  std::vector<std::filesystem::path> checkpoints;  // retained epoch checkpoints
  std::optional<std::filesystem::path> averaged;
};

/// Runs the epoch loop. Utterances without usable archive targets (or every
/// utterance when cmkt is disabled) train on the enhancement loss alone.
TrainResult Train(const std::vector<Utterance> &corpus, const transfer::EmbeddingArchive *archive,
                  const ModelBundle &bundle, const TrainConfig &cfg, const TrainOptions &options = {});

/// Element-wise mean; values are summed in sorted order so the result does
/// not depend on the order of the inputs.
model::ParamStore<float> AverageStores(const std::vector<model::ParamStore<float>> &stores);
model::ParamStore<float> AverageCheckpoints(const std::vector<std::filesystem::path> &paths);

void WriteMetricsHeader(std::ostream &out);
void WriteMetricsRow(std::ostream &out, const StepLog &row);

}  // namespace cmkt::train
