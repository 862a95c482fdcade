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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmkt/model/param_store.hpp"
#include "cmkt/signal/stft.hpp"
#include "cmkt/train/data.hpp"
#include "cmkt/train/trainer.hpp"
#include "cmkt/transfer/cmt.hpp"

namespace cmkt::eval {

/// Mixing-SNR partitions: high [5, 15], medium [-5, 5), low [-15, -5).
enum class Bucket { kHigh, kMedium, kLow };

Bucket BucketFor(double snr_db);
std::string BucketName(Bucket b);

/// Metrics computed here. "pesq" and "vqscore" are accepted and reported as
/// NA so externally computed values can be merged into the same schema.
const std::vector<std::string> &KnownMetrics();
const std::vector<std::string> &DefaultMetrics();

struct MetricRow {
  std::string utt_id;
  double snr_db = 0.0;
  Bucket bucket = Bucket::kHigh;
  std::string metric;
  std::optional<double> value;  // nullopt is written as NA
};

struct MetricReport {
  std::vector<MetricRow> rows;

  /// Mean over utterances for one metric, optionally restricted to a bucket.
  /// nullopt when no rows have a value.
  std::optional<double> Mean(const std::string &metric, std::optional<Bucket> bucket = std::nullopt) const;
  std::vector<std::string> Metrics() const;

  /// Per-utterance rows, then one "mean" row per (metric, bucket) and per
  /// metric over all buckets. Columns: utt_id,snr_db,bucket,metric,value.
  void WriteCsv(const std::filesystem::path &path) const;
};

/// Maps a noisy spectrogram to an enhanced one.
using Enhancer = std::function<signal::Spectrogram(const signal::Spectrogram &)>;

Enhancer ModelEnhancer(const model::ParamStore<float> &params, const model::ModelConfig &cfg);
Enhancer IdentityEnhancer();

/// Enhances every utterance and scores it against the clean signal. The
/// noisy baseline ("noisy_stoi", "noisy_si_sdr") is scored on the
/// resynthesized noisy spectrogram, so both sides pass the same STFT round
/// trip and share a length. Unknown metric names raise ConfigError.
MetricReport Evaluate(const std::vector<train::Utterance> &corpus, const Enhancer &enhancer,
                      const std::vector<std::string> &metrics);

enum class HeadReduce { kMeanHeads, kPerHead };

/// Runs the text branch in eval mode on one utterance and returns its
/// cross-attention maps. Requires a record with tokens.
transfer::CmtAttention CaptureCmtAttention(const model::ParamStore<float> &params,
                                           const train::ModelBundle &bundle,
                                           const transfer::EmbeddingArchive &archive,
                                           const signal::Spectrogram &noisy,
                                           const transfer::UtteranceRecord &record);

/// Writes the [(N+2) x frames] map of `layer` (negative counts from the end)
/// as CSV plus PGM. Rows are text positions (y axis), columns speech frames
/// (x axis). Returns the written paths.
std::vector<std::filesystem::path> ExportAttention(const transfer::CmtAttention &attention, int layer,
                                                   HeadReduce reduce, const std::filesystem::path &prefix);

}  // namespace cmkt::eval
