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

// Synthetic corpus for end-to-end runs without external data. Each clean
// utterance is a sequence of token segments; every token has its own pitch
// and spectral peak, so the audio carries the token sequence.

#pragma once

#include <cstdint>
#include <filesystem>

namespace cmkt {

struct SynthConfig {
  int n_utts = 50;
  /// Includes bos (0) and eos (1); real tokens are 2..vocab-1.
  int vocab = 24;
  int d_t = 64;
  int min_tokens = 3;
  int max_tokens = 10;
  double min_seconds = 1.0;
  double max_seconds = 2.0;
  /// Standard deviation of the per-dimension noise added to table rows to
  /// form the targets.
  double target_noise = 0.05;
  /// Share of utterances written without targets.
  double text_free_fraction = 0.0;
  int sample_rate = 16000;

  void Validate() const;
};

struct SynthOutput {
  std::filesystem::path manifest;
  std::filesystem::path archive;
};

/// Writes clean/, noise/, manifest.jsonl and embeddings.cmke under out_dir.
/// Fully determined by the config and seed.
SynthOutput GenerateSynth(const std::filesystem::path &out_dir, const SynthConfig &cfg, std::uint64_t seed);

}  // namespace cmkt
