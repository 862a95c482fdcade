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

// Corpus ingestion. A manifest is JSON lines, one object per utterance:
//   {"id": ..., "clean": path, "noise": path | "noisy": path,
//    "snr_db": number | "random", "transcript": optional string}
// Relative paths resolve against the manifest's directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmkt/signal/audio.hpp"
#include "cmkt/signal/stft.hpp"

namespace cmkt::train {

inline constexpr double kMinRandomSnrDb = -15.0;
inline constexpr double kMaxRandomSnrDb = 15.0;

struct ManifestItem {
  std::string id;
  std::string clean;
  std::string noise;   // mixed on the fly; empty when noisy is given
  std::string noisy;   // premixed; empty when noise is given
  std::optional<double> snr_db;  // nullopt means "random"
  std::optional<std::string> transcript;
};

std::vector<ManifestItem> ReadManifest(const std::filesystem::path &path);
void WriteManifest(const std::filesystem::path &path, const std::vector<ManifestItem> &items);

/// SNR for item number index: the manifest value, or a seeded draw in [-15, 15].
double ResolveSnr(const ManifestItem &item, std::size_t index, std::uint64_t seed);

struct Utterance {
  std::string id;
  double snr_db = 0.0;
  std::optional<std::string> transcript;
  signal::Waveform clean;
  signal::Waveform noisy;
  signal::Spectrogram clean_spec;
  signal::Spectrogram noisy_spec;
};

/// Loads and mixes every item. Missing or unreadable audio raises
/// IngestError naming the utterance id.
std::vector<Utterance> LoadCorpus(const std::filesystem::path &manifest, const signal::StftConfig &stft,
                                  std::uint64_t seed);

/// Mixes every noise-based item once, writes clean/ and noisy/ WAVs under
/// out_dir and a manifest of premixed items with concrete SNRs. A pair whose
/// peak would clip is scaled down by one shared gain. Returns that manifest.
std::vector<ManifestItem> PrepareData(const std::filesystem::path &manifest,
                                      const std::filesystem::path &out_dir, std::uint64_t seed);

}  // namespace cmkt::train
