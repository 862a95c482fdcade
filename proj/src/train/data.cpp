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

#include "cmkt/train/data.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <random>
#include <set>

#include "cmkt/error.hpp"
#include "cmkt/rng.hpp"

namespace cmkt::train {
namespace fs = std::filesystem;

namespace {

// Stream tags for seeds derived per item.
constexpr std::uint64_t kSnrStream = 1;
constexpr std::uint64_t kMixStream = 2;
constexpr double kPreparedPeak = 0.99;

ManifestItem ParseItem(const nlohmann::json &j, const std::string &where) {
  if (!j.is_object()) Fail(ErrorKind::kIngest, where + ": manifest line is not an object");
  ManifestItem item;
  try {
    item.id = j.at("id").get<std::string>();
    item.clean = j.at("clean").get<std::string>();
    if (j.contains("noise")) item.noise = j.at("noise").get<std::string>();
    if (j.contains("noisy")) item.noisy = j.at("noisy").get<std::string>();
    if (j.contains("snr_db")) {
      const auto &s = j.at("snr_db");
      if (s.is_string()) {
        if (s.get<std::string>() != "random") Fail(ErrorKind::kIngest, where + ": snr_db must be a number or \"random\"");
      } else {
        item.snr_db = s.get<double>();
      }
    }
    if (j.contains("transcript") && !j.at("transcript").is_null()) {
      item.transcript = j.at("transcript").get<std::string>();
    }
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorKind::kIngest, where + ": " + e.what());
  }
  if (item.id.empty()) Fail(ErrorKind::kIngest, where + ": empty id");
  if (item.noise.empty() == item.noisy.empty()) {
    Fail(ErrorKind::kIngest, "utterance '" + item.id + "': exactly one of noise/noisy is required");
  }
  return item;
}

fs::path Resolve(const fs::path &base, const std::string &p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

signal::Waveform ReadFor(const std::string &id, const fs::path &path) {
  try {
    return signal::ReadWav(path);
  } catch (const Error &e) {
    Fail(ErrorKind::kIngest, "utterance '" + id + "': " + e.what());
  }
}

}  // namespace

std::vector<ManifestItem> ReadManifest(const fs::path &path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIngest, "cannot open manifest " + path.string());
  std::vector<ManifestItem> items;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      Fail(ErrorKind::kIngest, where + ": " + e.what());
    }
    auto item = ParseItem(j, where);
    if (!seen.insert(item.id).second) Fail(ErrorKind::kIngest, where + ": duplicate id '" + item.id + "'");
    items.push_back(std::move(item));
  }
  return items;
}

void WriteManifest(const fs::path &path, const std::vector<ManifestItem> &items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write manifest " + path.string());
  for (const auto &item : items) {
    nlohmann::json j;
    j["id"] = item.id;
    j["clean"] = item.clean;
    if (!item.noise.empty()) j["noise"] = item.noise;
    if (!item.noisy.empty()) j["noisy"] = item.noisy;
    if (item.snr_db) {
      j["snr_db"] = *item.snr_db;
    } else {
      j["snr_db"] = "random";
    }
    if (item.transcript) j["transcript"] = *item.transcript;
    out << j.dump() << '\n';
  }
  if (!out) Fail(ErrorKind::kIo, "failed writing manifest " + path.string());
}

double ResolveSnr(const ManifestItem &item, std::size_t index, std::uint64_t seed) {
  if (item.snr_db) return *item.snr_db;
  std::mt19937_64 rng(DeriveSeed(seed, {kSnrStream, index}));
  return UniformIn(rng, kMinRandomSnrDb, kMaxRandomSnrDb);
}

std::vector<Utterance> LoadCorpus(const fs::path &manifest, const signal::StftConfig &stft,
                                  std::uint64_t seed) {
  const auto items = ReadManifest(manifest);
  const fs::path base = manifest.parent_path();
  std::vector<Utterance> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto &item = items[i];
    Utterance u;
    u.id = item.id;
    u.transcript = item.transcript;
    u.clean = ReadFor(item.id, Resolve(base, item.clean));
    if (!item.noise.empty()) {
      const auto noise = ReadFor(item.id, Resolve(base, item.noise));
      u.snr_db = ResolveSnr(item, i, seed);
      try {
        u.noisy = signal::MixAtSnr(u.clean, noise, u.snr_db, DeriveSeed(seed, {kMixStream, i})).noisy;
      } catch (const Error &e) {
        Fail(ErrorKind::kIngest, "utterance '" + item.id + "': " + e.what());
      }
    } else {
      u.noisy = ReadFor(item.id, Resolve(base, item.noisy));
      if (u.noisy.size() != u.clean.size()) {
        Fail(ErrorKind::kIngest, "utterance '" + item.id + "': clean and noisy lengths differ");
      }
      if (item.snr_db) {
        u.snr_db = *item.snr_db;
      } else {
        std::vector<double> residual(u.clean.size());
        for (std::size_t k = 0; k < residual.size(); ++k) residual[k] = u.noisy.samples[k] - u.clean.samples[k];
        u.snr_db = signal::MeasureSnrDb(u.clean.samples, residual);
      }
    }
    try {
      u.clean_spec = signal::Stft(u.clean, stft);
      u.noisy_spec = signal::Stft(u.noisy, stft);
    } catch (const Error &e) {
      Fail(ErrorKind::kIngest, "utterance '" + item.id + "': " + e.what());
    }
    out.push_back(std::move(u));
  }
  spdlog::info("loaded {} utterances from {}", out.size(), manifest.string());
  return out;
}

std::vector<ManifestItem> PrepareData(const fs::path &manifest, const fs::path &out_dir, std::uint64_t seed) {
  const auto items = ReadManifest(manifest);
  const fs::path base = manifest.parent_path();
  std::error_code ec;
  fs::create_directories(out_dir / "noisy", ec);
  if (!ec) fs::create_directories(out_dir / "clean", ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + (out_dir / "noisy").string() + ": " + ec.message());

  std::vector<ManifestItem> prepared;
  for (std::size_t i = 0; i < items.size(); ++i) {
    ManifestItem item = items[i];
    const fs::path clean_path = fs::absolute(Resolve(base, item.clean));
    if (!item.noise.empty()) {
      const auto clean = ReadFor(item.id, clean_path);
      const auto noise = ReadFor(item.id, Resolve(base, item.noise));
      const double snr = ResolveSnr(item, i, seed);
      signal::Mixture mix;
      try {
        mix = signal::MixAtSnr(clean, noise, snr, DeriveSeed(seed, {kMixStream, i}));
      } catch (const Error &e) {
        Fail(ErrorKind::kIngest, "utterance '" + item.id + "': " + e.what());
      }
      // 16-bit output would clip loud low-SNR mixtures; one shared gain
      // keeps the pair and its SNR intact.
      double peak = 0.0;
      for (double v : mix.noisy.samples) peak = std::max(peak, std::abs(v));
      for (double v : clean.samples) peak = std::max(peak, std::abs(v));
      const double gain = peak > kPreparedPeak ? kPreparedPeak / peak : 1.0;
      signal::Waveform scaled_clean = clean;
      for (auto &v : scaled_clean.samples) v *= gain;
      for (auto &v : mix.noisy.samples) v *= gain;
      const std::string rel = "noisy/" + item.id + ".wav";
      const std::string clean_rel = "clean/" + item.id + ".wav";
      signal::WriteWav(out_dir / rel, mix.noisy);
      signal::WriteWav(out_dir / clean_rel, scaled_clean);
      item.noise.clear();
      item.noisy = rel;
      item.clean = clean_rel;
      item.snr_db = snr;
      prepared.push_back(std::move(item));
      continue;
    } else {
      item.noisy = fs::absolute(Resolve(base, item.noisy)).string();
    }
    item.clean = clean_path.string();
    prepared.push_back(std::move(item));
  }
  WriteManifest(out_dir / "manifest.jsonl", prepared);
  return prepared;
}

}  // namespace cmkt::train
