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

#include "cmkt/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cmkt/error.hpp"
#include "cmkt/rng.hpp"
#include "cmkt/signal/audio.hpp"
#include "cmkt/train/data.hpp"
#include "cmkt/transfer/archive.hpp"

namespace cmkt {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTableStream = 21;
constexpr std::uint64_t kUttStream = 22;

struct Voice {
  double f0;
  double formant;
};

Voice VoiceFor(std::uint32_t id, int vocab) {
  const double pos = static_cast<double>(id - 2) / std::max(1, vocab - 2);
  const double golden = std::fmod(id * 0.6180339887498949, 1.0);
  return {110.0 * std::pow(2.0, 1.5 * pos), 400.0 + 2600.0 * golden};
}

// One token: harmonic complex shaped by a spectral peak, 4 Hz amplitude
// modulation, 10 ms raised-cosine edges.
void RenderSegment(std::vector<double> &out, std::size_t start, std::size_t len, Voice v, int sr,
                   std::mt19937_64 &rng) {
  const double nyquist_guard = 0.45 * sr;
  std::vector<std::pair<double, double>> partials;  // (freq, amp)
  for (int k = 1; k * v.f0 < nyquist_guard; ++k) {
    const double f = k * v.f0;
    const double d = (f - v.formant) / 500.0;
    partials.emplace_back(f, std::exp(-d * d) + 0.08 / k);
  }
  std::vector<double> phase(partials.size());
  for (auto &p : phase) p = UniformIn(rng, 0.0, 2.0 * M_PI);
  const double am_phase = UniformIn(rng, 0.0, 2.0 * M_PI);
  const auto edge = static_cast<std::size_t>(0.01 * sr);
  for (std::size_t n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / sr;
    double s = 0.0;
    for (std::size_t k = 0; k < partials.size(); ++k) {
      s += partials[k].second * std::sin(2.0 * M_PI * partials[k].first * t + phase[k]);
    }
    double env = 0.6 + 0.4 * std::sin(2.0 * M_PI * 4.0 * t + am_phase);
    if (n < edge) env *= 0.5 - 0.5 * std::cos(M_PI * n / edge);
    if (len - 1 - n < edge) env *= 0.5 - 0.5 * std::cos(M_PI * (len - 1 - n) / edge);
    out[start + n] += env * s;
  }
}

std::vector<double> UnitRow(int dim, std::mt19937_64 &rng) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto &x : v) {
    x = Gaussian(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto &x : v) x /= norm;
  return v;
}

}  // namespace

void SynthConfig::Validate() const {
  if (n_utts < 1) Fail(ErrorKind::kConfig, "n_utts must be >= 1");
  if (vocab < 3) Fail(ErrorKind::kConfig, "vocab must be >= 3");
  if (d_t < 1) Fail(ErrorKind::kConfig, "d_t must be >= 1");
  if (min_tokens < 1 || max_tokens < min_tokens) Fail(ErrorKind::kConfig, "bad token count range");
  if (!(min_seconds > 0.0) || max_seconds < min_seconds) Fail(ErrorKind::kConfig, "bad duration range");
  if (target_noise < 0.0) Fail(ErrorKind::kConfig, "target_noise must be >= 0");
  if (text_free_fraction < 0.0 || text_free_fraction > 1.0) Fail(ErrorKind::kConfig, "text_free_fraction must be in [0, 1]");
  if (sample_rate < 8000) Fail(ErrorKind::kConfig, "sample_rate too low");
}

SynthOutput GenerateSynth(const fs::path &out_dir, const SynthConfig &cfg, std::uint64_t seed) {
  cfg.Validate();
  std::error_code ec;
  fs::create_directories(out_dir / "clean", ec);
  if (!ec) fs::create_directories(out_dir / "noise", ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  transfer::EmbeddingArchive archive;
  archive.d_t = static_cast<std::uint32_t>(cfg.d_t);
  archive.bos_id = 0;
  archive.eos_id = 1;
  archive.flags = transfer::kArchiveFlagTable;
  {
    std::mt19937_64 rng(DeriveSeed(seed, {kTableStream}));
    ag::Mat<float> table(cfg.vocab, cfg.d_t);
    for (int r = 0; r < cfg.vocab; ++r) {
      const auto row = UnitRow(cfg.d_t, rng);
      for (int c = 0; c < cfg.d_t; ++c) table(r, c) = static_cast<float>(row[c]);
    }
    archive.table = std::move(table);
  }

  std::vector<train::ManifestItem> manifest;
  for (int u = 0; u < cfg.n_utts; ++u) {
    std::mt19937_64 rng(DeriveSeed(seed, {kUttStream, static_cast<std::uint64_t>(u)}));
    const std::string id = fmt::format("syn{:05d}", u);
    const int n_tokens = cfg.min_tokens + static_cast<int>(Uniform01(rng) * (cfg.max_tokens - cfg.min_tokens + 1));
    const double seconds = UniformIn(rng, cfg.min_seconds, cfg.max_seconds);
    const auto total = static_cast<std::size_t>(seconds * cfg.sample_rate);

    transfer::UtteranceRecord rec;
    rec.id = id;
    for (int t = 0; t < n_tokens; ++t) {
      rec.ids.push_back(2 + static_cast<std::uint32_t>(Uniform01(rng) * (cfg.vocab - 2)));
    }

    signal::Waveform clean;
    clean.sample_rate = cfg.sample_rate;
    clean.samples.assign(total, 0.0);
    const std::size_t seg = total / n_tokens;
    for (int t = 0; t < n_tokens; ++t) {
      const std::size_t len = t + 1 == n_tokens ? total - seg * t : seg;
      RenderSegment(clean.samples, seg * t, len, VoiceFor(rec.ids[t], cfg.vocab), cfg.sample_rate, rng);
    }
    double peak = 0.0;
    for (double x : clean.samples) peak = std::max(peak, std::abs(x));
    for (auto &x : clean.samples) x *= 0.5 / peak;

    // Noise: white through a random one-pole low-pass, longer than the
    // speech so mixing has to pick an offset.
    signal::Waveform noise;
    noise.sample_rate = cfg.sample_rate;
    noise.samples.resize(total + static_cast<std::size_t>(UniformIn(rng, 0.0, 0.5) * cfg.sample_rate));
    const double pole = UniformIn(rng, 0.0, 0.9);
    double state = 0.0, npeak = 0.0;
    for (auto &x : noise.samples) {
      state = pole * state + Gaussian(rng);
      x = state;
      npeak = std::max(npeak, std::abs(x));
    }
    for (auto &x : noise.samples) x *= 0.5 / npeak;

    signal::WriteWav(out_dir / "clean" / (id + ".wav"), clean);
    signal::WriteWav(out_dir / "noise" / (id + ".wav"), noise);

    rec.has_target = Uniform01(rng) >= cfg.text_free_fraction;
    std::string transcript;
    for (auto tok : rec.ids) transcript += (transcript.empty() ? "" : " ") + fmt::format("t{}", tok);
    if (rec.has_target) {
      rec.z_hat.resize(n_tokens, cfg.d_t);
      for (int t = 0; t < n_tokens; ++t) {
        for (int c = 0; c < cfg.d_t; ++c) {
          rec.z_hat(t, c) = (*archive.table)(rec.ids[t], c) + static_cast<float>(cfg.target_noise * Gaussian(rng));
        }
      }
    }

    train::ManifestItem item;
    item.id = id;
    item.clean = "clean/" + id + ".wav";
    item.noise = "noise/" + id + ".wav";
    item.snr_db = UniformIn(rng, train::kMinRandomSnrDb, train::kMaxRandomSnrDb);
    if (rec.has_target) item.transcript = transcript;
    manifest.push_back(std::move(item));
    archive.utterances.push_back(std::move(rec));
  }
  archive.Reindex();

  SynthOutput out{out_dir / "manifest.jsonl", out_dir / "embeddings.cmke"};
  train::WriteManifest(out.manifest, manifest);
  transfer::WriteArchive(out.archive, archive);
  return out;
}

}  // namespace cmkt
