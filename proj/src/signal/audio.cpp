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

#include "cmkt/signal/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "cmkt/error.hpp"

namespace cmkt::signal {
namespace {

std::uint32_t ReadU32(const unsigned char *p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t ReadU16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU16(std::string &out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform ReadWav(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const auto bad = [&](const std::string &why) {
    Fail(ErrorKind::kFormat, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    bad("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    const std::uint32_t size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) bad("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) bad("short fmt chunk");
      const std::uint16_t tag = ReadU16(bytes.data() + body);
      channels = ReadU16(bytes.data() + body + 2);
      rate = ReadU32(bytes.data() + body + 4);
      bits = ReadU16(bytes.data() + body + 14);
      // 0xFFFE is WAVE_FORMAT_EXTENSIBLE; its PCM flavour is accepted too.
      if (tag != 1 && tag != 0xFFFE) bad("only PCM is supported");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) bad("data chunk before fmt chunk");
      if (channels != 1) bad("only mono is supported, got " + std::to_string(channels) + " channels");
      if (bits != 16) bad("only 16-bit samples are supported");
      Waveform wave;
      wave.sample_rate = static_cast<int>(rate);
      wave.samples.resize(size / 2);
      for (std::size_t i = 0; i < wave.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(ReadU16(bytes.data() + body + 2 * i));
        wave.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return wave;
    }
    pos = body + size + (size & 1);
  }
  bad("no data chunk");
}

void WriteWav(const std::filesystem::path &path, const Waveform &wave) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  PutU32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);
  PutU16(out, 1);
  PutU32(out, static_cast<std::uint32_t>(wave.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out += "data";
  PutU32(out, 2 * n);
  for (double s : wave.samples) {
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    PutU16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) Fail(ErrorKind::kIo, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

double MeanPower(const std::vector<double> &x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double Rms(const std::vector<double> &x) { return std::sqrt(MeanPower(x)); }

double MeasureSnrDb(const std::vector<double> &clean,
                    const std::vector<double> &noise) {
  return 10.0 * std::log10(MeanPower(clean) / MeanPower(noise));
}

Mixture MixAtSnr(const Waveform &clean, const Waveform &noise, double snr_db,
                 std::uint64_t seed) {
  if (clean.sample_rate != noise.sample_rate) {
    Fail(ErrorKind::kInput, "sample rate mismatch between clean and noise");
  }
  if (clean.samples.empty() || noise.samples.empty()) {
    Fail(ErrorKind::kDegenerateSignal, "empty clean or noise signal");
  }
  const double rms_clean = Rms(clean.samples);
  const double rms_noise = Rms(noise.samples);
  if (rms_clean == 0.0 || rms_noise == 0.0) {
    Fail(ErrorKind::kDegenerateSignal, "silent clean or noise signal");
  }

  const std::size_t n = clean.size();
  std::vector<double> source = noise.samples;
  while (source.size() < n) {
    source.insert(source.end(), noise.samples.begin(), noise.samples.end());
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, source.size() - n);
  const std::size_t offset = pick(rng);

  Mixture mix;
  mix.noise_offset = offset;
  mix.scaled_noise.assign(source.begin() + static_cast<std::ptrdiff_t>(offset),
                          source.begin() + static_cast<std::ptrdiff_t>(offset + n));
  // Gain is measured on the segment actually used, so the output SNR is exact.
  const double rms_segment = Rms(mix.scaled_noise);
  if (rms_segment == 0.0) {
    Fail(ErrorKind::kDegenerateSignal, "selected noise segment is silent");
  }
  mix.gain = (rms_clean / rms_segment) * std::pow(10.0, -snr_db / 20.0);
  mix.noisy.sample_rate = clean.sample_rate;
  mix.noisy.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    mix.scaled_noise[i] *= mix.gain;
    mix.noisy.samples[i] = clean.samples[i] + mix.scaled_noise[i];
  }
  return mix;
}

}  // namespace cmkt::signal
