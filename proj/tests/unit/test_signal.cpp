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

#include <doctest.h>

#include <fstream>

#include "cmkt/binary_io.hpp"
#include "cmkt/signal/audio.hpp"
#include "cmkt/signal/export.hpp"
#include "cmkt/signal/stft.hpp"
#include "helpers.hpp"

using namespace cmkt;
using namespace cmkt::signal;
using cmkt::testing::RandomWave;
using cmkt::testing::TempDir;

namespace {

double InteriorSnrDb(const std::vector<double> &ref, const std::vector<double> &est, std::size_t margin) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = margin; i + margin < est.size(); ++i) {
    num += ref[i] * ref[i];
    den += (ref[i] - est[i]) * (ref[i] - est[i]);
  }
  return 10.0 * std::log10(num / std::max(den, 1e-300));
}

}  // namespace

TEST_CASE("hamming window is periodic with the usual end values") {
  const auto w = HammingWindow(400);
  REQUIRE(w.size() == 400);
  CHECK(w[0] == doctest::Approx(0.08));
  CHECK(w[200] == doctest::Approx(1.0));
  CHECK(w[100] == doctest::Approx(w[300]));
}

TEST_CASE("stft frame count and bins") {
  StftConfig cfg;
  CHECK(cfg.bins() == 201);
  const auto spec = Stft(RandomWave(16000, 1), cfg);
  CHECK(spec.frames() == 1 + (16000 - 400) / 100);
  CHECK(spec.bins() == 201);
  CHECK(cfg.NumFrames(16000) == spec.frames());
}

TEST_CASE("stft rejects input shorter than one window") {
  CHECK_THROWS_KIND(Stft(RandomWave(399, 1), StftConfig{}), ErrorKind::kInputTooShort);
  CHECK_NOTHROW(Stft(RandomWave(400, 1), StftConfig{}));
}

TEST_CASE("stft of silence sits on the log floor") {
  Waveform w;
  w.samples.assign(1600, 0.0);
  const auto spec = Stft(w, StftConfig{});
  CHECK(spec.log_amp.maxCoeff() == doctest::Approx(std::log(1e-5)));
}

TEST_CASE("stft-istft round trip keeps interior SNR above 50 dB on random signals") {
  StftConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = RandomWave(4000 + 137 * seed, seed);
    const auto y = Resynthesize(Stft(x, cfg));
    REQUIRE(y.size() <= x.size());
    CHECK(InteriorSnrDb(x.samples, y.samples, 400) > 50.0);
  }
}

TEST_CASE("istft rejects mismatched magnitude and phase") {
  RealMatrix mag = RealMatrix::Ones(5, 201);
  RealMatrix phase = RealMatrix::Zero(5, 200);
  CHECK_THROWS_KIND(Istft(mag, phase, StftConfig{}), ErrorKind::kShape);
}

TEST_CASE("apply mask in both domains") {
  const auto spec = Stft(RandomWave(2000, 3), StftConfig{});
  RealMatrix half = RealMatrix::Constant(spec.frames(), spec.bins(), 0.5);
  const auto mag = ApplyMask(spec, half, MaskDomain::kMagnitude);
  const double floor = std::log(1e-5);
  for (Eigen::Index i = 0; i < spec.log_amp.size(); ++i) {
    const double expect = std::max(spec.log_amp.data()[i] + std::log(0.5), floor);
    CHECK(mag.log_amp.data()[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  const auto lg = ApplyMask(spec, half, MaskDomain::kLog);
  CHECK((lg.log_amp - 0.5 * spec.log_amp).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((lg.phase - spec.phase).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("apply mask rejects values outside the open unit interval") {
  const auto spec = Stft(RandomWave(2000, 3), StftConfig{});
  for (double bad : {0.0, 1.0, 1.5, -0.1}) {
    RealMatrix m = RealMatrix::Constant(spec.frames(), spec.bins(), 0.5);
    m(0, 0) = bad;
    CHECK_THROWS_KIND(ApplyMask(spec, m), ErrorKind::kMaskRange);
  }
  RealMatrix wrong = RealMatrix::Constant(spec.frames() + 1, spec.bins(), 0.5);
  CHECK_THROWS_KIND(ApplyMask(spec, wrong), ErrorKind::kShape);
}

TEST_CASE("mix at snr hits the requested snr exactly") {
  const auto clean = RandomWave(16000, 7, 0.2);
  const auto noise = RandomWave(20000, 8, 0.05);
  for (double snr : {-15.0, 0.0, 15.0}) {
    const auto mix = MixAtSnr(clean, noise, snr, 42);
    CHECK(std::abs(MeasureSnrDb(clean.samples, mix.scaled_noise) - snr) < 1e-6);
    for (std::size_t i = 0; i < clean.size(); i += 997) {
      CHECK(mix.noisy.samples[i] == doctest::Approx(clean.samples[i] + mix.scaled_noise[i]));
    }
  }
}

TEST_CASE("mix at snr tiles short noise and is seeded") {
  const auto clean = RandomWave(5000, 1);
  const auto noise = RandomWave(1200, 2);
  const auto a = MixAtSnr(clean, noise, 3.0, 5);
  const auto b = MixAtSnr(clean, noise, 3.0, 5);
  CHECK(a.noisy.samples == b.noisy.samples);
  CHECK(a.noisy.size() == clean.size());
  CHECK(std::abs(MeasureSnrDb(clean.samples, a.scaled_noise) - 3.0) < 1e-6);
}

TEST_CASE("mix at snr rejects silent inputs and rate mismatch") {
  const auto clean = RandomWave(1000, 1);
  Waveform silent;
  silent.samples.assign(1000, 0.0);
  CHECK_THROWS_KIND(MixAtSnr(clean, silent, 0.0, 1), ErrorKind::kDegenerateSignal);
  CHECK_THROWS_KIND(MixAtSnr(silent, clean, 0.0, 1), ErrorKind::kDegenerateSignal);
  auto other = RandomWave(1000, 2);
  other.sample_rate = 8000;
  CHECK_THROWS_KIND(MixAtSnr(clean, other, 0.0, 1), ErrorKind::kInput);
}

TEST_CASE("wav round trip is exact to 16-bit precision") {
  TempDir dir("wav");
  auto w = RandomWave(3000, 4, 0.2);
  WriteWav(dir / "a.wav", w);
  const auto r = ReadWav(dir / "a.wav");
  REQUIRE(r.size() == w.size());
  CHECK(r.sample_rate == 16000);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(r.samples[i] - w.samples[i]) <= 0.5 / 32768 + 1e-12);
}

TEST_CASE("wav reader rejects stereo and missing files") {
  TempDir dir("wav");
  io::ByteWriter b;
  b.Raw("RIFF", 4);
  b.U32(36 + 8);
  b.Raw("WAVEfmt ", 8);
  b.U32(16);
  b.Put<std::uint16_t>(1);
  b.Put<std::uint16_t>(2);  // stereo
  b.U32(16000);
  b.U32(16000 * 4);
  b.Put<std::uint16_t>(4);
  b.Put<std::uint16_t>(16);
  b.Raw("data", 4);
  b.U32(8);
  b.U32(0);
  b.U32(0);
  b.WriteFile(dir / "stereo.wav");
  CHECK_THROWS_KIND(ReadWav(dir / "stereo.wav"), ErrorKind::kFormat);
  CHECK_THROWS_AS(ReadWav(dir / "missing.wav"), cmkt::Error);
}

TEST_CASE("matrix csv uses dot decimals and LF endings") {
  TempDir dir("csv");
  RealMatrix m(2, 2);
  m << 0.5, 1.25, -3, 1e-3;
  WriteMatrixCsv(dir / "m.csv", m);
  std::ifstream in(dir / "m.csv", std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text == "0.5,1.25\n-3,0.001\n");
}

TEST_CASE("pgm is min-max scaled and constant maps to mid gray") {
  TempDir dir("pgm");
  auto read_pixels = [](const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::string magic;
    int w, h, maxv;
    in >> magic >> w >> h >> maxv;
    in.get();
    std::vector<unsigned char> px(static_cast<std::size_t>(w * h));
    in.read(reinterpret_cast<char *>(px.data()), static_cast<std::streamsize>(px.size()));
    CHECK(magic == "P5");
    CHECK(maxv == 255);
    return px;
  };
  WritePgm(dir / "c.pgm", RealMatrix::Constant(3, 4, 0.25));
  for (auto v : read_pixels(dir / "c.pgm")) CHECK(v == 128);
  RealMatrix ramp(1, 3);
  ramp << 1.0, 2.0, 3.0;
  WritePgm(dir / "r.pgm", ramp);
  const auto px = read_pixels(dir / "r.pgm");
  CHECK(px.front() == 0);
  CHECK(px.back() == 255);
}
