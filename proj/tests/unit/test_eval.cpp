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
#include <nlohmann/json.hpp>
#include <sstream>

#include "cmkt/eval/evaluate.hpp"
#include "cmkt/eval/metrics.hpp"
#include "cmkt/eval/stoi.hpp"
#include "cmkt/model/se_model.hpp"
#include "cmkt/signal/stft.hpp"
#include "cmkt/synth.hpp"
#include "cmkt/transfer/archive.hpp"
#include "helpers.hpp"

using namespace cmkt;
using namespace cmkt::eval;
using cmkt::testing::RandomWave;
using cmkt::testing::TempDir;
using cmkt::testing::ToneWave;

namespace {

const std::filesystem::path kStoiData = std::filesystem::path(CMKT_TEST_DATA_DIR) / "stoi";

signal::Waveform Add(const signal::Waveform &a, const signal::Waveform &b, double gain = 1.0) {
  signal::Waveform out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += gain * b.samples[i];
  return out;
}

signal::Waveform Delayed(const signal::Waveform &w, std::size_t delay) {
  signal::Waveform out = w;
  out.samples.insert(out.samples.begin(), delay, 0.0);
  return out;
}

train::Utterance MakeUtterance(const std::string &id, double snr_db, std::uint64_t seed) {
  train::Utterance u;
  u.id = id;
  u.snr_db = snr_db;
  u.clean = ToneWave(16000, 120.0 + 10.0 * static_cast<double>(seed), seed);
  const auto noise = RandomWave(16000, seed + 100, 1.0);
  u.noisy = signal::MixAtSnr(u.clean, noise, snr_db, seed).noisy;
  u.clean_spec = signal::Stft(u.clean, {});
  u.noisy_spec = signal::Stft(u.noisy, {});
  return u;
}

std::vector<double> ReadCsvColumn(const std::filesystem::path &path) {
  std::ifstream in(path);
  std::vector<double> out;
  for (std::string line; std::getline(in, line);) out.push_back(std::stod(line));
  return out;
}

}  // namespace

TEST_CASE("stoi of a signal against itself is one") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto x = ToneWave(24000, 100.0 + 40.0 * static_cast<double>(seed), seed);
    CHECK(Stoi(x, x) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("stoi against white noise is low") {
  const auto x = ToneWave(32000, 140.0, 1);
  CHECK(Stoi(x, RandomWave(32000, 5, 0.2)) < 0.3);
}

TEST_CASE("stoi falls as noise rises") {
  const auto x = ToneWave(32000, 150.0, 1);
  const auto n = RandomWave(32000, 9, 0.2);
  const double mild = Stoi(x, Add(x, n, 0.1));
  const double heavy = Stoi(x, Add(x, n, 1.0));
  CHECK(mild > heavy);
  CHECK(mild <= 1.0);
}

TEST_CASE("stoi is unchanged when both signals are delayed together") {
  // Delays are whole multiples of the 10 kHz frame hop and both signals
  // start silent, so the kept frames line up exactly.
  const auto x = ToneWave(32000, 130.0, 4, 1600);
  auto n = RandomWave(32000, 6, 0.2);
  std::fill(n.samples.begin(), n.samples.begin() + 1600, 0.0);
  const auto y = Add(x, n, 0.5);
  const double base = Stoi(x, y);
  for (std::size_t delay : {1024u, 2048u}) {
    CHECK(Stoi(Delayed(x, delay), Delayed(y, delay)) == doctest::Approx(base).epsilon(1e-4));
  }
}

TEST_CASE("stoi input validation") {
  const auto x = ToneWave(16000, 150.0, 1);
  auto shorter = x;
  shorter.samples.pop_back();
  CHECK_THROWS_KIND(Stoi(x, shorter), ErrorKind::kShape);
  auto other_rate = x;
  other_rate.sample_rate = 8000;
  CHECK_THROWS_KIND(Stoi(x, other_rate), ErrorKind::kShape);
  signal::Waveform silent;
  silent.samples.assign(16000, 0.0);
  CHECK_THROWS_KIND(Stoi(silent, x), ErrorKind::kDegenerateSignal);
}

TEST_CASE("stoi returns the floor value when too few frames survive") {
  const auto x = ToneWave(2000, 150.0, 1);
  CHECK(Stoi(x, x) == doctest::Approx(1e-5));
}

TEST_CASE("stoi resampler keeps a low tone and its length") {
  std::vector<double> x(1600);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * M_PI * 200.0 * static_cast<double>(i) / 16000);
  const auto y = stoi_detail::Resample(x, 5, 8);
  REQUIRE(y.size() == 1000);
  double worst = 0.0;
  for (std::size_t i = 100; i < 900; ++i) {
    worst = std::max(worst, std::abs(y[i] - std::sin(2 * M_PI * 200.0 * static_cast<double>(i) / 10000)));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("stoi matches frozen reference scores") {
  std::ifstream in(kStoiData / "reference.json");
  REQUIRE(in.good());
  const auto ref = nlohmann::json::parse(in);
  REQUIRE(ref.size() == 20);
  for (const auto &[name, score] : ref.items()) {
    const auto clean = signal::ReadWav(kStoiData / (name + "_clean.wav"));
    const auto deg = signal::ReadWav(kStoiData / (name + "_deg.wav"));
    INFO(name);
    CHECK(std::abs(Stoi(clean, deg) - score.get<double>()) < 1e-3);
  }
}

TEST_CASE("si-sdr cap, scale invariance and closed form") {
  const auto x = RandomWave(8000, 1).samples;
  CHECK(SiSdr(x, x) == kSiSdrCapDb);
  std::vector<double> doubled(x);
  for (auto &v : doubled) v *= 2.0;
  CHECK(SiSdr(x, doubled) == kSiSdrCapDb);

  const auto n = RandomWave(8000, 2, 0.1).samples;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + n[i];
  double xy = 0.0, xx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
  }
  const double a = xy / xx;
  double target = 0.0, resid = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    target += a * x[i] * a * x[i];
    resid += (y[i] - a * x[i]) * (y[i] - a * x[i]);
  }
  const double expected = 10.0 * std::log10(target / resid);
  CHECK(SiSdr(x, y) == doctest::Approx(expected).epsilon(1e-10));

  for (double c : {0.25, 3.0, 17.0}) {
    std::vector<double> scaled(y);
    for (auto &v : scaled) v *= c;
    CHECK(SiSdr(x, scaled) == doctest::Approx(SiSdr(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("si-sdr error cases") {
  const std::vector<double> zeros(100, 0.0);
  const auto x = RandomWave(100, 1).samples;
  CHECK_THROWS_KIND(SiSdr(zeros, x), ErrorKind::kDegenerateSignal);
  CHECK_THROWS_KIND(SiSdr(x, std::vector<double>(99, 0.1)), ErrorKind::kShape);
  CHECK(SiSdr(x, zeros) == -kSiSdrCapDb);
}

TEST_CASE("snr buckets") {
  CHECK(BucketFor(15.0) == Bucket::kHigh);
  CHECK(BucketFor(5.0) == Bucket::kHigh);
  CHECK(BucketFor(4.999) == Bucket::kMedium);
  CHECK(BucketFor(-5.0) == Bucket::kMedium);
  CHECK(BucketFor(-5.001) == Bucket::kLow);
  CHECK(BucketFor(-15.0) == Bucket::kLow);
  CHECK(BucketName(Bucket::kMedium) == "medium");
}

TEST_CASE("identity enhancer scores exactly like the noisy baseline") {
  std::vector<train::Utterance> corpus{MakeUtterance("u0", 10.0, 1), MakeUtterance("u1", 0.0, 2),
                                       MakeUtterance("u2", -10.0, 3)};
  const auto report = Evaluate(corpus, IdentityEnhancer(), DefaultMetrics());
  for (const char *m : {"stoi", "si_sdr"}) {
    for (auto b : {Bucket::kHigh, Bucket::kMedium, Bucket::kLow}) {
      CHECK(*report.Mean(m, b) == *report.Mean(std::string("noisy_") + m, b));
    }
  }
  CHECK(*report.Mean("si_sdr", Bucket::kHigh) > *report.Mean("si_sdr", Bucket::kLow));
}

TEST_CASE("an oracle enhancer reaches near-perfect scores") {
  std::vector<train::Utterance> corpus{MakeUtterance("u0", 0.0, 1)};
  const auto clean_spec = corpus[0].clean_spec;
  const Enhancer oracle = [&](const signal::Spectrogram &) { return clean_spec; };
  const auto report = Evaluate(corpus, oracle, {"stoi", "si_sdr", "noisy_si_sdr"});
  CHECK(*report.Mean("si_sdr") > 50.0);
  CHECK(*report.Mean("stoi") > 0.999);
  CHECK(*report.Mean("noisy_si_sdr") < 5.0);
}

TEST_CASE("report means, reserved metrics and csv layout") {
  std::vector<train::Utterance> corpus{MakeUtterance("a", 10.0, 1), MakeUtterance("b", 8.0, 2),
                                       MakeUtterance("c", -8.0, 3)};
  const auto report = Evaluate(corpus, IdentityEnhancer(), {"si_sdr", "pesq"});
  CHECK_FALSE(report.Mean("pesq").has_value());
  CHECK_FALSE(report.Mean("si_sdr", Bucket::kMedium).has_value());
  double sum = 0.0;
  for (const auto &r : report.rows) {
    if (r.metric == "si_sdr") sum += *r.value;
  }
  CHECK(*report.Mean("si_sdr") == doctest::Approx(sum / 3.0));

  TempDir dir("report");
  report.WriteCsv(dir / "r.csv");
  std::ifstream in(dir / "r.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "utt_id,snr_db,bucket,metric,value");
  bool saw_na = false, saw_mean = false;
  while (std::getline(in, line)) {
    saw_na |= line.rfind("a,", 0) == 0 && line.find(",pesq,NA") != std::string::npos;
    saw_mean |= line.rfind("mean,", 0) == 0 && line.find(",all,si_sdr,") != std::string::npos;
  }
  CHECK(saw_na);
  CHECK(saw_mean);
}

TEST_CASE("unknown metric names are rejected") {
  std::vector<train::Utterance> corpus{MakeUtterance("a", 0.0, 1)};
  CHECK_THROWS_KIND(Evaluate(corpus, IdentityEnhancer(), {"mos"}), ErrorKind::kConfig);
}

TEST_CASE("attention export: uniform maps, single frames and layer indexing") {
  TempDir dir("attn");
  transfer::CmtAttention att;
  att.weights.push_back({ag::Mat<double>::Constant(4, 10, 0.1), ag::Mat<double>::Constant(4, 10, 0.1)});
  att.weights.push_back({ag::Mat<double>::Ones(5, 1), ag::Mat<double>::Ones(5, 1)});

  const auto uniform = ExportAttention(att, 0, HeadReduce::kMeanHeads, dir / "u");
  REQUIRE(uniform.size() == 2);
  std::ifstream pgm(uniform[1], std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  pgm >> magic >> w >> h >> maxval;
  pgm.get();
  CHECK(magic == "P5");
  CHECK(w == 10);
  CHECK(h == 4);
  std::string pixels(40, '\0');
  pgm.read(pixels.data(), 40);
  for (char p : pixels) CHECK(static_cast<unsigned char>(p) == 128);

  const auto single = ExportAttention(att, -1, HeadReduce::kPerHead, dir / "s");
  REQUIRE(single.size() == 4);
  CHECK(single[0].filename() == "s_head0.csv");
  const auto column = ReadCsvColumn(single[0]);
  REQUIRE(column.size() == 5);
  for (double v : column) CHECK(v == 1.0);

  CHECK_THROWS_KIND(ExportAttention(att, 2, HeadReduce::kMeanHeads, dir / "x"), ErrorKind::kConfig);
  CHECK_THROWS_KIND(ExportAttention(att, -3, HeadReduce::kMeanHeads, dir / "x"), ErrorKind::kConfig);
}

TEST_CASE("captured attention rows are distributions over speech frames") {
  TempDir dir("capture");
  SynthConfig s;
  s.n_utts = 2;
  s.d_t = 16;
  s.vocab = 8;
  s.min_seconds = 0.3;
  s.max_seconds = 0.4;
  const auto out = GenerateSynth(dir.path(), s, 5);
  const auto archive = transfer::ReadArchive(out.archive);
  const auto corpus = train::LoadCorpus(out.manifest, {}, 5);
  train::ModelBundle bundle;
  bundle.model = cmkt::testing::TinyModel();
  bundle.cmt = cmkt::testing::TinyCmt(16);
  auto params = model::InitParams<float>(bundle.model, 1);
  transfer::InitCmtParams(params, bundle.cmt, 2);

  const auto &u = corpus[0];
  const auto *rec = archive.Find(u.id);
  REQUIRE(rec != nullptr);
  const auto att = CaptureCmtAttention(params, bundle, archive, u.noisy_spec, *rec);
  REQUIRE(att.weights.size() == 2);
  for (const auto &layer : att.weights) {
    REQUIRE(layer.size() == 2);
    for (const auto &m : layer) {
      CHECK(m.rows() == static_cast<Eigen::Index>(rec->ids.size() + 2));
      CHECK(m.cols() == u.noisy_spec.log_amp.rows());
      for (Eigen::Index r = 0; r < m.rows(); ++r) CHECK(m.row(r).sum() == doctest::Approx(1.0).epsilon(1e-5));
    }
  }
}
