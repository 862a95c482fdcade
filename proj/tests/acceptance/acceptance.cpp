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

// Acceptance harness. Prints one PASS/FAIL line per criterion on stdout and
// exits non-zero if any fails. Progress logging goes to stderr.
//
//   acceptance [suite ...]   run only the named suites

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fmt/core.h>
#include <functional>
#include <fstream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cmkt/error.hpp"
#include "cmkt/eval/evaluate.hpp"
#include "cmkt/eval/stoi.hpp"
#include "cmkt/model/se_model.hpp"
#include "cmkt/rng.hpp"
#include "cmkt/signal/audio.hpp"
#include "cmkt/signal/stft.hpp"
#include "cmkt/synth.hpp"
#include "cmkt/train/data.hpp"
#include "cmkt/train/grad_check.hpp"
#include "cmkt/train/trainer.hpp"
#include "cmkt/transfer/archive.hpp"
#include "cmkt/transfer/cmt.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cmkt;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradRelErr = 1e-4;
constexpr double kGradBudgetSeconds = 120.0;
constexpr double kRoundTripSnrDb = 50.0;
constexpr double kMixSnrTolDb = 1e-6;
constexpr double kShiftOwnLoss = 1e-9;
constexpr double kShiftOtherLoss = 0.1;
constexpr double kRowSumTol = 1e-5;
constexpr double kStoiOracleTol = 1e-3;
constexpr double kLossReduction = 0.80;
constexpr double kSiSdrGainDb = 5.0;
constexpr double kLearningBudgetSeconds = 30.0 * 60.0;

// Learning-run setup.
constexpr int kCorpusUtts = 50;
constexpr std::uint64_t kCorpusSeed = 2026;
constexpr std::uint64_t kTrainSeed = 1;
constexpr std::int64_t kLearningSteps = 2000;
constexpr double kLearningAlpha = 0.7;
// Loss is noisy per step; the final value is the mean of the last window.
constexpr std::size_t kFinalWindow = 50;
constexpr std::size_t kReferenceStep = 10;

// Misalignment table.
constexpr std::int64_t kMisalignSteps = 400;
constexpr std::uint64_t kMisalignSeeds[] = {1, 2, 3};

using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_failures = 0;

void Verdict(const std::string &name, bool pass, const std::string &detail) {
  if (!pass) ++g_failures;
  fmt::print("{} {}: {}\n", pass ? "PASS" : "FAIL", name, detail);
  std::fflush(stdout);
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string &tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / fmt::format("cmkt_accept_{}_{}{}", tag, rd(), rd());
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir &) = delete;
  ScratchDir &operator=(const ScratchDir &) = delete;
  const fs::path &path() const { return path_; }

 private:
  fs::path path_;
};

signal::Waveform GaussianWave(std::size_t n, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  signal::Waveform w;
  w.samples.resize(n);
  for (auto &x : w.samples) x = scale * Gaussian(rng);
  return w;
}

ag::Mat<double> UniformMat(Eigen::Index r, Eigen::Index c, std::mt19937_64 &rng) {
  ag::Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = UniformIn(rng, -1.0, 1.0);
  return m;
}

double MeanTail(const std::vector<double> &v, std::size_t window) {
  const std::size_t n = std::min(window, v.size());
  double s = 0.0;
  for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(n);
}

bool StoresBitwiseEqual(const model::ParamStore<float> &a, const model::ParamStore<float> &b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a.entries()[i].var.value();
    const auto &y = b.entries()[i].var.value();
    if (a.entries()[i].name != b.entries()[i].name || x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(float) * static_cast<std::size_t>(x.size())) != 0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

void GradientSuite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (auto kind : {model::BlockKind::kConformer, model::BlockKind::kTransformer, model::BlockKind::kBlstm}) {
    for (auto sel : {train::LossSelector::kSeOnly, train::LossSelector::kCmaOnly, train::LossSelector::kCombined}) {
      const auto r = train::GradCheck(kind, sel, 1, kLearningAlpha);
      checked += r.checked;
      if (r.max_rel_err >= worst) {
        worst = r.max_rel_err;
        where = fmt::format("{}/{} {}", model::BlockKindName(kind), train::LossSelectorName(sel), r.worst_param);
      }
    }
  }
  const double secs = SecondsSince(t0);
  Verdict("gradient suite", worst < kGradRelErr && secs < kGradBudgetSeconds,
          fmt::format("max rel err {:.3e} (< {:.0e}) at {}; {} scalars; {:.1f} s (< {:.0f} s)", worst, kGradRelErr,
                      where, checked, secs, kGradBudgetSeconds));
}

void DspSuite() {
  const signal::StftConfig cfg;
  double worst_snr = 1e300;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = GaussianWave(8000 + 211 * seed, 100 + seed, 0.3);
    const auto y = signal::Resynthesize(signal::Stft(x, cfg));
    const std::size_t margin = static_cast<std::size_t>(cfg.win_len);
    double num = 0.0, den = 0.0;
    for (std::size_t i = margin; i + margin < y.size(); ++i) {
      num += x.samples[i] * x.samples[i];
      den += (x.samples[i] - y.samples[i]) * (x.samples[i] - y.samples[i]);
    }
    worst_snr = std::min(worst_snr, 10.0 * std::log10(num / std::max(den, 1e-300)));
  }
  double worst_mix = 0.0;
  for (double snr : {-15.0, 0.0, 15.0}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto clean = GaussianWave(16000, 200 + seed, 0.2);
      const auto noise = GaussianWave(7000, 300 + seed, 0.05);
      const auto mix = signal::MixAtSnr(clean, noise, snr, seed);
      worst_mix = std::max(worst_mix, std::abs(signal::MeasureSnrDb(clean.samples, mix.scaled_noise) - snr));
    }
  }
  Verdict("dsp suite", worst_snr > kRoundTripSnrDb && worst_mix < kMixSnrTolDb,
          fmt::format("worst round-trip interior SNR {:.1f} dB (> {:.0f}); worst mix SNR error {:.2e} dB (< {:.0e})",
                      worst_snr, kRoundTripSnrDb, worst_mix, kMixSnrTolDb));
}

void ShiftLawSuite() {
  using transfer::AlignMode;
  const std::map<AlignMode, int> first_row{{AlignMode::kAligned, 1}, {AlignMode::kLeftShift, 2},
                                           {AlignMode::kRightShift, 0}};
  std::mt19937_64 rng(7);
  double own_max = 0.0, other_min = 1e300;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 12;
    ag::Var<double> z(UniformMat(n + 2, 32, rng));
    for (const auto &[built, start] : first_row) {
      const ag::Mat<double> targets = z.value().middleRows(start, n);
      for (const auto &[mode, unused] : first_row) {
        const auto [sel, tgt] = transfer::ShiftPairs(z, targets, mode);
        const double loss = transfer::CmaLoss(sel, tgt).item();
        if (mode == built) {
          own_max = std::max(own_max, loss);
        } else {
          other_min = std::min(other_min, loss);
        }
      }
    }
  }
  Verdict("shift-law suite", own_max < kShiftOwnLoss && other_min > kShiftOtherLoss,
          fmt::format("own-mode loss max {:.2e} (< {:.0e}); other-mode loss min {:.3f} (> {})", own_max,
                      kShiftOwnLoss, other_min, kShiftOtherLoss));
}

void EquivalenceSuite() {
  ScratchDir dir("equiv");
  SynthConfig s;
  s.n_utts = 6;
  s.vocab = 10;
  s.d_t = 16;
  s.min_seconds = 0.4;
  s.max_seconds = 0.6;
  const auto out = GenerateSynth(dir.path() / "synth", s, 5);
  const auto archive = transfer::ReadArchive(out.archive);

  train::ModelBundle bundle;
  bundle.model.n_blocks = 1;
  bundle.model.d_a = 16;
  bundle.model.heads = 2;
  bundle.model.ffn_dim = 32;
  bundle.model.conv_kernel = 3;
  bundle.model.cnn_channels = {2, 2};
  bundle.model.d_t = 16;
  bundle.model.dropout = 0.1;
  bundle.cmt.layers = 1;
  bundle.cmt.d_model = 16;
  bundle.cmt.heads = 2;
  bundle.cmt.ffn_dim = 32;
  bundle.cmt.dropout = 0.1;
  const auto corpus = train::LoadCorpus(out.manifest, bundle.stft, 5);

  train::TrainConfig cfg;
  cfg.warmup_steps = 5;
  cfg.max_steps = 12;
  cfg.batch_size = 2;
  cfg.seed = 21;
  auto with_text = cfg;
  with_text.alpha = 1.0;
  auto baseline = cfg;
  baseline.cmkt_enabled = false;

  std::vector<model::ParamStore<float>> a, b;
  train::TrainOptions oa, ob;
  oa.on_step = [&](const train::StepLog &, const model::ParamStore<float> &p) { a.push_back(p.Clone()); };
  ob.on_step = [&](const train::StepLog &, const model::ParamStore<float> &p) { b.push_back(p.Clone()); };
  const auto ra = train::Train(corpus, &archive, bundle, with_text, oa);
  const auto rb = train::Train(corpus, &archive, bundle, baseline, ob);

  // The text branch owns extra tensors; the comparison covers the SE network.
  auto se_only = [](const model::ParamStore<float> &p) {
    model::ParamStore<float> out;
    for (const auto &e : p.entries()) {
      if (e.name.rfind("cmt.", 0) != 0) out.Add(e.name, e.shape, e.var.value());
    }
    return out;
  };
  bool identical = a.size() == b.size() && !a.empty();
  std::size_t first_diff = 0;
  for (std::size_t t = 0; identical && t < a.size(); ++t) {
    if (!StoresBitwiseEqual(se_only(a[t]), se_only(b[t]))) {
      identical = false;
      first_diff = t + 1;
    }
  }
  bool cma_logged = true;
  for (const auto &row : ra.log) cma_logged = cma_logged && row.l_cma.has_value();

  bool averaging_identity = true;
  const auto &store = a.back();
  for (int k : {1, 2, 3, 5, 10}) {
    std::vector<fs::path> paths;
    for (int i = 0; i < k; ++i) {
      paths.push_back(dir.path() / fmt::format("copy{}_{}.cmkp", k, i));
      model::SaveCheckpoint(paths.back(), store);
    }
    averaging_identity = averaging_identity && StoresBitwiseEqual(train::AverageCheckpoints(paths), store);
  }
  Verdict("equivalence suite", identical && cma_logged && averaging_identity,
          fmt::format("alpha=1 vs text branch disabled: {} over {} steps{}; averaging k identical checkpoints "
                      "(k=1,2,3,5,10): {}",
                      identical ? "bitwise identical" : "diverged", a.size(),
                      identical ? "" : fmt::format(" (first difference after step {})", first_diff),
                      averaging_identity ? "identity" : "not identity"));
}

void StoiOracleSuite() {
  const fs::path dir = fs::path(CMKT_TEST_DATA_DIR) / "stoi";
  std::ifstream in(dir / "reference.json");
  if (!in) {
    Verdict("stoi oracle", false, "reference scores missing under " + dir.string());
    return;
  }
  const auto ref = json::parse(in);
  double worst = 0.0;
  std::string where;
  for (const auto &[name, score] : ref.items()) {
    const double ours = eval::Stoi(signal::ReadWav(dir / (name + "_clean.wav")),
                                   signal::ReadWav(dir / (name + "_deg.wav")));
    const double err = std::abs(ours - score.get<double>());
    if (err >= worst) {
      worst = err;
      where = name;
    }
  }
  Verdict("stoi oracle", ref.size() == 20 && worst < kStoiOracleTol,
          fmt::format("{} utterances, max |ours - pystoi| {:.2e} at {} (< {:.0e})", ref.size(), worst, where,
                      kStoiOracleTol));
}

// Shared by the learning, attention and misalignment suites.
struct LearningSetup {
  std::unique_ptr<ScratchDir> dir;
  train::ModelBundle bundle;
  train::TrainConfig cfg;
  transfer::EmbeddingArchive archive;
  std::vector<train::Utterance> corpus;
};

LearningSetup MakeLearningSetup() {
  LearningSetup s;
  s.dir = std::make_unique<ScratchDir>("learn");
  SynthConfig synth;
  synth.n_utts = kCorpusUtts;
  const auto out = GenerateSynth(s.dir->path() / "synth", synth, kCorpusSeed);
  s.archive = transfer::ReadArchive(out.archive);

  std::ifstream in(fs::path(CMKT_CONFIG_DIR) / "tiny.json");
  const auto file = json::parse(in);
  s.bundle.model = file.at("model").get<model::ModelConfig>();
  s.bundle.cmt = file.at("cmt").get<transfer::CmtConfig>();
  s.cfg = file.at("train").get<train::TrainConfig>();
  s.cfg.alpha = kLearningAlpha;
  s.cfg.align_mode = transfer::AlignMode::kLeftShift;
  s.cfg.max_steps = kLearningSteps;
  s.cfg.seed = kTrainSeed;
  s.corpus = train::LoadCorpus(out.manifest, s.bundle.stft, kTrainSeed);
  return s;
}

std::optional<model::ParamStore<float>> LearningSuite(const LearningSetup &s) {
  spdlog::info("learning suite: {} utterances, {} steps", s.corpus.size(), s.cfg.max_steps);
  const auto t0 = Clock::now();
  train::TrainOptions options;
  options.out_dir = s.dir->path() / "run";
  const auto result = train::Train(s.corpus, &s.archive, s.bundle, s.cfg, options);
  const double secs = SecondsSince(t0);

  std::vector<double> totals;
  for (const auto &row : result.log) totals.push_back(row.total);
  if (totals.size() < kReferenceStep || !result.averaged) {
    Verdict("learning suite", false, fmt::format("run stopped after {} steps", totals.size()));
    return std::nullopt;
  }
  const double start = totals[kReferenceStep - 1];
  const double final_loss = MeanTail(totals, kFinalWindow);
  const double reduction = 1.0 - final_loss / start;

  auto params = model::LoadCheckpoint(*result.averaged);
  const auto report = eval::Evaluate(s.corpus, eval::ModelEnhancer(params, s.bundle.model),
                                     {"stoi", "si_sdr", "noisy_stoi", "noisy_si_sdr"});
  const double gain = *report.Mean("si_sdr") - *report.Mean("noisy_si_sdr");
  const double stoi = *report.Mean("stoi"), noisy_stoi = *report.Mean("noisy_stoi");

  const bool ok_loss = reduction >= kLossReduction;
  const bool ok_sdr = gain > kSiSdrGainDb;
  const bool ok_stoi = stoi > noisy_stoi;
  const bool ok_time = secs < kLearningBudgetSeconds;
  Verdict("learning suite", ok_loss && ok_sdr && ok_stoi && ok_time,
          fmt::format("(a) loss {:.4f} at step {} -> {:.4f} (mean of last {}), reduction {:.1f}% (>= {:.0f}%) {}; "
                      "(b) SI-SDR {:.2f} -> {:.2f} dB, gain {:.2f} dB (> {}) {}; "
                      "(c) STOI {:.4f} -> {:.4f} {}; runtime {:.0f} s (< {:.0f} s) {}",
                      start, kReferenceStep, final_loss, kFinalWindow, 100.0 * reduction, 100.0 * kLossReduction,
                      ok_loss ? "ok" : "short", *report.Mean("noisy_si_sdr"), *report.Mean("si_sdr"), gain,
                      kSiSdrGainDb, ok_sdr ? "ok" : "short", noisy_stoi, stoi, ok_stoi ? "ok" : "short", secs,
                      kLearningBudgetSeconds, ok_time ? "ok" : "over"));
  return params;
}

void AttentionSuite(const LearningSetup &s, const model::ParamStore<float> &params) {
  // Inference must not reach the text branch.
  const auto before = transfer::CallCount();
  for (const auto &u : s.corpus) (void)model::EnhanceForward(u.noisy_spec, params, s.bundle.model);
  const std::vector<train::Utterance> few(s.corpus.begin(), s.corpus.begin() + 5);
  (void)eval::Evaluate(few, eval::ModelEnhancer(params, s.bundle.model), {"si_sdr"});
  const auto after_inference = transfer::CallCount();

  // Exported maps, read back from disk.
  const fs::path out = s.dir->path() / "attention";
  double worst = 0.0;
  std::size_t rows = 0;
  int exported = 0;
  for (const auto &u : s.corpus) {
    const auto *rec = s.archive.Find(u.id);
    if (rec == nullptr || rec->ids.empty() || exported == 5) continue;
    const auto att = eval::CaptureCmtAttention(params, s.bundle, s.archive, u.noisy_spec, *rec);
    for (int layer = 0; layer < static_cast<int>(att.weights.size()); ++layer) {
      for (auto reduce : {eval::HeadReduce::kMeanHeads, eval::HeadReduce::kPerHead}) {
        const auto files =
            eval::ExportAttention(att, layer, reduce, out / fmt::format("{}_l{}_{}", u.id, layer, int(reduce)));
        for (const auto &f : files) {
          if (f.extension() != ".csv") continue;
          std::ifstream in(f);
          for (std::string line; std::getline(in, line); ++rows) {
            std::stringstream cells(line);
            double sum = 0.0;
            for (std::string cell; std::getline(cells, cell, ',');) sum += std::stod(cell);
            worst = std::max(worst, std::abs(sum - 1.0));
          }
        }
      }
    }
    ++exported;
  }
  const bool instrumented = transfer::CallCount() > after_inference;
  const bool clean_inference = after_inference == before;
  Verdict("attention suite", worst < kRowSumTol && rows > 0 && clean_inference && instrumented,
          fmt::format("{} exported rows, max |row sum - 1| {:.2e} (< {:.0e}); text-branch calls during inference: "
                      "{}; counter live during capture: {}",
                      rows, worst, kRowSumTol, after_inference - before, instrumented ? "yes" : "no"));
}

void MisalignmentTable(const LearningSetup &s) {
  using transfer::AlignMode;
  struct Cell {
    double cma = 0.0;
    double si_sdr = 0.0;
  };
  std::map<AlignMode, std::vector<Cell>> table;
  bool finite = true;
  for (auto mode : {AlignMode::kAligned, AlignMode::kLeftShift, AlignMode::kRightShift}) {
    for (auto seed : kMisalignSeeds) {
      spdlog::info("misalignment: {} seed {}", transfer::AlignModeName(mode), seed);
      auto cfg = s.cfg;
      cfg.align_mode = mode;
      cfg.max_steps = kMisalignSteps;
      cfg.seed = seed;
      const auto r = train::Train(s.corpus, &s.archive, s.bundle, cfg);
      std::vector<double> cma;
      for (const auto &row : r.log) {
        if (row.l_cma) cma.push_back(*row.l_cma);
      }
      const auto report = eval::Evaluate(s.corpus, eval::ModelEnhancer(r.params, s.bundle.model), {"si_sdr"});
      Cell c{cma.empty() ? std::nan("") : MeanTail(cma, kFinalWindow), *report.Mean("si_sdr")};
      finite = finite && std::isfinite(c.cma) && std::isfinite(c.si_sdr);
      table[mode].push_back(c);
    }
  }
  fmt::print("misalignment table ({} steps, seeds 1-3; final CMA = mean of last {} steps, SI-SDR in dB)\n",
             kMisalignSteps, kFinalWindow);
  fmt::print("  {:<8} {:>8} {:>8} {:>8} {:>9} {:>9} {:>9}\n", "mode", "cma/1", "cma/2", "cma/3", "sisdr/1",
             "sisdr/2", "sisdr/3");
  for (const auto &[mode, cells] : table) {
    fmt::print("  {:<8} {:>8.4f} {:>8.4f} {:>8.4f} {:>9.3f} {:>9.3f} {:>9.3f}\n", transfer::AlignModeName(mode),
               cells[0].cma, cells[1].cma, cells[2].cma, cells[0].si_sdr, cells[1].si_sdr, cells[2].si_sdr);
  }
  Verdict("misalignment table", finite, "3 modes x 3 seeds reported (no threshold)");
}

}  // namespace

int main(int argc, char **argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("acceptance"));
  spdlog::set_pattern("[%l] %v");
  std::set<std::string> only(argv + 1, argv + argc);
  auto wanted = [&](const std::string &name) { return only.empty() || only.count(name) > 0; };
  auto guarded = [&](const std::string &name, const std::function<void()> &fn) {
    if (!wanted(name)) return;
    try {
      fn();
    } catch (const std::exception &e) {
      Verdict(name + " suite", false, std::string("error: ") + e.what());
    }
  };

  guarded("gradient", GradientSuite);
  guarded("dsp", DspSuite);
  guarded("shift-law", ShiftLawSuite);
  guarded("equivalence", EquivalenceSuite);
  guarded("stoi", StoiOracleSuite);
  if (wanted("learning") || wanted("attention") || wanted("misalignment")) {
    std::optional<LearningSetup> setup;
    try {
      setup = MakeLearningSetup();
    } catch (const std::exception &e) {
      Verdict("learning suite", false, std::string("setup error: ") + e.what());
    }
    if (setup) {
      std::optional<model::ParamStore<float>> trained;
      guarded("learning", [&] { trained = LearningSuite(*setup); });
      guarded("attention", [&] {
        if (!trained) {
          trained = model::InitParams<float>(setup->bundle.model, kTrainSeed);
          transfer::InitCmtParams(*trained, setup->bundle.cmt, kTrainSeed,
                                  setup->archive.table ? &*setup->archive.table : nullptr);
        }
        AttentionSuite(*setup, *trained);
      });
      guarded("misalignment", [&] { MisalignmentTable(*setup); });
    }
  }
  return g_failures == 0 ? 0 : 1;
}
