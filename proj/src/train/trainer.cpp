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

#include "cmkt/train/trainer.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>

#include "cmkt/error.hpp"
#include "cmkt/rng.hpp"
#include "cmkt/train/losses.hpp"
#include "cmkt/train/optimizer.hpp"

namespace cmkt::train {
namespace fs = std::filesystem;

namespace {

// Seed streams. SE and CMT dropout draw from separate generators so that
// switching the text branch on or off never perturbs the SE branch.
constexpr std::uint64_t kCmtInitStream = 11;
constexpr std::uint64_t kTableStream = 12;
constexpr std::uint64_t kShuffleStream = 13;
constexpr std::uint64_t kSeDropoutStream = 14;
constexpr std::uint64_t kCmtDropoutStream = 15;

ag::Mat<float> RandomTable(std::uint32_t vocab, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  ag::Mat<float> t(vocab, dim);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(normal(rng));
  return t;
}

std::uint32_t RequiredVocab(const transfer::EmbeddingArchive &archive) {
  std::uint32_t top = std::max(archive.bos_id, archive.eos_id);
  for (const auto &u : archive.utterances) {
    for (auto id : u.ids) top = std::max(top, id);
  }
  return top + 1;
}

std::string CheckpointName(int epoch) { return fmt::format("epoch_{:04d}.cmkp", epoch); }

}  // namespace

void to_json(nlohmann::json &j, const ModelBundle &b) {
  j = nlohmann::json{{"model", b.model},
                     {"cmt", b.cmt},
                     {"stft",
                      {{"win_len", b.stft.win_len},
                       {"hop", b.stft.hop},
                       {"n_fft", b.stft.n_fft},
                       {"log_floor", b.stft.log_floor}}}};
}

void from_json(const nlohmann::json &j, ModelBundle &b) {
  ModelBundle out;
  if (j.contains("model")) out.model = j.at("model").get<model::ModelConfig>();
  if (j.contains("cmt")) out.cmt = j.at("cmt").get<transfer::CmtConfig>();
  if (j.contains("stft")) {
    const auto &s = j.at("stft");
    out.stft.win_len = s.value("win_len", out.stft.win_len);
    out.stft.hop = s.value("hop", out.stft.hop);
    out.stft.n_fft = s.value("n_fft", out.stft.n_fft);
    out.stft.log_floor = s.value("log_floor", out.stft.log_floor);
  }
  b = out;
}

void WriteModelBundle(const fs::path &path, const ModelBundle &b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  out << nlohmann::json(b).dump(2) << '\n';
}

ModelBundle ReadModelBundle(const fs::path &path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kConfig, "cannot open model config " + path.string());
  try {
    return nlohmann::json::parse(in).get<ModelBundle>();
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
}

void WriteMetricsHeader(std::ostream &out) { out << "step,lr,l_mae,l_cma,total\n"; }

void WriteMetricsRow(std::ostream &out, const StepLog &row) {
  out << fmt::format("{},{:.9g},{:.9g},{},{:.9g}\n", row.step, row.lr, row.l_mae,
                     row.l_cma ? fmt::format("{:.9g}", *row.l_cma) : std::string("nan"), row.total);
}

model::ParamStore<float> AverageStores(const std::vector<model::ParamStore<float>> &stores) {
  if (stores.empty()) Fail(ErrorKind::kCheckpoint, "nothing to average");
  const auto &first = stores.front();
  for (const auto &s : stores) {
    if (s.size() != first.size()) Fail(ErrorKind::kCheckpoint, "checkpoints hold different tensor sets");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto &a = s.entries()[i];
      const auto &b = first.entries()[i];
      if (a.name != b.name || a.shape != b.shape) {
        Fail(ErrorKind::kCheckpoint, "tensor mismatch: '" + a.name + "' vs '" + b.name + "'");
      }
    }
  }
  model::ParamStore<float> out;
  std::vector<double> column(stores.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    const auto &entry = first.entries()[i];
    ag::Mat<float> mean(entry.var.rows(), entry.var.cols());
    for (Eigen::Index k = 0; k < mean.size(); ++k) {
      for (std::size_t s = 0; s < stores.size(); ++s) column[s] = stores[s].entries()[i].var.value().data()[k];
      std::sort(column.begin(), column.end());
      double sum = 0.0;
      for (double v : column) sum += v;
      mean.data()[k] = static_cast<float>(sum / static_cast<double>(stores.size()));
    }
    out.Add(entry.name, entry.shape, std::move(mean));
  }
  out.step = first.step;
  return out;
}

model::ParamStore<float> AverageCheckpoints(const std::vector<fs::path> &paths) {
  std::vector<model::ParamStore<float>> stores;
  stores.reserve(paths.size());
  for (const auto &p : paths) stores.push_back(model::LoadCheckpoint(p));
  return AverageStores(stores);
}

TrainResult Train(const std::vector<Utterance> &corpus, const transfer::EmbeddingArchive *archive,
                  const ModelBundle &bundle_in, const TrainConfig &cfg, const TrainOptions &options) {
  cfg.Validate();
  ModelBundle bundle = bundle_in;
  bundle.model.Validate();
  bundle.stft.Validate();
  if (bundle.model.bins != bundle.stft.bins()) {
    Fail(ErrorKind::kConfig, "model bins differ from the STFT bin count");
  }
  if (corpus.empty()) Fail(ErrorKind::kInput, "empty training corpus");

  // Text side setup.
  const bool text_capable = archive != nullptr;
  std::optional<ag::Mat<float>> generated_table;
  if (text_capable) {
    if (static_cast<int>(archive->d_t) != bundle.model.d_t || bundle.cmt.d_model != bundle.model.d_t) {
      Fail(ErrorKind::kConfig, fmt::format("archive d_t {} must equal model d_t {} and cmt d_model {}",
                                           archive->d_t, bundle.model.d_t, bundle.cmt.d_model));
    }
    if (!archive->table) {
      spdlog::warn("archive has no embedding table; using a seeded trainable table");
      generated_table = RandomTable(RequiredVocab(*archive), bundle.model.d_t, DeriveSeed(cfg.seed, {kTableStream}));
      bundle.cmt.train_embedding = true;
    }
  }

  auto store = model::InitParams<float>(bundle.model, cfg.seed);
  const ag::Mat<float> *table_source =
      generated_table ? &*generated_table : (text_capable ? &*archive->table : nullptr);
  if (text_capable) {
    transfer::InitCmtParams(store, bundle.cmt, DeriveSeed(cfg.seed, {kCmtInitStream}), table_source);
  }
  ag::Var<float> table;
  if (text_capable) {
    table = bundle.cmt.train_embedding ? store.Get("cmt.embedding") : ag::Var<float>(*table_source, false);
  }

  // Per-utterance inputs in f32.
  struct Prepared {
    ag::Mat<float> noisy, clean, targets;
    std::optional<transfer::UtteranceRecord> record;
  };
  std::vector<Prepared> data(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto &u = corpus[i];
    if (u.noisy_spec.bins() != bundle.model.bins) Fail(ErrorKind::kShape, "utterance '" + u.id + "': bin count mismatch");
    data[i].noisy = u.noisy_spec.log_amp.cast<float>();
    data[i].clean = u.clean_spec.log_amp.cast<float>();
    if (!text_capable) continue;
    const auto *rec = archive->Find(u.id);
    if (rec == nullptr) {
      if (u.transcript && !u.transcript->empty()) {
        Fail(ErrorKind::kIngest, "utterance '" + u.id + "' has a transcript but no archive record");
      }
      continue;
    }
    data[i].record = transfer::CapTokens(*rec);
    if (data[i].record->has_target) data[i].targets = data[i].record->z_hat;
  }

  BranchSetup setup{bundle.model, bundle.cmt, bundle.stft.log_floor, 0, 1};
  if (text_capable) {
    setup.bos_id = archive->bos_id;
    setup.eos_id = archive->eos_id;
  }

  std::ofstream metrics;
  fs::path ckpt_dir;
  if (!options.out_dir.empty()) {
    ckpt_dir = options.out_dir / "checkpoints";
    std::error_code ec;
    fs::create_directories(ckpt_dir, ec);
    if (ec) Fail(ErrorKind::kIo, "cannot create " + ckpt_dir.string() + ": " + ec.message());
    metrics.open(options.out_dir / "metrics.csv", std::ios::binary);
    if (!metrics) Fail(ErrorKind::kIo, "cannot write metrics.csv");
    WriteMetricsHeader(metrics);
    WriteModelBundle(options.out_dir / "model.json", bundle);
  }

  auto opt = AdamState<float>::ForStore(store);
  TrainResult result;
  std::deque<fs::path> retained;
  const double alpha = cfg.cmkt_enabled ? cfg.alpha : 1.0;
  const bool with_text = cfg.cmkt_enabled && text_capable;
  const auto n = corpus.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::int64_t step = 0;
  bool done = false;

  for (int epoch = 1; epoch <= cfg.epochs && !done; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(DeriveSeed(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);

    for (std::size_t start = 0; start < n && !done; start += batch) {
      ++step;
      const double lr = LrAt(step, cfg);
      std::mt19937_64 se_rng(DeriveSeed(cfg.seed, {kSeDropoutStream, static_cast<std::uint64_t>(step)}));
      std::mt19937_64 cmt_rng(DeriveSeed(cfg.seed, {kCmtDropoutStream, static_cast<std::uint64_t>(step)}));
      model::RunContext<float> se_ctx{true, &se_rng, bundle.model.dropout, nullptr};
      model::RunContext<float> cmt_ctx{true, &cmt_rng, bundle.cmt.dropout, nullptr};

      store.ZeroGrad();
      std::vector<UtteranceTerms<float>> terms;
      for (std::size_t k = start; k < std::min(n, start + batch); ++k) {
        const auto &d = data[order[k]];
        UtteranceInput<float> input{&d.noisy, &d.clean, d.record ? &*d.record : nullptr, &d.targets};
        terms.push_back(ScoreUtterance(store, setup, table, input, cfg.align_mode, with_text, se_ctx, cmt_ctx));
      }
      const auto objective = BatchObjective(terms, alpha, cfg.scale_text_free);
      ag::Backward(objective);
      if (!std::isfinite(static_cast<double>(objective.item()))) {
        Fail(ErrorKind::kNumerics, fmt::format("non-finite loss at step {}", step));
      }
      AdamStep(store, opt, lr, cfg.grad_clip);

      StepLog row;
      row.step = step;
      row.lr = lr;
      double abs_sum = 0.0, bins = 0.0, cma_sum = 0.0;
      int cma_count = 0;
      for (const auto &t : terms) {
        abs_sum += t.abs_sum.item();
        bins += t.bins;
        if (t.cma.defined()) {
          cma_sum += t.cma.item();
          ++cma_count;
        }
      }
      row.l_mae = abs_sum / bins;
      if (cma_count > 0) row.l_cma = cma_sum / cma_count;
      row.total = objective.item();
      result.log.push_back(row);
      if (metrics.is_open()) {
        WriteMetricsRow(metrics, row);
        metrics.flush();
      }
      if (options.on_step) options.on_step(row, store);
      if (cfg.max_steps > 0 && step >= cfg.max_steps) done = true;
    }

    if (!ckpt_dir.empty()) {
      const auto path = ckpt_dir / CheckpointName(epoch);
      model::SaveCheckpoint(path, store);
      retained.push_back(path);
      while (!cfg.keep_all_checkpoints && retained.size() > static_cast<std::size_t>(cfg.avg_last_k)) {
        std::error_code ec;
        fs::remove(retained.front(), ec);
        retained.pop_front();
      }
      spdlog::info("epoch {} done at step {}, loss {:.5f}", epoch, step, result.log.back().total);
    }
  }

  if (!ckpt_dir.empty()) {
    std::vector<fs::path> last(retained.begin(), retained.end());
    if (last.size() > static_cast<std::size_t>(cfg.avg_last_k)) {
      last.erase(last.begin(), last.end() - cfg.avg_last_k);
    }
    const auto averaged = AverageCheckpoints(last);
    result.averaged = options.out_dir / "averaged.cmkp";
    model::SaveCheckpoint(*result.averaged, averaged);
    result.checkpoints.assign(retained.begin(), retained.end());
  }
  result.params = std::move(store);
  return result;
}

}  // namespace cmkt::train
