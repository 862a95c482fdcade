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

#include "cmkt/eval/evaluate.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>

#include "cmkt/error.hpp"
#include "cmkt/eval/metrics.hpp"
#include "cmkt/eval/stoi.hpp"
#include "cmkt/model/se_model.hpp"
#include "cmkt/signal/export.hpp"

namespace cmkt::eval {
namespace fs = std::filesystem;

Bucket BucketFor(double snr_db) {
  if (snr_db >= 5.0) return Bucket::kHigh;
  if (snr_db >= -5.0) return Bucket::kMedium;
  return Bucket::kLow;
}

std::string BucketName(Bucket b) {
  switch (b) {
    case Bucket::kHigh: return "high";
    case Bucket::kMedium: return "medium";
    case Bucket::kLow: return "low";
  }
  return "high";
}

const std::vector<std::string> &KnownMetrics() {
  static const std::vector<std::string> names{"stoi", "si_sdr", "noisy_stoi", "noisy_si_sdr", "pesq", "vqscore"};
  return names;
}

const std::vector<std::string> &DefaultMetrics() {
  static const std::vector<std::string> names{"stoi", "si_sdr", "noisy_stoi", "noisy_si_sdr"};
  return names;
}

std::optional<double> MetricReport::Mean(const std::string &metric, std::optional<Bucket> bucket) const {
  double sum = 0.0;
  int count = 0;
  for (const auto &r : rows) {
    if (r.metric != metric || !r.value) continue;
    if (bucket && r.bucket != *bucket) continue;
    sum += *r.value;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

std::vector<std::string> MetricReport::Metrics() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto &r : rows) {
    if (seen.insert(r.metric).second) out.push_back(r.metric);
  }
  return out;
}

void MetricReport::WriteCsv(const fs::path &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write report " + path.string());
  auto value = [](const std::optional<double> &v) { return v ? fmt::format("{:.9g}", *v) : std::string("NA"); };
  out << "utt_id,snr_db,bucket,metric,value\n";
  for (const auto &r : rows) {
    out << fmt::format("{},{:.6g},{},{},{}\n", r.utt_id, r.snr_db, BucketName(r.bucket), r.metric, value(r.value));
  }
  for (const auto &metric : Metrics()) {
    for (auto b : {Bucket::kHigh, Bucket::kMedium, Bucket::kLow}) {
      out << fmt::format("mean,,{},{},{}\n", BucketName(b), metric, value(Mean(metric, b)));
    }
    out << fmt::format("mean,,all,{},{}\n", metric, value(Mean(metric)));
  }
  if (!out) Fail(ErrorKind::kIo, "failed writing report " + path.string());
}

Enhancer ModelEnhancer(const model::ParamStore<float> &params, const model::ModelConfig &cfg) {
  return [&params, cfg](const signal::Spectrogram &noisy) {
    return model::EnhanceForward(noisy, params, cfg).enhanced;
  };
}

Enhancer IdentityEnhancer() {
  return [](const signal::Spectrogram &noisy) { return noisy; };
}

MetricReport Evaluate(const std::vector<train::Utterance> &corpus, const Enhancer &enhancer,
                      const std::vector<std::string> &metrics) {
  for (const auto &m : metrics) {
    const auto &known = KnownMetrics();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      Fail(ErrorKind::kConfig, "unknown metric '" + m + "'");
    }
  }
  MetricReport report;
  for (const auto &u : corpus) {
    const auto enhanced = signal::Resynthesize(enhancer(u.noisy_spec), u.noisy.sample_rate);
    const auto noisy = signal::Resynthesize(u.noisy_spec, u.noisy.sample_rate);
    signal::Waveform clean = u.clean;
    clean.samples.resize(enhanced.size());

    for (const auto &m : metrics) {
      MetricRow row{u.id, u.snr_db, BucketFor(u.snr_db), m, std::nullopt};
      if (m == "stoi") row.value = Stoi(clean, enhanced);
      if (m == "noisy_stoi") row.value = Stoi(clean, noisy);
      if (m == "si_sdr") row.value = SiSdr(clean.samples, enhanced.samples);
      if (m == "noisy_si_sdr") row.value = SiSdr(clean.samples, noisy.samples);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

transfer::CmtAttention CaptureCmtAttention(const model::ParamStore<float> &params, const train::ModelBundle &bundle,
                                           const transfer::EmbeddingArchive &archive,
                                           const signal::Spectrogram &noisy,
                                           const transfer::UtteranceRecord &record) {
  ag::NoGradGuard guard;
  const model::RunContext<float> ctx{};
  const ag::Mat<float> log_amp = noisy.log_amp.cast<float>();
  const auto state = model::ForwardAcoustic(params, bundle.model, log_amp, ctx);
  ag::Var<float> table;
  if (params.Contains("cmt.embedding")) {
    table = params.Get("cmt.embedding");
  } else if (archive.table) {
    table = ag::Var<float>(*archive.table, false);
  } else {
    Fail(ErrorKind::kConfig, "no embedding table in checkpoint or archive");
  }
  const auto capped = transfer::CapTokens(record);
  const transfer::TokenSequence tokens{capped.ids, archive.bos_id, archive.eos_id};
  transfer::CmtAttention attention;
  transfer::CmtForward(transfer::BuildTextQueries(tokens, table), state.e_a, params, bundle.cmt, ctx, &attention);
  return attention;
}

std::vector<fs::path> ExportAttention(const transfer::CmtAttention &attention, int layer, HeadReduce reduce,
                                      const fs::path &prefix) {
  const int layers = static_cast<int>(attention.weights.size());
  const int index = layer < 0 ? layers + layer : layer;
  if (index < 0 || index >= layers) Fail(ErrorKind::kConfig, fmt::format("attention layer {} out of range", layer));
  const auto &heads = attention.weights[index];
  if (heads.empty()) Fail(ErrorKind::kInput, "no attention maps captured");

  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  std::vector<fs::path> written;
  auto emit = [&](const signal::RealMatrix &m, const std::string &suffix) {
    const fs::path csv = prefix.string() + suffix + ".csv";
    const fs::path pgm = prefix.string() + suffix + ".pgm";
    signal::WriteMatrixCsv(csv, m);
    signal::WritePgm(pgm, m);
    written.push_back(csv);
    written.push_back(pgm);
  };
  if (reduce == HeadReduce::kMeanHeads) {
    signal::RealMatrix mean = signal::RealMatrix::Zero(heads[0].rows(), heads[0].cols());
    for (const auto &h : heads) mean += h;
    mean /= static_cast<double>(heads.size());
    emit(mean, "");
  } else {
    for (std::size_t h = 0; h < heads.size(); ++h) emit(heads[h], fmt::format("_head{}", h));
  }
  return written;
}

}  // namespace cmkt::eval
