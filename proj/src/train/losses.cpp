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

#include "cmkt/train/losses.hpp"

#include <cmath>

#include "cmkt/error.hpp"

namespace cmkt::train {

void TrainConfig::Validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) Fail(ErrorKind::kConfig, "alpha must be in [0, 1]");
  if (!(lr_peak > 0.0)) Fail(ErrorKind::kConfig, "lr_peak must be positive");
  if (warmup_steps < 1) Fail(ErrorKind::kConfig, "warmup_steps must be >= 1");
  if (epochs < 1) Fail(ErrorKind::kConfig, "epochs must be >= 1");
  if (avg_last_k < 1) Fail(ErrorKind::kConfig, "avg_last_k must be >= 1");
  if (batch_size < 1) Fail(ErrorKind::kConfig, "batch_size must be >= 1");
  if (!(grad_clip > 0.0)) Fail(ErrorKind::kConfig, "grad_clip must be positive");
  if (max_steps < 0) Fail(ErrorKind::kConfig, "max_steps must be >= 0");
}

void to_json(nlohmann::json &j, const TrainConfig &cfg) {
  j = nlohmann::json{{"alpha", cfg.alpha},
                     {"lr_peak", cfg.lr_peak},
                     {"warmup_steps", cfg.warmup_steps},
                     {"epochs", cfg.epochs},
                     {"avg_last_k", cfg.avg_last_k},
                     {"align_mode", transfer::AlignModeName(cfg.align_mode)},
                     {"batch_size", cfg.batch_size},
                     {"seed", cfg.seed},
                     {"grad_clip", cfg.grad_clip},
                     {"max_steps", cfg.max_steps},
                     {"cmkt_enabled", cfg.cmkt_enabled},
                     {"scale_text_free", cfg.scale_text_free},
                     {"keep_all_checkpoints", cfg.keep_all_checkpoints}};
}

void from_json(const nlohmann::json &j, TrainConfig &cfg) {
  TrainConfig out;
  out.alpha = j.value("alpha", out.alpha);
  out.lr_peak = j.value("lr_peak", out.lr_peak);
  out.warmup_steps = j.value("warmup_steps", out.warmup_steps);
  out.epochs = j.value("epochs", out.epochs);
  out.avg_last_k = j.value("avg_last_k", out.avg_last_k);
  if (j.contains("align_mode")) out.align_mode = transfer::ParseAlignMode(j.at("align_mode"));
  out.batch_size = j.value("batch_size", out.batch_size);
  out.seed = j.value("seed", out.seed);
  out.grad_clip = j.value("grad_clip", out.grad_clip);
  out.max_steps = j.value("max_steps", out.max_steps);
  out.cmkt_enabled = j.value("cmkt_enabled", out.cmkt_enabled);
  out.scale_text_free = j.value("scale_text_free", out.scale_text_free);
  out.keep_all_checkpoints = j.value("keep_all_checkpoints", out.keep_all_checkpoints);
  cfg = out;
}

double MaeLoss(const signal::Spectrogram &enhanced, const signal::Spectrogram &clean,
               const std::vector<char> &frame_mask) {
  if (enhanced.log_amp.rows() != clean.log_amp.rows() || enhanced.log_amp.cols() != clean.log_amp.cols()) {
    Fail(ErrorKind::kShape, "enhanced and clean spectrograms differ in shape");
  }
  if (!frame_mask.empty() && static_cast<Eigen::Index>(frame_mask.size()) != clean.log_amp.rows()) {
    Fail(ErrorKind::kShape, "frame mask length does not match frame count");
  }
  double sum = 0.0;
  Eigen::Index rows = 0;
  for (Eigen::Index t = 0; t < clean.log_amp.rows(); ++t) {
    if (!frame_mask.empty() && !frame_mask[t]) continue;
    sum += (enhanced.log_amp.row(t) - clean.log_amp.row(t)).cwiseAbs().sum();
    ++rows;
  }
  if (rows == 0) return 0.0;
  return sum / static_cast<double>(rows * clean.log_amp.cols());
}

double TotalLoss(double l_mae, std::optional<double> l_cma, double alpha, bool scale_text_free) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) Fail(ErrorKind::kConfig, "alpha must be in [0, 1]");
  if (!l_cma) return scale_text_free ? alpha * l_mae : l_mae;
  return alpha * l_mae + (1.0 - alpha) * *l_cma;
}

double LrAt(std::int64_t step, const TrainConfig &cfg) {
  if (step < 1) Fail(ErrorKind::kConfig, "learning-rate step must be >= 1");
  const auto s = static_cast<double>(step);
  const auto w = static_cast<double>(cfg.warmup_steps);
  if (step <= cfg.warmup_steps) return cfg.lr_peak * s / w;
  return cfg.lr_peak * std::sqrt(w / s);
}

template <typename T>
UtteranceTerms<T> ScoreUtterance(const model::ParamStore<T> &store, const BranchSetup &setup,
                                 const ag::Var<T> &table, const UtteranceInput<T> &input,
                                 transfer::AlignMode mode, bool with_text,
                                 const model::RunContext<T> &se_ctx,
                                 const model::RunContext<T> &cmt_ctx) {
  UtteranceTerms<T> out;
  out.acoustic = model::ForwardAcoustic(store, setup.model, *input.noisy_log_amp, se_ctx);
  const auto enhanced = ag::MaskLogAmplitude(out.acoustic.mask, *input.noisy_log_amp,
                                             static_cast<T>(std::log(setup.log_floor)),
                                             setup.model.mask_domain == signal::MaskDomain::kLog);
  out.abs_sum = ag::SumAbsDiff(enhanced, *input.clean_log_amp, {});
  out.bins = static_cast<double>(input.clean_log_amp->size());

  const auto *rec = input.record;
  if (with_text && rec != nullptr && rec->has_target && !rec->ids.empty()) {
    transfer::TokenSequence tokens{rec->ids, setup.bos_id, setup.eos_id};
    const auto queries = transfer::BuildTextQueries(tokens, table);
    out.cross_modal = transfer::CmtForward(queries, out.acoustic.e_a, store, setup.cmt, cmt_ctx);
    const auto [selected, targets] = transfer::ShiftPairs(out.cross_modal, *input.targets, mode);
    out.cma = transfer::CmaLoss(selected, targets);
  }
  return out;
}

template <typename T>
ag::Var<T> BatchObjective(const std::vector<UtteranceTerms<T>> &terms, double alpha, bool scale_text_free) {
  if (terms.empty()) Fail(ErrorKind::kInput, "empty batch");
  double bins = 0.0;
  for (const auto &t : terms) bins += t.bins;
  ag::Var<T> mae_part;
  for (const auto &t : terms) {
    const double w = (t.cma.defined() || scale_text_free) ? alpha : 1.0;
    auto term = ag::Scale(t.abs_sum, static_cast<T>(w / bins));
    mae_part = mae_part.defined() ? ag::Add(mae_part, term) : term;
  }
  ag::Var<T> cma_part;
  for (const auto &t : terms) {
    if (!t.cma.defined()) continue;
    cma_part = cma_part.defined() ? ag::Add(cma_part, t.cma) : t.cma;
  }
  if (!cma_part.defined()) return mae_part;
  const auto weight = static_cast<T>((1.0 - alpha) / static_cast<double>(terms.size()));
  return ag::Add(mae_part, ag::Scale(cma_part, weight));
}

#define CMKT_INSTANTIATE_LOSSES(T)                                                                   \
  template UtteranceTerms<T> ScoreUtterance<T>(const model::ParamStore<T> &, const BranchSetup &,    \
                                               const ag::Var<T> &, const UtteranceInput<T> &,        \
                                               transfer::AlignMode, bool,                            \
                                               const model::RunContext<T> &,                         \
                                               const model::RunContext<T> &);                        \
  template ag::Var<T> BatchObjective<T>(const std::vector<UtteranceTerms<T>> &, double, bool);

CMKT_INSTANTIATE_LOSSES(float)
CMKT_INSTANTIATE_LOSSES(double)

}  // namespace cmkt::train
