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

#pragma once

#include <optional>
#include <vector>

#include "cmkt/model/config.hpp"
#include "cmkt/model/se_model.hpp"
#include "cmkt/signal/stft.hpp"
#include "cmkt/train/config.hpp"
#include "cmkt/transfer/cmt.hpp"

namespace cmkt::train {

/// Mean |enhanced - clean| of log amplitudes over frames whose mask entry is
/// nonzero (all frames when frame_mask is empty).
double MaeLoss(const signal::Spectrogram &enhanced, const signal::Spectrogram &clean,
               const std::vector<char> &frame_mask = {});

/// alpha * l_mae + (1 - alpha) * l_cma, or alpha * l_mae when there is no
/// text (plain l_mae when scale_text_free is false).
double TotalLoss(double l_mae, std::optional<double> l_cma, double alpha, bool scale_text_free = true);

/// Linear warmup to lr_peak over warmup_steps, then lr_peak*sqrt(warmup/step).
double LrAt(std::int64_t step, const TrainConfig &cfg);

/// Everything needed to score one utterance in graph form.
template <typename T>
struct UtteranceInput {
  const ag::Mat<T> *noisy_log_amp = nullptr;
  const ag::Mat<T> *clean_log_amp = nullptr;
  /// Null, or a record with has_target == false or no tokens, means text-free.
  const transfer::UtteranceRecord *record = nullptr;
  /// Targets already converted to T (rows == record->ids.size()).
  const ag::Mat<T> *targets = nullptr;
};

template <typename T>
struct UtteranceTerms {
  ag::Var<T> abs_sum;      // sum |enhanced - clean| over the spectrogram
  double bins = 0;         // number of TF bins in abs_sum
  ag::Var<T> cma;          // undefined when the text branch did not run
  model::AcousticState<T> acoustic;
  ag::Var<T> cross_modal;  // Z, when the text branch ran
};

struct BranchSetup {
  model::ModelConfig model;
  transfer::CmtConfig cmt;
  double log_floor = 1e-5;
  std::uint32_t bos_id = 0;
  std::uint32_t eos_id = 1;
};

/// Forward pass of both branches for one utterance. The text branch runs only
/// if `with_text` and the utterance carries usable targets.
template <typename T>
UtteranceTerms<T> ScoreUtterance(const model::ParamStore<T> &store, const BranchSetup &setup,
                                 const ag::Var<T> &table, const UtteranceInput<T> &input,
                                 transfer::AlignMode mode, bool with_text,
                                 const model::RunContext<T> &se_ctx,
                                 const model::RunContext<T> &cmt_ctx);

/// Combines per-utterance terms into the batch objective:
///   sum_u w_u * abs_sum_u / sum_u bins_u + (1 - alpha) / B * sum_u cma_u
/// with w_u = alpha, or 1 for text-free utterances when !scale_text_free.
template <typename T>
ag::Var<T> BatchObjective(const std::vector<UtteranceTerms<T>> &terms, double alpha, bool scale_text_free);

}  // namespace cmkt::train
