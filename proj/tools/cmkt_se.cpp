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

// Command-line driver. Data and output paths go to stdout; logs, the
// resolved configuration and errors go to stderr.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cmkt/error.hpp"
#include "cmkt/eval/evaluate.hpp"
#include "cmkt/model/se_model.hpp"
#include "cmkt/signal/audio.hpp"
#include "cmkt/signal/export.hpp"
#include "cmkt/synth.hpp"
#include "cmkt/train/data.hpp"
#include "cmkt/train/grad_check.hpp"
#include "cmkt/train/trainer.hpp"
#include "cmkt/transfer/archive.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  CLI::Option *seed_opt = nullptr;
};

json LoadJsonFile(const std::string &path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) cmkt::Fail(cmkt::ErrorKind::kConfig, "cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    cmkt::Fail(cmkt::ErrorKind::kConfig, path + ": " + e.what());
  }
}

// Seed precedence: flag, then file "seed", then 0.
std::uint64_t ResolveSeed(const Common &c, const json &file) {
  if (c.seed_opt && c.seed_opt->count() > 0) return c.seed;
  if (file.contains("seed")) return file.at("seed").get<std::uint64_t>();
  if (file.contains("train") && file["train"].contains("seed")) return file["train"]["seed"].get<std::uint64_t>();
  return 0;
}

void Echo(const std::string &what, const json &resolved) {
  spdlog::info("resolved {} config: {}", what, resolved.dump());
}

// Model flags shared by train, enhance, evaluate.
struct ModelFlags {
  std::string arch;
  std::string mask_domain;
  CLI::Option *arch_opt = nullptr;
  CLI::Option *mask_opt = nullptr;

  void Register(CLI::App *app) {
    arch_opt = app->add_option("--arch", arch, "SE-block kind")
                   ->check(CLI::IsMember({"conformer", "transformer", "blstm"}))
                   ->default_str("conformer");
    mask_opt = app->add_option("--mask-domain", mask_domain, "Mask application domain")
                   ->check(CLI::IsMember({"magnitude", "log"}))
                   ->default_str("magnitude");
  }

  void Apply(cmkt::model::ModelConfig &m, const json &model_json) const {
    if (arch_opt->count() > 0) {
      const auto kind = cmkt::model::ParseBlockKind(arch);
      m.block = kind;
      if (!model_json.contains("n_blocks")) m.n_blocks = cmkt::model::ModelConfig::ForKind(kind).n_blocks;
    }
    if (mask_opt->count() > 0) m.mask_domain = cmkt::model::ParseMaskDomain(mask_domain);
  }
};

cmkt::train::ModelBundle BundleFromJson(const json &file) {
  cmkt::train::ModelBundle b;
  b = file.get<cmkt::train::ModelBundle>();
  const bool has_cmt_width = file.contains("cmt") && file["cmt"].contains("d_model");
  if (!has_cmt_width) b.cmt.d_model = b.model.d_t;
  return b;
}

fs::path DefaultModelJson(const std::string &checkpoint) {
  fs::path p(checkpoint);
  fs::path dir = p.parent_path();
  if (fs::exists(dir / "model.json")) return dir / "model.json";
  if (fs::exists(dir.parent_path() / "model.json")) return dir.parent_path() / "model.json";
  return dir / "model.json";
}

int RunGenSynth(const Common &common, const std::string &out, cmkt::SynthConfig cfg, const CLI::App &app) {
  const json file = LoadJsonFile(common.config);
  const json section = file.value("synth", json::object());
  auto take = [&](const char *flag, const char *key, auto &field) {
    if (app.get_option(flag)->count() == 0 && section.contains(key)) field = section.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("--n-utts", "n_utts", cfg.n_utts);
  take("--vocab", "vocab", cfg.vocab);
  take("--d-t", "d_t", cfg.d_t);
  take("--text-free-fraction", "text_free_fraction", cfg.text_free_fraction);
  take("--target-noise", "target_noise", cfg.target_noise);
  const auto seed = ResolveSeed(common, file);
  Echo("gen-synth", json{{"out", out},
                         {"seed", seed},
                         {"n_utts", cfg.n_utts},
                         {"vocab", cfg.vocab},
                         {"d_t", cfg.d_t},
                         {"text_free_fraction", cfg.text_free_fraction},
                         {"target_noise", cfg.target_noise}});
  const auto result = cmkt::GenerateSynth(out, cfg, seed);
  std::cout << result.manifest.string() << '\n' << result.archive.string() << '\n';
  return 0;
}

int RunPrepare(const Common &common, const std::string &manifest, const std::string &out) {
  const json file = LoadJsonFile(common.config);
  const auto seed = ResolveSeed(common, file);
  Echo("prepare-data", json{{"manifest", manifest}, {"out", out}, {"seed", seed}});
  cmkt::train::PrepareData(manifest, out, seed);
  std::cout << (fs::path(out) / "manifest.jsonl").string() << '\n';
  return 0;
}

struct TrainFlags {
  std::string manifest, archive, out;
  std::string align;
  double alpha = 0.7;
  double lr = 1e-3;
  std::int64_t warmup = 20000, max_steps = 0;
  int epochs = 130, batch = 8, avg_k = 10;
  bool no_cmkt = false, unscaled_text_free = false, keep_all = false;
  ModelFlags model;
};

int RunTrain(const Common &common, const TrainFlags &f, const CLI::App &app) {
  const json file = LoadJsonFile(common.config);
  auto bundle = BundleFromJson(file);
  f.model.Apply(bundle.model, file.value("model", json::object()));

  std::optional<cmkt::transfer::EmbeddingArchive> archive;
  if (!f.archive.empty()) {
    archive = cmkt::transfer::ReadArchive(f.archive);
    const bool has_dt = file.contains("model") && file["model"].contains("d_t");
    if (!has_dt) {
      bundle.model.d_t = static_cast<int>(archive->d_t);
      if (!(file.contains("cmt") && file["cmt"].contains("d_model"))) bundle.cmt.d_model = bundle.model.d_t;
    }
  }

  auto cfg = file.value("train", json::object()).get<cmkt::train::TrainConfig>();
  cfg.seed = ResolveSeed(common, file);
  auto given = [&](const char *flag) { return app.get_option(flag)->count() > 0; };
  if (given("--align")) cfg.align_mode = cmkt::transfer::ParseAlignMode(f.align);
  if (given("--alpha")) cfg.alpha = f.alpha;
  if (given("--lr")) cfg.lr_peak = f.lr;
  if (given("--warmup-steps")) cfg.warmup_steps = f.warmup;
  if (given("--max-steps")) cfg.max_steps = f.max_steps;
  if (given("--epochs")) cfg.epochs = f.epochs;
  if (given("--batch-size")) cfg.batch_size = f.batch;
  if (given("--avg-last-k")) cfg.avg_last_k = f.avg_k;
  if (f.no_cmkt) cfg.cmkt_enabled = false;
  if (f.unscaled_text_free) cfg.scale_text_free = false;
  if (f.keep_all) cfg.keep_all_checkpoints = true;
  cfg.Validate();

  json resolved = bundle;
  resolved["train"] = cfg;
  resolved["manifest"] = f.manifest;
  resolved["archive"] = f.archive;
  resolved["out"] = f.out;
  Echo("train", resolved);

  const auto corpus = cmkt::train::LoadCorpus(f.manifest, bundle.stft, cfg.seed);
  cmkt::train::TrainOptions options;
  options.out_dir = f.out;
  const auto result = cmkt::train::Train(corpus, archive ? &*archive : nullptr, bundle, cfg, options);
  std::cout << (fs::path(f.out) / "metrics.csv").string() << '\n';
  if (result.averaged) std::cout << result.averaged->string() << '\n';
  return 0;
}

struct LoadedModel {
  cmkt::train::ModelBundle bundle;
  cmkt::model::ParamStore<float> params;
};

LoadedModel LoadModel(const std::string &checkpoint, const std::string &model_json, const ModelFlags &flags) {
  LoadedModel m;
  const fs::path cfg_path = model_json.empty() ? DefaultModelJson(checkpoint) : fs::path(model_json);
  m.bundle = cmkt::train::ReadModelBundle(cfg_path);
  json raw = m.bundle;
  flags.Apply(m.bundle.model, raw["model"]);
  m.params = cmkt::model::LoadCheckpoint(checkpoint);
  return m;
}

int RunEnhance(const Common &, const std::string &checkpoint, const std::string &model_json,
               const std::string &input, const std::string &output, const ModelFlags &flags) {
  const auto m = LoadModel(checkpoint, model_json, flags);
  json resolved = m.bundle;
  resolved["checkpoint"] = checkpoint;
  Echo("enhance", resolved);
  const auto wave = cmkt::signal::ReadWav(input);
  const auto spec = cmkt::signal::Stft(wave, m.bundle.stft);
  const auto result = cmkt::model::EnhanceForward(spec, m.params, m.bundle.model);
  cmkt::signal::WriteWav(output, cmkt::signal::Resynthesize(result.enhanced, wave.sample_rate));
  std::cout << output << '\n';
  return 0;
}

int RunEvaluate(const Common &common, const std::string &manifest, const std::string &checkpoint,
                const std::string &model_json, std::vector<std::string> metrics, const std::string &report,
                bool identity, const ModelFlags &flags) {
  const json file = LoadJsonFile(common.config);
  const auto seed = ResolveSeed(common, file);
  if (metrics.empty()) metrics = cmkt::eval::DefaultMetrics();
  std::optional<LoadedModel> m;
  cmkt::signal::StftConfig stft;
  if (!identity) {
    if (checkpoint.empty()) cmkt::Fail(cmkt::ErrorKind::kConfig, "--checkpoint is required unless --identity");
    m = LoadModel(checkpoint, model_json, flags);
    stft = m->bundle.stft;
  }
  json resolved{{"manifest", manifest}, {"checkpoint", checkpoint}, {"metrics", metrics},
                {"report", report},     {"seed", seed},             {"identity", identity}};
  if (m) resolved["model"] = m->bundle;
  Echo("evaluate", resolved);
  const auto corpus = cmkt::train::LoadCorpus(manifest, stft, seed);
  const auto enhancer =
      identity ? cmkt::eval::IdentityEnhancer() : cmkt::eval::ModelEnhancer(m->params, m->bundle.model);
  const auto result = cmkt::eval::Evaluate(corpus, enhancer, metrics);
  result.WriteCsv(report);
  for (const auto &metric : result.Metrics()) {
    if (const auto mean = result.Mean(metric)) spdlog::info("{} mean {:.4f}", metric, *mean);
  }
  std::cout << report << '\n';
  return 0;
}

int RunExportAttention(const Common &common, const std::string &manifest, const std::string &archive_path,
                       const std::string &checkpoint, const std::string &model_json, const std::string &utt,
                       int layer, const std::string &reduce, const std::string &out, const ModelFlags &flags) {
  const json file = LoadJsonFile(common.config);
  const auto seed = ResolveSeed(common, file);
  const auto m = LoadModel(checkpoint, model_json, flags);
  Echo("export-attention", json{{"manifest", manifest}, {"archive", archive_path}, {"checkpoint", checkpoint},
                                {"utt", utt}, {"layer", layer}, {"reduce", reduce}, {"out", out}, {"seed", seed}});
  const auto archive = cmkt::transfer::ReadArchive(archive_path);
  const auto corpus = cmkt::train::LoadCorpus(manifest, m.bundle.stft, seed);
  const cmkt::train::Utterance *target = nullptr;
  for (const auto &u : corpus) {
    if (utt.empty() || u.id == utt) {
      const auto *rec = archive.Find(u.id);
      if (rec && !rec->ids.empty()) {
        target = &u;
        break;
      }
    }
  }
  if (target == nullptr) cmkt::Fail(cmkt::ErrorKind::kInput, "no utterance with tokens matches '" + utt + "'");
  const auto attention = cmkt::eval::CaptureCmtAttention(m.params, m.bundle, archive, target->noisy_spec,
                                                         *archive.Find(target->id));
  const auto mode = reduce == "per-head" ? cmkt::eval::HeadReduce::kPerHead : cmkt::eval::HeadReduce::kMeanHeads;
  for (const auto &p : cmkt::eval::ExportAttention(attention, layer, mode, out)) std::cout << p.string() << '\n';
  spdlog::info("attention axes: x = speech frames, y = text tokens [BOS, tokens..., EOS]");
  return 0;
}

int RunGradCheck(const Common &common, const std::string &arch, const std::string &loss) {
  const json file = LoadJsonFile(common.config);
  const auto seed = ResolveSeed(common, file);
  Echo("grad-check", json{{"arch", arch}, {"loss", loss}, {"seed", seed}});
  const auto report = cmkt::train::GradCheck(cmkt::model::ParseBlockKind(arch),
                                             cmkt::train::ParseLossSelector(loss), seed);
  std::cout << fmt::format("max_rel_err={:.3e} worst={} checked={}\n", report.max_rel_err, report.worst_param,
                           report.checked);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("cmkt"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Cross-modality knowledge transfer speech enhancement"};
  app.require_subcommand(1, 1);
  Common common;
  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--config", common.config, "JSON config file (flags override it)");
    common.seed_opt = nullptr;
    auto *opt = sub->add_option("--seed", common.seed, "Seed for all randomness")->capture_default_str();
    return opt;
  };

  // gen-synth
  auto *gen = app.add_subcommand("gen-synth", "Generate a synthetic corpus, manifest and embedding archive");
  auto *gen_seed = add_common(gen);
  std::string gen_out;
  cmkt::SynthConfig synth;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--n-utts", synth.n_utts, "Number of utterances")->capture_default_str();
  gen->add_option("--vocab", synth.vocab, "Vocabulary size including bos/eos")->capture_default_str();
  gen->add_option("--d-t", synth.d_t, "Target embedding width")->capture_default_str();
  gen->add_option("--text-free-fraction", synth.text_free_fraction, "Share of utterances without targets")
      ->capture_default_str();
  gen->add_option("--target-noise", synth.target_noise, "Target noise standard deviation")->capture_default_str();

  // prepare-data
  auto *prep = app.add_subcommand("prepare-data", "Mix noise into clean speech and write a premixed manifest");
  auto *prep_seed = add_common(prep);
  std::string prep_manifest, prep_out;
  prep->add_option("--manifest", prep_manifest, "Input manifest (JSON lines)")->required();
  prep->add_option("--out", prep_out, "Output directory")->required();

  // train
  auto *train = app.add_subcommand("train", "Train the enhancement network");
  auto *train_seed = add_common(train);
  TrainFlags tf;
  train->add_option("--manifest", tf.manifest, "Training manifest")->required();
  train->add_option("--archive", tf.archive, "Embedding archive (omit for SE-only training)");
  train->add_option("--out", tf.out, "Run directory")->required();
  train->add_option("--align", tf.align, "Loss pairing")
      ->check(CLI::IsMember({"aligned", "left", "right"}))
      ->default_str("aligned");
  train->add_option("--alpha", tf.alpha, "Weight of the enhancement loss")->capture_default_str();
  train->add_option("--lr", tf.lr, "Peak learning rate")->capture_default_str();
  train->add_option("--warmup-steps", tf.warmup, "Warmup steps")->capture_default_str();
  train->add_option("--epochs", tf.epochs, "Epochs")->capture_default_str();
  train->add_option("--max-steps", tf.max_steps, "Stop after this many steps (0: all epochs)")->capture_default_str();
  train->add_option("--batch-size", tf.batch, "Utterances per step")->capture_default_str();
  train->add_option("--avg-last-k", tf.avg_k, "Checkpoints averaged at the end")->capture_default_str();
  train->add_flag("--no-cmkt", tf.no_cmkt, "Disable the text branch (baseline)");
  train->add_flag("--unscaled-text-free", tf.unscaled_text_free, "Text-free utterances use plain MAE");
  train->add_flag("--keep-all-checkpoints", tf.keep_all, "Keep every epoch checkpoint");
  tf.model.Register(train);

  // enhance
  auto *enh = app.add_subcommand("enhance", "Enhance one WAV file (no text needed)");
  auto *enh_seed = add_common(enh);
  std::string enh_ckpt, enh_model, enh_in, enh_out;
  ModelFlags enh_flags;
  enh->add_option("--checkpoint", enh_ckpt, "Checkpoint (.cmkp)")->required();
  enh->add_option("--model-config", enh_model, "model.json (default: next to the checkpoint)");
  enh->add_option("--input", enh_in, "Noisy WAV")->required();
  enh->add_option("--output", enh_out, "Enhanced WAV")->required();
  enh_flags.Register(enh);

  // evaluate
  auto *ev = app.add_subcommand("evaluate", "Score enhanced output per SNR bucket");
  auto *ev_seed = add_common(ev);
  std::string ev_manifest, ev_ckpt, ev_model, ev_report = "report.csv";
  std::vector<std::string> ev_metrics;
  bool ev_identity = false;
  ModelFlags ev_flags;
  ev->add_option("--manifest", ev_manifest, "Evaluation manifest")->required();
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint (.cmkp)");
  ev->add_option("--model-config", ev_model, "model.json (default: next to the checkpoint)");
  ev->add_option("--metrics", ev_metrics, "Metrics (stoi, si_sdr, noisy_stoi, noisy_si_sdr, pesq, vqscore)")
      ->delimiter(',')
      ->default_str("stoi,si_sdr,noisy_stoi,noisy_si_sdr");
  ev->add_option("--report", ev_report, "Report CSV path")->capture_default_str();
  ev->add_flag("--identity", ev_identity, "Score the unmodified noisy input instead of a model");
  ev_flags.Register(ev);

  // export-attention
  auto *ex = app.add_subcommand("export-attention", "Write cross-attention maps as CSV and PGM");
  auto *ex_seed = add_common(ex);
  std::string ex_manifest, ex_archive, ex_ckpt, ex_model, ex_utt, ex_reduce = "mean-heads", ex_out = "attention";
  int ex_layer = -1;
  ModelFlags ex_flags;
  ex->add_option("--manifest", ex_manifest, "Manifest")->required();
  ex->add_option("--archive", ex_archive, "Embedding archive")->required();
  ex->add_option("--checkpoint", ex_ckpt, "Checkpoint (.cmkp)")->required();
  ex->add_option("--model-config", ex_model, "model.json (default: next to the checkpoint)");
  ex->add_option("--utt", ex_utt, "Utterance id (default: first with tokens)");
  ex->add_option("--layer", ex_layer, "Layer index, negative counts from the end")->capture_default_str();
  ex->add_option("--reduce", ex_reduce, "Head reduction")
      ->check(CLI::IsMember({"mean-heads", "per-head"}))
      ->capture_default_str();
  ex->add_option("--out", ex_out, "Output path prefix")->capture_default_str();
  ex_flags.Register(ex);

  // grad-check
  auto *gc = app.add_subcommand("grad-check", "Compare gradients with finite differences on a tiny model");
  auto *gc_seed = add_common(gc);
  std::string gc_arch = "conformer", gc_loss = "combined";
  gc->add_option("--arch", gc_arch, "SE-block kind")
      ->check(CLI::IsMember({"conformer", "transformer", "blstm"}))
      ->capture_default_str();
  gc->add_option("--loss", gc_loss, "Loss selector")->check(CLI::IsMember({"se", "cma", "combined"}))->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      common.seed_opt = gen_seed;
      return RunGenSynth(common, gen_out, synth, *gen);
    }
    if (prep->parsed()) {
      common.seed_opt = prep_seed;
      return RunPrepare(common, prep_manifest, prep_out);
    }
    if (train->parsed()) {
      common.seed_opt = train_seed;
      return RunTrain(common, tf, *train);
    }
    if (enh->parsed()) {
      common.seed_opt = enh_seed;
      return RunEnhance(common, enh_ckpt, enh_model, enh_in, enh_out, enh_flags);
    }
    if (ev->parsed()) {
      common.seed_opt = ev_seed;
      return RunEvaluate(common, ev_manifest, ev_ckpt, ev_model, ev_metrics, ev_report, ev_identity, ev_flags);
    }
    if (ex->parsed()) {
      common.seed_opt = ex_seed;
      return RunExportAttention(common, ex_manifest, ex_archive, ex_ckpt, ex_model, ex_utt, ex_layer, ex_reduce,
                                ex_out, ex_flags);
    }
    if (gc->parsed()) {
      common.seed_opt = gc_seed;
      return RunGradCheck(common, gc_arch, gc_loss);
    }
  } catch (const cmkt::Error &e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception &e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
