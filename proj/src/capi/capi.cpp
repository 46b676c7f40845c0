// Copyright 2026 The mltts Authors
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

#include "mltts/mltts_c.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mltts/analysis.hpp"
#include "mltts/checkpoint.hpp"
#include "mltts/dsp.hpp"
#include "mltts/gradcheck.hpp"
#include "mltts/svg.hpp"
#include "mltts/synth_corpus.hpp"
#include "mltts/trainer.hpp"
#include "mltts/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** slot, const std::string& value) {
  if (slot) *slot = dup_string(value);
}

json parse_options(const char* options_json) {
  if (!options_json || !*options_json) return json::object();
  try {
    return json::parse(options_json);
  } catch (const json::exception& e) {
    throw mltts::ConfigError(std::string("bad options JSON: ") + e.what());
  }
}

template <typename Fn>
mltts_status guarded(Fn&& fn) {
  try {
    fn();
    return MLTTS_OK;
  } catch (const mltts::ConfigError& e) {
    g_last_error = e.what();
    return MLTTS_ERR_CONFIG;
  } catch (const mltts::NumericError& e) {
    g_last_error = e.what();
    return MLTTS_ERR_NUMERIC;
  } catch (const mltts::DataError& e) {
    g_last_error = e.what();
    return MLTTS_ERR_DATA;
  } catch (const mltts::IoError& e) {
    g_last_error = e.what();
    return MLTTS_ERR_DATA;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal: ") + e.what();
    return MLTTS_ERR_NUMERIC;
  }
}

} // namespace

struct mltts_model {
  mltts::tts::CheckpointData data;
  mltts::text::PhonemeInventory inventory;
  bool has_stats = false;
  mltts::dsp::NormStats stats;
};

extern "C" {

const char* mltts_version(void) { return mltts::version(); }

const char* mltts_last_error(void) { return g_last_error.c_str(); }

void mltts_string_free(char* s) { std::free(s); }

mltts_status mltts_gen_corpus(const char* out_dir, const char* options_json,
                              char** summary_json) {
  return guarded([&] {
    if (!out_dir) throw mltts::ConfigError("gen_corpus: out_dir is required");
    const json opts = parse_options(options_json);
    mltts::train::SynthCorpusSpec spec;
    spec.out_dir = out_dir;
    spec.n_speakers = opts.value("speakers", spec.n_speakers);
    spec.utterances_man = opts.value("man", spec.utterances_man);
    spec.utterances_eng = opts.value("eng", spec.utterances_eng);
    spec.utterances_mix = opts.value("mix", spec.utterances_mix);
    spec.tokens_min = opts.value("tokens_min", spec.tokens_min);
    spec.tokens_max = opts.value("tokens_max", spec.tokens_max);
    spec.seed = opts.value("seed", spec.seed);
    const auto inv = mltts::text::PhonemeInventory::default_inventory();
    const auto result = mltts::train::generate_synth_corpus(spec, inv);

    json summary;
    summary["manifest"] = result.manifest_path;
    summary["utterances"] = result.stats.n_records;
    summary["per_speaker"] = result.stats.per_speaker;
    summary["per_language"] = result.stats.per_language;
    set_out(summary_json, summary.dump());
  });
}

mltts_status mltts_features_run(const char* manifest_path, const char* out_dir,
                                const char* options_json, char** summary_json) {
  return guarded([&] {
    if (!manifest_path || !out_dir)
      throw mltts::ConfigError("features: manifest path and out_dir are required");
    const json opts = parse_options(options_json);
    mltts::train::FeaturePrepOptions prep;
    prep.jobs = opts.value("jobs", 1);
    prep.resample = opts.value("resample", true);
    const auto inv = mltts::text::PhonemeInventory::default_inventory();
    const auto result = mltts::train::prepare_corpus_features(manifest_path, inv, out_dir, prep);

    json summary;
    summary["files"] = result.n_files;
    summary["cache_hits"] = result.cache_hits;
    summary["frames"] = result.frames_per_file;
    if (result.n_files > 0) {
      summary["stats"] = {{"mel_min", result.stats.mel_min},
                          {"mel_max", result.stats.mel_max},
                          {"lin_min", result.stats.lin_min},
                          {"lin_max", result.stats.lin_max}};
    }
    set_out(summary_json, summary.dump());
  });
}

mltts_status mltts_corpus_regime(const char* source_manifest, const char* options_json,
                                 const char* out_manifest, char** summary_json) {
  return guarded([&] {
    if (!source_manifest || !out_manifest)
      throw mltts::ConfigError("corpus_regime: source and output manifests are required");
    const json opts = parse_options(options_json);
    mltts::train::CorpusRegimeSpec spec;
    spec.source_manifest = source_manifest;
    spec.out_manifest = out_manifest;
    spec.target_set = mltts::text::utt_language_from_name(opts.value("target_set", std::string("MAN")));
    spec.size = opts.value("size", 0);
    spec.seed = opts.value("seed", uint64_t{1});
    const auto inv = mltts::text::PhonemeInventory::default_inventory();
    const auto stats = mltts::train::build_corpus_regime(spec, inv);

    json summary;
    summary["manifest"] = spec.out_manifest;
    summary["utterances"] = stats.n_records;
    summary["per_language"] = stats.per_language;
    set_out(summary_json, summary.dump());
  });
}

mltts_status mltts_train_run(const char* regime_json, const char* out_dir,
                             char** summary_json) {
  return guarded([&] {
    if (!regime_json || !out_dir)
      throw mltts::ConfigError("train: regime JSON and out_dir are required");
    const auto regime = mltts::train::TrainingRegime::from_json(regime_json);
    const auto result = mltts::train::train(regime, out_dir);

    json summary;
    summary["checkpoint"] = result.checkpoint_path;
    if (!result.phase1_checkpoint_path.empty())
      summary["phase1_checkpoint"] = result.phase1_checkpoint_path;
    summary["log"] = result.log_path;
    summary["steps"] = result.log.size();
    summary["initial_loss"] = result.initial_loss;
    summary["final_loss"] = result.final_loss;
    char hash_hex[24];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(result.final_checkpoint_hash));
    summary["checkpoint_hash"] = hash_hex;
    summary["max_excluded_row_grad"] = result.max_excluded_row_grad;
    set_out(summary_json, summary.dump());
  });
}

mltts_status mltts_gradcheck_run(const char* options_json, char** report_text,
                                 char** summary_json) {
  bool failed = false;
  const mltts_status status = guarded([&] {
    const json opts = parse_options(options_json);
    const bool run_ops = opts.value("ops", true);
    const bool run_grid = opts.value("grid", true);
    const auto seed = opts.value("seed", uint64_t{1});
    const int jobs = opts.value("jobs", 1);

    mltts::train::GradCheckReport combined;
    if (run_ops) {
      const auto ops_report = mltts::train::run_op_gradchecks(seed);
      combined.entries.insert(combined.entries.end(), ops_report.entries.begin(),
                              ops_report.entries.end());
      combined.all_pass = combined.all_pass && ops_report.all_pass;
      combined.seconds += ops_report.seconds;
    }
    if (run_grid) {
      const auto grid_report = mltts::train::run_grid_gradcheck(seed, jobs);
      combined.entries.insert(combined.entries.end(), grid_report.entries.begin(),
                              grid_report.entries.end());
      combined.all_pass = combined.all_pass && grid_report.all_pass;
      combined.seconds += grid_report.seconds;
    }
    set_out(report_text, mltts::train::format_report(combined));

    json summary;
    summary["all_pass"] = combined.all_pass;
    summary["seconds"] = combined.seconds;
    json checks = json::array();
    for (const auto& e : combined.entries)
      checks.push_back({{"name", e.name},
                        {"max_rel_err", e.max_rel_err},
                        {"tolerance", e.tolerance},
                        {"pass", e.pass}});
    summary["checks"] = std::move(checks);
    set_out(summary_json, summary.dump());
    failed = !combined.all_pass;
  });
  if (status != MLTTS_OK) return status;
  if (failed) {
    g_last_error = "gradient checks failed";
    return MLTTS_ERR_NUMERIC;
  }
  return MLTTS_OK;
}

mltts_status mltts_analyze_run(const char* checkpoint_path, const char* manifest_path,
                               const char* source, const char* out_dir,
                               const char* options_json, char** summary_json) {
  return guarded([&] {
    if (!checkpoint_path || !manifest_path || !source || !out_dir)
      throw mltts::ConfigError("analyze: checkpoint, manifest, source and out_dir are required");
    const json opts = parse_options(options_json);
    const auto src = mltts::analysis::dump_source_from_name(source);

    const auto data = mltts::tts::load_checkpoint(checkpoint_path);
    const json aux = json::parse(data.aux_json);
    if (!aux.contains("inventory"))
      throw mltts::DataError("checkpoint carries no inventory; cannot interpret phonemes");
    const auto inv = mltts::text::PhonemeInventory::from_json(aux["inventory"].dump());
    auto model = mltts::tts::model_from_checkpoint<float>(data);

    const auto sample = mltts::text::load_manifest(manifest_path, inv);
    const auto dump = mltts::analysis::dump_embeddings(model, inv, sample, src);

    fs::create_directories(out_dir);
    const std::string tag = mltts::analysis::dump_source_name(src);
    const std::string csv_path = (fs::path(out_dir) / (tag + "_dump.csv")).string();
    mltts::analysis::write_dump_csv(csv_path, dump);

    mltts::analysis::TsneConfig tsne_cfg;
    tsne_cfg.seed = opts.value("seed", uint64_t{1});
    tsne_cfg.n_iters = opts.value("iters", tsne_cfg.n_iters);
    tsne_cfg.perplexity = opts.value("perplexity", tsne_cfg.perplexity);
    // keep the default perplexity legal for small dumps
    if (!opts.contains("perplexity") && tsne_cfg.perplexity >= dump.points.rows() / 3.0)
      tsne_cfg.perplexity = std::max(2.0, dump.points.rows() / 4.0);
    const auto layout = mltts::analysis::tsne(dump, tsne_cfg);

    const std::string svg_path = (fs::path(out_dir) / (tag + "_tsne.svg")).string();
    mltts::analysis::write_svg(svg_path,
                               mltts::analysis::scatter_svg(layout.points, dump.labels, tag));
    const std::string layout_csv = (fs::path(out_dir) / (tag + "_tsne.csv")).string();
    {
      std::ofstream f(layout_csv);
      f << "phoneme,language,x,y\n";
      for (int i = 0; i < layout.points.rows(); ++i)
        f << dump.labels[static_cast<size_t>(i)].label << ','
          << mltts::text::language_name(dump.labels[static_cast<size_t>(i)].language) << ','
          << layout.points.at(i, 0) << ',' << layout.points.at(i, 1) << "\n";
    }

    const double score = mltts::analysis::language_separation_score(dump);

    json summary;
    summary["source"] = tag;
    summary["n_points"] = dump.points.rows();
    summary["separation_score"] = score;
    summary["missing_phonemes"] = dump.missing.size();
    summary["dump_csv"] = csv_path;
    summary["tsne_csv"] = layout_csv;
    summary["tsne_svg"] = svg_path;
    summary["kl_final"] = layout.kl_history.back();
    set_out(summary_json, summary.dump());
  });
}

mltts_status mltts_model_open(const char* checkpoint_path, mltts_model** out_model) {
  return guarded([&] {
    if (!checkpoint_path || !out_model)
      throw mltts::ConfigError("model_open: checkpoint path and out handle are required");
    auto model = std::make_unique<mltts_model>();
    model->data = mltts::tts::load_checkpoint(checkpoint_path);
    const json aux = json::parse(model->data.aux_json);
    if (aux.contains("inventory"))
      model->inventory = mltts::text::PhonemeInventory::from_json(aux["inventory"].dump());
    else
      model->inventory = mltts::text::PhonemeInventory::default_inventory();
    if (aux.contains("feature_stats")) {
      const auto& s = aux["feature_stats"];
      model->stats.mel_min = s.value("mel_min", 0.0);
      model->stats.mel_max = s.value("mel_max", 0.0);
      model->stats.lin_min = s.value("lin_min", 0.0);
      model->stats.lin_max = s.value("lin_max", 0.0);
      model->has_stats = true;
    }
    *out_model = model.release();
  });
}

void mltts_model_close(mltts_model* model) { delete model; }

mltts_status mltts_model_config_json(mltts_model* model, char** config_json) {
  return guarded([&] {
    if (!model) throw mltts::ConfigError("model_config_json: null model");
    json j = json::parse(model->data.config.to_json());
    j["aux"] = json::parse(model->data.aux_json);
    set_out(config_json, j.dump());
  });
}

mltts_status mltts_synthesize(mltts_model* model, const char* phonemes, int speaker_id,
                              const char* options_json, const char* out_wav_path,
                              const char* out_alignment_svg_path, char** summary_json) {
  return guarded([&] {
    if (!model || !phonemes) throw mltts::ConfigError("synthesize: model and phonemes required");
    const json opts = parse_options(options_json);
    const int gl_iters = opts.value("gl_iters", 60);
    const double gl_momentum = opts.value("gl_momentum", 0.0);
    const int max_steps = opts.value("max_steps", 0);
    const auto seed = opts.value("seed", uint64_t{1});
    const std::string precision = opts.value("precision", std::string("f32"));

    const auto ids = model->inventory.parse(phonemes);

    mltts::tts::SynthesisResult synth;
    if (precision == "f64") {
      auto m = mltts::tts::model_from_checkpoint<double>(model->data);
      synth = m.synthesize(ids, speaker_id, max_steps);
    } else if (precision == "f32") {
      auto m = mltts::tts::model_from_checkpoint<float>(model->data);
      synth = m.synthesize(ids, speaker_id, max_steps);
    } else {
      throw mltts::ConfigError("synthesize: precision must be f32 or f64");
    }

    json summary;
    summary["steps"] = synth.steps;
    summary["hit_max_steps"] = synth.hit_max_steps;
    summary["frames"] = synth.mel.rows();

    if (out_wav_path) {
      if (!model->has_stats)
        throw mltts::DataError(
            "synthesize: checkpoint carries no feature stats; cannot invert normalization");
      mltts::dsp::FeatureConfig fcfg;
      if (model->data.config.linear_dim != fcfg.stft.n_bins())
        throw mltts::ConfigError("synthesize: model linear_dim " +
                                 std::to_string(model->data.config.linear_dim) +
                                 " does not match the " + std::to_string(fcfg.stft.n_bins()) +
                                 "-bin waveform pipeline");
      const auto mag = mltts::dsp::denormalize_linear(synth.linear, model->stats, fcfg);
      std::vector<double> errors;
      const auto clip =
          mltts::dsp::griffin_lim(mag, fcfg.stft, gl_iters, seed, &errors, gl_momentum);
      mltts::dsp::wav_write(out_wav_path, clip);
      summary["wav"] = out_wav_path;
      summary["gl_iterations"] = gl_iters;
      summary["spectral_convergence"] = errors.empty() ? 0.0 : errors.back();
      summary["duration_s"] = clip.duration_s();
    }
    if (out_alignment_svg_path) {
      mltts::analysis::write_svg(out_alignment_svg_path,
                                 mltts::analysis::alignment_svg(synth.traces, "alignment"));
      summary["alignment_svg"] = out_alignment_svg_path;
    }
    const auto diag = mltts::train::attention_diagnostics(synth.traces);
    summary["attention_entropy"] = diag.entropy;
    summary["forward_motion"] = diag.forward_motion;
    set_out(summary_json, summary.dump());
  });
}

} // extern "C"
