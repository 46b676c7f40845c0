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

// Command-line front end. Links the C API only; all orchestration state
// lives in the resolved-config JSON written next to each run's outputs, so
// any run can be replayed from that file alone.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mltts/mltts_c.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  uint64_t seed = 1;
  bool deterministic = true;
  std::string precision = "f32";
  std::string out_dir;
};

std::string take(char* s) {
  if (!s) return {};
  std::string out(s);
  mltts_string_free(s);
  return out;
}

int fail(mltts_status status) {
  std::cerr << "error: " << mltts_last_error() << "\n";
  return static_cast<int>(status);
}

void write_resolved_config(const Globals& g, const std::string& subcommand, const json& options) {
  fs::create_directories(g.out_dir);
  json j;
  j["version"] = 1;
  j["subcommand"] = subcommand;
  j["globals"] = {{"seed", g.seed},
                  {"deterministic", g.deterministic},
                  {"precision", g.precision},
                  {"out_dir", g.out_dir}};
  j["options"] = options;
  std::ofstream f(fs::path(g.out_dir) / "resolved_config.json");
  f << j.dump(2) << "\n";
}

int effective_jobs(const Globals& g, int jobs) {
  if (g.deterministic && jobs > 1) {
    std::cerr << "deterministic mode: forcing --jobs 1\n";
    return 1;
  }
  return jobs;
}

int dispatch(const std::string& subcommand, json options, const Globals& g);

int cmd_gen_corpus(const json& options, const Globals& g) {
  json opts = options;
  opts["seed"] = g.seed;
  char* summary = nullptr;
  const auto status = mltts_gen_corpus(g.out_dir.c_str(), opts.dump().c_str(), &summary);
  if (status != MLTTS_OK) return fail(status);
  std::cout << take(summary) << "\n";
  return 0;
}

int cmd_features(const json& options, const Globals& g) {
  json opts;
  opts["jobs"] = effective_jobs(g, options.value("jobs", 1));
  opts["resample"] = options.value("resample", true);
  const std::string manifest = options.at("manifest").get<std::string>();
  std::cerr << "extracting features for " << manifest << "\n";
  char* summary = nullptr;
  const auto status =
      mltts_features_run(manifest.c_str(), g.out_dir.c_str(), opts.dump().c_str(), &summary);
  if (status != MLTTS_OK) return fail(status);
  std::cout << take(summary) << "\n";
  return 0;
}

int cmd_corpus_regime(const json& options, const Globals& g) {
  json opts;
  opts["target_set"] = options.value("target_set", "MAN");
  opts["size"] = options.value("size", 0);
  opts["seed"] = g.seed;
  const std::string source = options.at("source").get<std::string>();
  const std::string out_manifest =
      (fs::path(g.out_dir) / options.value("name", std::string("regime.jsonl"))).string();
  char* summary = nullptr;
  const auto status =
      mltts_corpus_regime(source.c_str(), opts.dump().c_str(), out_manifest.c_str(), &summary);
  if (status != MLTTS_OK) return fail(status);
  std::cout << take(summary) << "\n";
  return 0;
}

int cmd_train(const json& options, const Globals& g) {
  const json regime = options.at("regime");
  std::cerr << "training (regime " << regime.value("regime", std::string("?")) << ")\n";
  char* summary = nullptr;
  const auto status = mltts_train_run(regime.dump().c_str(), g.out_dir.c_str(), &summary);
  if (status != MLTTS_OK) return fail(status);
  const std::string text = take(summary);
  std::cout << text << "\n";
  const json parsed = json::parse(text);
  std::cerr << "final loss " << parsed.value("final_loss", 0.0) << ", checkpoint hash "
            << parsed.value("checkpoint_hash", std::string("?")) << "\n";
  return 0;
}

int cmd_synth(const json& options, const Globals& g) {
  mltts_model* model = nullptr;
  const std::string checkpoint = options.at("checkpoint").get<std::string>();
  auto status = mltts_model_open(checkpoint.c_str(), &model);
  if (status != MLTTS_OK) return fail(status);

  json opts;
  opts["gl_iters"] = options.value("gl_iters", 60);
  opts["gl_momentum"] = options.value("gl_momentum", 0.0);
  opts["max_steps"] = options.value("max_steps", 0);
  opts["seed"] = g.seed;
  opts["precision"] = g.precision;
  const std::string wav =
      (fs::path(g.out_dir) / options.value("wav_name", std::string("synth.wav"))).string();
  const std::string svg =
      (fs::path(g.out_dir) / options.value("svg_name", std::string("alignment.svg"))).string();

  char* summary = nullptr;
  status = mltts_synthesize(model, options.at("phonemes").get<std::string>().c_str(),
                            options.value("speaker", 0), opts.dump().c_str(), wav.c_str(),
                            svg.c_str(), &summary);
  mltts_model_close(model);
  if (status != MLTTS_OK) return fail(status);
  std::cout << take(summary) << "\n";
  return 0;
}

int cmd_analyze(const json& options, const Globals& g) {
  json opts;
  opts["seed"] = g.seed;
  if (options.contains("perplexity")) opts["perplexity"] = options["perplexity"];
  if (options.contains("iters")) opts["iters"] = options["iters"];
  const std::string checkpoint = options.at("checkpoint").get<std::string>();
  const std::string manifest = options.at("manifest").get<std::string>();
  const std::string source = options.value("source", "phoneme");
  char* summary = nullptr;
  const auto status = mltts_analyze_run(checkpoint.c_str(), manifest.c_str(), source.c_str(),
                                        g.out_dir.c_str(), opts.dump().c_str(), &summary);
  if (status != MLTTS_OK) return fail(status);
  std::cout << take(summary) << "\n";
  return 0;
}

int cmd_gradcheck(const json& options, const Globals& g) {
  json opts;
  opts["ops"] = options.value("ops", true);
  opts["grid"] = options.value("grid", true);
  opts["jobs"] = effective_jobs(g, options.value("jobs", 1));
  opts["seed"] = g.seed;
  std::cerr << "running finite-difference checks\n";
  char* report = nullptr;
  char* summary = nullptr;
  const auto status = mltts_gradcheck_run(opts.dump().c_str(), &report, &summary);
  const std::string table = take(report);
  std::cout << table;
  {
    std::ofstream f(fs::path(g.out_dir) / "gradcheck_report.txt");
    f << table;
    std::ofstream s(fs::path(g.out_dir) / "gradcheck_summary.json");
    s << take(summary) << "\n";
  }
  if (status != MLTTS_OK) return fail(status);
  return 0;
}

int cmd_replay(const json& options, const Globals& overrides) {
  const std::string config_path = options.at("config").get<std::string>();
  std::ifstream f(config_path);
  if (!f) {
    std::cerr << "error: cannot open resolved config " << config_path << "\n";
    return 3;
  }
  json saved;
  try {
    f >> saved;
  } catch (const json::exception& e) {
    std::cerr << "error: bad resolved config: " << e.what() << "\n";
    return 3;
  }
  Globals g;
  const auto& sg = saved.at("globals");
  g.seed = sg.value("seed", uint64_t{1});
  g.deterministic = sg.value("deterministic", true);
  g.precision = sg.value("precision", std::string("f32"));
  g.out_dir = overrides.out_dir.empty() ? sg.at("out_dir").get<std::string>() : overrides.out_dir;
  return dispatch(saved.at("subcommand").get<std::string>(), saved.at("options"), g);
}

int dispatch(const std::string& subcommand, json options, const Globals& g) {
  if (subcommand != "replay") write_resolved_config(g, subcommand, options);
  if (subcommand == "gen-corpus") return cmd_gen_corpus(options, g);
  if (subcommand == "features") return cmd_features(options, g);
  if (subcommand == "corpus-regime") return cmd_corpus_regime(options, g);
  if (subcommand == "train") return cmd_train(options, g);
  if (subcommand == "synth") return cmd_synth(options, g);
  if (subcommand == "analyze") return cmd_analyze(options, g);
  if (subcommand == "gradcheck") return cmd_gradcheck(options, g);
  if (subcommand == "replay") return cmd_replay(options, g);
  std::cerr << "error: unknown subcommand " << subcommand << "\n";
  return 2;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixed-lingual TTS toolkit"};
  app.require_subcommand(1);

  Globals globals;
  app.add_option("--seed", globals.seed, "global RNG seed");
  app.add_flag("--deterministic,!--no-deterministic", globals.deterministic,
               "single-threaded reproducible execution (default on)");
  app.add_option("--precision", globals.precision, "f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));

  json options;
  std::string subcommand;

  auto add_out_dir = [&](CLI::App* cmd) {
    cmd->add_option("--out-dir", globals.out_dir, "output directory")->required();
  };

  // gen-corpus
  {
    auto* cmd = app.add_subcommand("gen-corpus", "generate the synthetic two-language corpus");
    cmd->fallthrough();
    add_out_dir(cmd);
    static int speakers = 2, man = 4, eng = 3, mix = 3, tmin = 4, tmax = 7;
    cmd->add_option("--speakers", speakers);
    cmd->add_option("--man", man, "Mandarin utterance count");
    cmd->add_option("--eng", eng, "English utterance count");
    cmd->add_option("--mix", mix, "mixed utterance count");
    cmd->add_option("--tokens-min", tmin);
    cmd->add_option("--tokens-max", tmax);
    cmd->callback([&] {
      subcommand = "gen-corpus";
      options = {{"speakers", speakers}, {"man", man},        {"eng", eng},
                 {"mix", mix},           {"tokens_min", tmin}, {"tokens_max", tmax}};
    });
  }
  // features
  {
    auto* cmd = app.add_subcommand("features", "extract and cache spectrogram features");
    cmd->fallthrough();
    add_out_dir(cmd);
    static std::string manifest;
    static int jobs = 1;
    static bool no_resample = false;
    cmd->add_option("--manifest", manifest, "JSON-lines corpus manifest")->required();
    cmd->add_option("--jobs", jobs, "parallel workers (non-deterministic mode only)");
    cmd->add_flag("--no-resample", no_resample, "reject non-24kHz audio instead of resampling");
    cmd->callback([&] {
      subcommand = "features";
      options = {{"manifest", manifest}, {"jobs", jobs}, {"resample", !no_resample}};
    });
  }
  // corpus-regime
  {
    auto* cmd = app.add_subcommand("corpus-regime",
                                   "select a seeded language-restricted training subset");
    cmd->fallthrough();
    add_out_dir(cmd);
    static std::string source, target_set = "MAN", name = "regime.jsonl";
    static int size = 0;
    cmd->add_option("--source", source, "source manifest")->required();
    cmd->add_option("--target-set", target_set, "MAN, ENG or MIX")
        ->check(CLI::IsMember({"MAN", "ENG", "MIX"}));
    cmd->add_option("--size", size, "utterance count")->required();
    cmd->add_option("--name", name, "output manifest file name");
    cmd->callback([&] {
      subcommand = "corpus-regime";
      options = {{"source", source}, {"target_set", target_set}, {"size", size}, {"name", name}};
    });
  }
  // train
  {
    auto* cmd = app.add_subcommand("train", "train per a regime config");
    cmd->fallthrough();
    add_out_dir(cmd);
    static std::string regime_path;
    cmd->add_option("--regime", regime_path, "regime JSON file")->required();
    cmd->callback([&] {
      subcommand = "train";
      std::ifstream f(regime_path);
      if (!f) throw CLI::ValidationError("--regime", "cannot open " + regime_path);
      json regime;
      try {
        f >> regime;
      } catch (const json::exception& e) {
        throw CLI::ValidationError("--regime", std::string("bad JSON: ") + e.what());
      }
      options = {{"regime", regime}};
    });
  }
  // synth
  {
    auto* cmd = app.add_subcommand("synth", "synthesize a waveform from phonemes");
    cmd->fallthrough();
    add_out_dir(cmd);
    static std::string checkpoint, phonemes, wav_name = "synth.wav", svg_name = "alignment.svg";
    static int speaker = 0, gl_iters = 60, max_steps = 0;
    static double gl_momentum = 0.0;
    cmd->add_option("--checkpoint", checkpoint)->required();
    cmd->add_option("--phonemes", phonemes, "scope-tagged phoneme string")->required();
    cmd->add_option("--speaker", speaker)->required();
    cmd->add_option("--wav-name", wav_name);
    cmd->add_option("--svg-name", svg_name);
    cmd->add_option("--gl-iters", gl_iters, "Griffin-Lim iterations");
    cmd->add_option("--gl-momentum", gl_momentum, "0 = plain (monotone) Griffin-Lim");
    cmd->add_option("--max-steps", max_steps, "decoder step cap override");
    cmd->callback([&] {
      subcommand = "synth";
      options = {{"checkpoint", checkpoint}, {"phonemes", phonemes},
                 {"speaker", speaker},       {"wav_name", wav_name},
                 {"svg_name", svg_name},     {"gl_iters", gl_iters},
                 {"gl_momentum", gl_momentum}, {"max_steps", max_steps}};
    });
  }
  // analyze
  {
    auto* cmd = app.add_subcommand("analyze", "embedding-space dumps, t-SNE and separation score");
    cmd->fallthrough();
    add_out_dir(cmd);
    static std::string checkpoint, manifest, source = "phoneme";
    static double perplexity = 0.0;
    static int iters = 0;
    cmd->add_option("--checkpoint", checkpoint)->required();
    cmd->add_option("--manifest", manifest, "sample manifest")->required();
    cmd->add_option("--source", source, "phoneme or encoder")
        ->check(CLI::IsMember({"phoneme", "encoder"}));
    cmd->add_option("--perplexity", perplexity);
    cmd->add_option("--iters", iters);
    cmd->callback([&] {
      subcommand = "analyze";
      options = {{"checkpoint", checkpoint}, {"manifest", manifest}, {"source", source}};
      if (perplexity > 0) options["perplexity"] = perplexity;
      if (iters > 0) options["iters"] = iters;
    });
  }
  // gradcheck
  {
    auto* cmd = app.add_subcommand("gradcheck",
                                   "finite-difference verification of ops and the model grid");
    cmd->fallthrough();
    add_out_dir(cmd);
    static bool no_ops = false, no_grid = false;
    static int jobs = 1;
    cmd->add_flag("--no-ops", no_ops, "skip the op-level suite");
    cmd->add_flag("--no-grid", no_grid, "skip the 3x3 end-to-end grid");
    cmd->add_option("--jobs", jobs, "parallel shards (non-deterministic mode only)");
    cmd->callback([&] {
      subcommand = "gradcheck";
      options = {{"ops", !no_ops}, {"grid", !no_grid}, {"jobs", jobs}};
    });
  }
  // replay
  {
    auto* cmd = app.add_subcommand("replay", "re-run a command from its resolved-config JSON");
    cmd->fallthrough();
    static std::string config_path;
    cmd->add_option("--config", config_path, "resolved_config.json from a previous run")
        ->required();
    cmd->add_option("--out-dir", globals.out_dir, "override the original output directory");
    cmd->callback([&] {
      subcommand = "replay";
      options = {{"config", config_path}};
    });
  }

  CLI11_PARSE(app, argc, argv);
  return dispatch(subcommand, options, globals);
}
