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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "support.hpp"

using nlohmann::json;
using mltts::testing::TempDir;

namespace fs = std::filesystem;

#ifndef MLTTS_CLI_PATH
#define MLTTS_CLI_PATH "mltts"
#endif

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output; // stdout + stderr combined
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(MLTTS_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof(buf), pipe)) result.output.append(buf, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

// the summary JSON is the last line starting with '{' (stderr progress may
// follow it in the merged stream)
json last_json_line(const std::string& output) {
  std::string line;
  std::string found;
  for (size_t pos = 0; pos <= output.size(); ++pos) {
    if (pos == output.size() || output[pos] == '\n') {
      if (!line.empty() && line[0] == '{') found = line;
      line.clear();
    } else {
      line += output[pos];
    }
  }
  REQUIRE(!found.empty());
  return json::parse(found);
}

struct Fixture {
  TempDir dir{"cli"};
  std::string corpus_dir, manifest, features_dir, regime_path;

  Fixture() {
    corpus_dir = (dir.path() / "corpus").string();
    auto gen = run_cli("gen-corpus --out-dir " + corpus_dir +
                       " --speakers 2 --man 2 --eng 1 --mix 1 --seed 17");
    REQUIRE(gen.exit_code == 0);
    manifest = corpus_dir + "/corpus.jsonl";

    features_dir = (dir.path() / "features").string();
    auto feats = run_cli("features --manifest " + manifest + " --out-dir " + features_dir);
    REQUIRE(feats.exit_code == 0);

    const json regime = {
        {"regime", "avm_spk_emb_include_target"},
        {"avm_manifest", manifest},
        {"features_dir", features_dir},
        {"model",
         {{"phoneme_vocab", 239},
          {"embedding_dim", 16},
          {"encoder_dim", 16},
          {"decoder_dim", 32},
          {"attention_dim", 16},
          {"speaker_count", 2},
          {"speaker_dim", 4},
          {"speaker_placement", "se_dec"},
          {"prenet_dims", {32, 16}},
          {"postnet_dim", 16}}},
        {"schedule", {{"steps", 15}, {"batch_size", 4}, {"seed", 9}}}};
    regime_path = (dir.path() / "regime.json").string();
    std::ofstream f(regime_path);
    f << regime.dump();
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

} // namespace

TEST_CASE("unknown flags are rejected") {
  const auto result = run_cli("gradcheck --out-dir /tmp/unused --bogus-flag");
  CHECK(result.exit_code != 0);
  CHECK(result.output.find("bogus") != std::string::npos);
}

TEST_CASE("features on an empty manifest exits 0 with zero files") {
  TempDir tmp("cli_empty");
  const std::string manifest = (tmp.path() / "empty.jsonl").string();
  std::ofstream(manifest).close();
  const auto result =
      run_cli("features --manifest " + manifest + " --out-dir " + (tmp.path() / "f").string());
  CHECK(result.exit_code == 0);
  const json summary = last_json_line(result.output);
  CHECK(summary["files"] == 0);
}

TEST_CASE("feature runs are idempotent: second pass is all cache hits") {
  Fixture& f = fixture();
  const auto again =
      run_cli("features --manifest " + f.manifest + " --out-dir " + f.features_dir);
  CHECK(again.exit_code == 0);
  const json summary = last_json_line(again.output);
  CHECK(summary["files"] == summary["cache_hits"]);
  CHECK(summary["files"] == 4);
}

TEST_CASE("every run writes a resolved config next to its outputs") {
  Fixture& f = fixture();
  const std::string cfg_path = f.corpus_dir + "/resolved_config.json";
  REQUIRE(fs::exists(cfg_path));
  const json cfg = json::parse(mltts::testing::read_file(cfg_path));
  CHECK(cfg["subcommand"] == "gen-corpus");
  CHECK(cfg["globals"]["seed"] == 17);
  CHECK(cfg["options"]["man"] == 2);
}

TEST_CASE("deterministic training: identical hashes on repeat runs") {
  Fixture& f = fixture();
  TempDir tmp("cli_det");
  const auto r1 = run_cli("train --regime " + f.regime_path + " --out-dir " +
                          (tmp.path() / "a").string());
  const auto r2 = run_cli("train --regime " + f.regime_path + " --out-dir " +
                          (tmp.path() / "b").string());
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  const std::string h1 = last_json_line(r1.output)["checkpoint_hash"].get<std::string>();
  const std::string h2 = last_json_line(r2.output)["checkpoint_hash"].get<std::string>();
  CHECK(h1 == h2);
  CHECK(mltts::testing::read_file(tmp.path() / "a" / "final.ptck") ==
        mltts::testing::read_file(tmp.path() / "b" / "final.ptck"));
}

TEST_CASE("synth: invalid speaker exits 2 naming the range; valid run writes wav+svg") {
  Fixture& f = fixture();
  TempDir tmp("cli_synth");
  const std::string train_dir = (tmp.path() / "run").string();
  REQUIRE(run_cli("train --regime " + f.regime_path + " --out-dir " + train_dir).exit_code == 0);

  const auto bad = run_cli("synth --checkpoint " + train_dir + "/final.ptck" +
                           " --phonemes \"|MAN| a1\" --speaker 9 --out-dir " +
                           (tmp.path() / "bad").string());
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("[0,2)") != std::string::npos);

  const std::string synth_dir = (tmp.path() / "s").string();
  const auto good = run_cli("synth --checkpoint " + train_dir + "/final.ptck" +
                            " --phonemes \"|MAN| a1 i3 SIL\" --speaker 1 --max-steps 40" +
                            " --out-dir " + synth_dir);
  REQUIRE(good.exit_code == 0);
  CHECK(fs::exists(fs::path(synth_dir) / "synth.wav"));
  CHECK(fs::exists(fs::path(synth_dir) / "alignment.svg"));

  // replay reproduces the waveform byte-for-byte
  const std::string replay_dir = (tmp.path() / "s2").string();
  const auto replay = run_cli("replay --config " + synth_dir + "/resolved_config.json" +
                              " --out-dir " + replay_dir);
  REQUIRE(replay.exit_code == 0);
  CHECK(mltts::testing::read_file(fs::path(synth_dir) / "synth.wav") ==
        mltts::testing::read_file(fs::path(replay_dir) / "synth.wav"));
}

TEST_CASE("gradcheck subcommand prints the table and honors --no-grid") {
  TempDir tmp("cli_gc");
  const auto result = run_cli("gradcheck --no-grid --out-dir " + tmp.str());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("max_rel_err") != std::string::npos);
  CHECK(result.output.find("softmax") != std::string::npos);
  CHECK(fs::exists(tmp.path() / "gradcheck_report.txt"));
}

TEST_CASE("train propagates config errors with exit 2") {
  Fixture& f = fixture();
  TempDir tmp("cli_badtrain");
  json regime = json::parse(mltts::testing::read_file(f.regime_path));
  regime["model"]["attention_variant"] = "res";
  regime["model"]["embedding_dim"] = 8; // violates RES dim contract
  const std::string bad_path = (tmp.path() / "bad.json").string();
  std::ofstream(bad_path) << regime.dump();
  const auto result = run_cli("train --regime " + bad_path + " --out-dir " + tmp.str());
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("RES") != std::string::npos);
}
