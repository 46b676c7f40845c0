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

#include <fstream>

#include "mltts/manifest.hpp"
#include "mltts/phoneme.hpp"
#include "mltts/rng.hpp"
#include "support.hpp"

using namespace mltts;
using namespace mltts::text;
using mltts::testing::TempDir;

#ifndef MLTTS_GOLDEN_DIR
#define MLTTS_GOLDEN_DIR "."
#endif

TEST_CASE("inventory id layout and determinism") {
  const auto inv = PhonemeInventory::build({"a1", "b"}, {"AA", "K"});
  CHECK(inv.size() == 8);
  CHECK(inv.symbol(0).label == "PAD");
  CHECK(inv.symbol(1).label == "EOS");
  CHECK(inv.symbol(2).label == "SIL");
  CHECK(inv.symbol(3).label == "WB");
  CHECK(inv.symbol(4).label == "a1");
  CHECK(inv.symbol(4).language == Language::MAN);
  CHECK(inv.symbol(6).label == "AA");
  CHECK(inv.symbol(6).language == Language::ENG);

  const auto again = PhonemeInventory::build({"b", "a1"}, {"K", "AA"});
  CHECK(inv.to_json() == again.to_json());
}

TEST_CASE("inventory rejects duplicate labels within a language") {
  CHECK_THROWS_WITH_AS(PhonemeInventory::build({"a1", "a1"}, {}), doctest::Contains("a1"),
                       ConfigError);
  // the same label in both languages is fine (language-tagged identity)
  const auto inv = PhonemeInventory::build({"o1"}, {"o1"});
  CHECK(inv.size() == 6);
}

TEST_CASE("empty English table gives SPECIAL plus Mandarin only") {
  const auto inv = PhonemeInventory::build({"a1"}, {});
  CHECK(inv.size() == 5);
  for (int i = 0; i < 4; ++i) CHECK(inv.symbol(i).language == Language::SPECIAL);
  CHECK(inv.symbol(4).language == Language::MAN);
}

TEST_CASE("default inventory matches the frozen golden file") {
  const auto inv = PhonemeInventory::default_inventory();
  // SPECIAL(4) + initials(21) + finals(35)*tones(5) + ARPAbet(38... counted
  // from the shipped tables and frozen below)
  CHECK(inv.size() == 239);

  const std::string golden =
      mltts::testing::read_file(std::string(MLTTS_GOLDEN_DIR) + "/default_inventory.json");
  REQUIRE(!golden.empty());
  CHECK(inv.to_json() == golden);

  // serialization round trip is byte-identical
  const auto back = PhonemeInventory::from_json(inv.to_json());
  CHECK(back.to_json() == inv.to_json());
}

TEST_CASE("parse maps scope-tagged tokens and appends EOS") {
  const auto inv = PhonemeInventory::default_inventory();
  const auto ids = inv.parse("|MAN| n i3 h ao3");
  REQUIRE(ids.size() == 5);
  CHECK(ids.back() == inv.eos_id());
  for (size_t i = 0; i + 1 < ids.size(); ++i)
    CHECK(inv.symbol(ids[i]).language == Language::MAN);
  CHECK(inv.classify(ids) == UttLanguage::MAN);

  const auto mixed = inv.parse("|MAN| n i3 WB |ENG| HH AH L OW SIL");
  CHECK(inv.classify(mixed) == UttLanguage::MIX);
}

TEST_CASE("parse error paths") {
  const auto inv = PhonemeInventory::default_inventory();
  CHECK_THROWS_AS(inv.parse(""), DataError);
  CHECK_THROWS_AS(inv.parse("|MAN| |ENG|"), DataError);
  CHECK_THROWS_WITH_AS(inv.parse("n i3"), doctest::Contains("scope"), DataError);
  CHECK_THROWS_WITH_AS(inv.parse("|MAN| n qq7"), doctest::Contains("qq7"), DataError);
  CHECK_THROWS_WITH_AS(inv.parse("|MAN| n qq7"), doctest::Contains("position 3"), DataError);
  CHECK_THROWS_WITH_AS(inv.parse("|MAN| n qq7"), doctest::Contains("MAN"), DataError);
  // an English token under Mandarin scope is unknown there
  CHECK_THROWS_AS(inv.parse("|MAN| AA"), DataError);
}

TEST_CASE("render/parse round trip is a fixed point") {
  const auto inv = PhonemeInventory::default_inventory();
  const std::vector<std::string> cases = {
      "|MAN| n i3 h ao3",
      "|MAN| n i3 WB |ENG| HH AH L OW SIL |MAN| a1",
      "SIL |ENG| P IY S SIL",
      "|ENG| K AE T WB D AO G",
  };
  for (const auto& s : cases) {
    const auto ids = inv.parse(s);
    const std::string canonical = inv.render(ids);
    const auto ids2 = inv.parse(canonical);
    CHECK(ids2 == ids);
    CHECK(inv.render(ids2) == canonical);
  }
}

TEST_CASE("random valid token streams always stay within the vocabulary") {
  const auto inv = PhonemeInventory::default_inventory();
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    std::string s;
    const int n = 1 + static_cast<int>(rng.integer(12));
    bool tagged = false;
    for (int k = 0; k < n; ++k) {
      const auto roll = rng.integer(10);
      if (!tagged || roll < 2) {
        s += rng.integer(2) ? " |MAN|" : " |ENG|";
        tagged = true;
      }
      const int id = 4 + static_cast<int>(rng.integer(static_cast<uint64_t>(inv.size() - 4)));
      const auto& sym = inv.symbol(id);
      if (sym.language == Language::MAN) s += " |MAN|";
      if (sym.language == Language::ENG) s += " |ENG|";
      s += " " + sym.label;
    }
    const auto ids = inv.parse(s);
    CHECK(!ids.empty());
    for (int id : ids) {
      CHECK(id >= 0);
      CHECK(id < inv.size());
    }
  }
}

TEST_CASE("manifest loading, stats and language classification") {
  TempDir tmp("manifest");
  const auto inv = PhonemeInventory::default_inventory();
  const std::string path = (tmp.path() / "corpus.jsonl").string();
  {
    std::ofstream f(path);
    f << R"({"id":"u0","speaker":0,"phonemes":"|MAN| n i3","audio":"u0.wav"})" << "\n";
    f << R"({"id":"u1","speaker":0,"phonemes":"|ENG| K AE T","audio":"u1.wav"})" << "\n";
    f << R"({"id":"u2","speaker":1,"phonemes":"|MAN| h ao3 |ENG| OW","audio":"u2.wav"})" << "\n";
    f << R"({"id":"u3","speaker":1,"phonemes":"|MAN| a1 SIL","audio":"u3.wav","language":"MAN"})"
      << "\n";
  }
  CorpusStats stats;
  const auto records = load_manifest(path, inv, false, &stats);
  REQUIRE(records.size() == 4);
  CHECK(stats.per_speaker.at(0) == 2);
  CHECK(stats.per_speaker.at(1) == 2);
  CHECK(stats.per_language.at("MAN") == 2);
  CHECK(stats.per_language.at("ENG") == 1);
  CHECK(stats.per_language.at("MIX") == 1);
  CHECK(records[2].language == UttLanguage::MIX);
  CHECK(records[0].phoneme_ids.back() == inv.eos_id());
}

TEST_CASE("empty manifest loads as an empty corpus") {
  TempDir tmp("manifest_empty");
  const std::string path = (tmp.path() / "empty.jsonl").string();
  std::ofstream(path).close();
  CorpusStats stats;
  const auto records = load_manifest(path, PhonemeInventory::default_inventory(), false, &stats);
  CHECK(records.empty());
  CHECK(stats.n_records == 0);
}

TEST_CASE("manifest schema violations carry line numbers") {
  TempDir tmp("manifest_bad");
  const auto inv = PhonemeInventory::default_inventory();
  const std::string path = (tmp.path() / "bad.jsonl").string();
  {
    std::ofstream f(path);
    f << R"({"id":"u0","speaker":0,"phonemes":"|MAN| n i3","audio":"u0.wav"})" << "\n";
    f << R"({"id":"u1","speaker":0})" << "\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(path, inv, false), doctest::Contains("line 2"), DataError);

  {
    std::ofstream f(path);
    f << R"({"id":"u0","speaker":0,"phonemes":"|MAN| n i3","language":"ENG","audio":"a.wav"})"
      << "\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(path, inv, false), doctest::Contains("contradicts"),
                       DataError);

  {
    std::ofstream f(path);
    f << "not json at all\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(path, inv, false), doctest::Contains("line 1"), DataError);
}

TEST_CASE("manifest with dangling audio paths lists the missing files") {
  TempDir tmp("manifest_dangling");
  const auto inv = PhonemeInventory::default_inventory();
  const std::string path = (tmp.path() / "corpus.jsonl").string();
  {
    std::ofstream f(path);
    f << R"({"id":"u0","speaker":0,"phonemes":"|MAN| n i3","audio":"gone1.wav"})" << "\n";
    f << R"({"id":"u1","speaker":0,"phonemes":"|MAN| a1","audio":"gone2.wav"})" << "\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(path, inv, true),
                       doctest::Contains("gone1.wav"), DataError);
  CHECK_THROWS_WITH_AS(load_manifest(path, inv, true),
                       doctest::Contains("gone2.wav"), DataError);
  // without the audio requirement it loads fine
  CHECK(load_manifest(path, inv, false).size() == 2);
}

TEST_CASE("manifest write/load round trip") {
  TempDir tmp("manifest_rt");
  const auto inv = PhonemeInventory::default_inventory();
  std::vector<UtteranceRecord> records(2);
  records[0].id = "a";
  records[0].speaker = 3;
  records[0].phonemes = "|MAN| n i3";
  records[0].phoneme_ids = inv.parse(records[0].phonemes);
  records[0].language = inv.classify(records[0].phoneme_ids);
  records[0].audio = "a.wav";
  records[1].id = "b";
  records[1].speaker = 4;
  records[1].phonemes = "|ENG| K AE T";
  records[1].phoneme_ids = inv.parse(records[1].phonemes);
  records[1].language = inv.classify(records[1].phoneme_ids);
  records[1].audio = "b.wav";

  const std::string path = (tmp.path() / "m.jsonl").string();
  write_manifest(path, records);
  const auto back = load_manifest(path, inv, false);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "a");
  CHECK(back[0].speaker == 3);
  CHECK(back[0].phoneme_ids == records[0].phoneme_ids);
  CHECK(back[1].language == UttLanguage::ENG);
}
