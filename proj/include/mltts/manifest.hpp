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

#pragma once

#include <map>
#include <string>
#include <vector>

#include "mltts/phoneme.hpp"

namespace mltts::text {

// One training example as declared in a JSON-lines manifest:
//   {"id": str, "speaker": int, "phonemes": str, "audio": str,
//    "language": "MAN"|"ENG"|"MIX" (optional, derived when absent)}
struct UtteranceRecord {
  std::string id;
  int speaker = 0;
  UttLanguage language = UttLanguage::MIX;
  std::vector<int> phoneme_ids; // ends with EOS
  std::string phonemes;         // source token stream
  std::string audio;            // path as written in the manifest
  std::string audio_resolved;   // resolved against the manifest directory
};

struct CorpusStats {
  int n_records = 0;
  std::map<int, int> per_speaker;
  std::map<std::string, int> per_language;
};

std::vector<UtteranceRecord> load_manifest(const std::string& path, const PhonemeInventory& inv,
                                           bool require_audio = false,
                                           CorpusStats* stats = nullptr);

void write_manifest(const std::string& path, const std::vector<UtteranceRecord>& records);

CorpusStats corpus_stats(const std::vector<UtteranceRecord>& records);

} // namespace mltts::text
