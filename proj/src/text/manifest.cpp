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

#include "mltts/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mltts::text {

namespace fs = std::filesystem;

std::vector<UtteranceRecord> load_manifest(const std::string& path, const PhonemeInventory& inv,
                                           bool require_audio, CorpusStats* stats) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();

  std::vector<UtteranceRecord> records;
  std::vector<std::string> missing_audio;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // skip blank lines
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                      ": bad JSON: " + e.what());
    }
    UtteranceRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      rec.speaker = j.at("speaker").get<int>();
      rec.phonemes = j.at("phonemes").get<std::string>();
      rec.audio = j.value("audio", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                      ": schema violation: " + e.what());
    }
    if (rec.speaker < 0)
      throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                      ": negative speaker id");
    try {
      rec.phoneme_ids = inv.parse(rec.phonemes);
      rec.language = inv.classify(rec.phoneme_ids);
    } catch (const DataError& e) {
      throw DataError("manifest " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("language")) {
      const auto declared = utt_language_from_name(j["language"].get<std::string>());
      if (declared != rec.language)
        throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                        ": declared language " + utt_language_name(declared) +
                        " contradicts derived " + utt_language_name(rec.language));
    }
    if (!rec.audio.empty()) {
      const fs::path p = fs::path(rec.audio).is_absolute() ? fs::path(rec.audio)
                                                           : base / rec.audio;
      rec.audio_resolved = p.string();
      if (require_audio && !fs::exists(p)) missing_audio.push_back(rec.audio);
    } else if (require_audio) {
      missing_audio.push_back(rec.id + " (no audio field)");
    }
    records.push_back(std::move(rec));
  }
  if (!missing_audio.empty()) {
    std::ostringstream msg;
    msg << "manifest " << path << ": " << missing_audio.size() << " missing audio file(s):";
    for (const auto& m : missing_audio) msg << ' ' << m;
    throw DataError(msg.str());
  }
  if (stats) *stats = corpus_stats(records);
  return records;
}

void write_manifest(const std::string& path, const std::vector<UtteranceRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  for (const auto& rec : records) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["speaker"] = rec.speaker;
    j["phonemes"] = rec.phonemes;
    j["audio"] = rec.audio;
    j["language"] = utt_language_name(rec.language);
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("failed writing manifest: " + path);
}

CorpusStats corpus_stats(const std::vector<UtteranceRecord>& records) {
  CorpusStats stats;
  stats.n_records = static_cast<int>(records.size());
  for (const auto& rec : records) {
    ++stats.per_speaker[rec.speaker];
    ++stats.per_language[utt_language_name(rec.language)];
  }
  return stats;
}

} // namespace mltts::text
