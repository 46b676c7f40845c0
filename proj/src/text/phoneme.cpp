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

#include "mltts/phoneme.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mltts::text {

namespace {

const char* kSpecialLabels[] = {"PAD", "EOS", "SIL", "WB"};

const char* kPinyinInitials[] = {"b", "c", "ch", "d", "f", "g",  "h", "j", "k", "l", "m",
                                 "n", "p", "q",  "r", "s", "sh", "t", "x", "z", "zh"};

const char* kPinyinFinals[] = {"a",   "ai",  "an",  "ang",  "ao", "e",   "ei",  "en",  "eng",
                               "er",  "i",   "ia",  "ian",  "iang", "iao", "ie", "in",  "ing",
                               "iong", "iu", "o",   "ong",  "ou", "u",   "ua",  "uai", "uan",
                               "uang", "ui", "un",  "uo",   "v",  "van", "ve",  "vn"};

// Stress-collapsed ARPAbet.
const char* kArpabet[] = {"AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH",
                          "EH", "ER", "EY", "F",  "G",  "HH", "IH", "IY", "JH", "K",
                          "L",  "M",  "N",  "NG", "OW", "OY", "P",  "R",  "S",  "SH",
                          "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};

std::string language_json_name(Language lang) {
  switch (lang) {
    case Language::SPECIAL: return "SPECIAL";
    case Language::MAN: return "MAN";
    case Language::ENG: return "ENG";
  }
  return "SPECIAL";
}

Language language_from_json_name(const std::string& s) {
  if (s == "SPECIAL") return Language::SPECIAL;
  if (s == "MAN") return Language::MAN;
  if (s == "ENG") return Language::ENG;
  throw DataError("unknown phoneme language tag: " + s);
}

} // namespace

std::string language_name(Language lang) { return language_json_name(lang); }

std::string utt_language_name(UttLanguage lang) {
  switch (lang) {
    case UttLanguage::MAN: return "MAN";
    case UttLanguage::ENG: return "ENG";
    case UttLanguage::MIX: return "MIX";
  }
  return "MIX";
}

UttLanguage utt_language_from_name(const std::string& name) {
  if (name == "MAN") return UttLanguage::MAN;
  if (name == "ENG") return UttLanguage::ENG;
  if (name == "MIX") return UttLanguage::MIX;
  throw DataError("unknown utterance language: " + name + " (expected MAN, ENG or MIX)");
}

PhonemeInventory PhonemeInventory::build(std::vector<std::string> man_phones,
                                         std::vector<std::string> eng_phones) {
  const auto check_dups = [](const std::vector<std::string>& xs, const char* lang) {
    std::set<std::string> seen;
    for (const auto& x : xs) {
      if (x.empty()) throw ConfigError(std::string("empty phoneme label in ") + lang + " table");
      if (!seen.insert(x).second)
        throw ConfigError("duplicate phoneme label '" + x + "' in " + lang + " table");
    }
  };
  check_dups(man_phones, "MAN");
  check_dups(eng_phones, "ENG");
  std::sort(man_phones.begin(), man_phones.end());
  std::sort(eng_phones.begin(), eng_phones.end());

  PhonemeInventory inv;
  for (const char* s : kSpecialLabels)
    inv.symbols_.push_back({s, Language::SPECIAL, static_cast<int>(inv.symbols_.size())});
  for (auto& s : man_phones)
    inv.symbols_.push_back({std::move(s), Language::MAN, static_cast<int>(inv.symbols_.size())});
  for (auto& s : eng_phones)
    inv.symbols_.push_back({std::move(s), Language::ENG, static_cast<int>(inv.symbols_.size())});
  inv.index();
  return inv;
}

PhonemeInventory PhonemeInventory::default_inventory() {
  std::vector<std::string> man;
  for (const char* s : kPinyinInitials) man.emplace_back(s);
  for (const char* f : kPinyinFinals)
    for (int tone = 1; tone <= 5; ++tone) man.push_back(std::string(f) + std::to_string(tone));
  std::vector<std::string> eng;
  for (const char* s : kArpabet) eng.emplace_back(s);
  return build(std::move(man), std::move(eng));
}

void PhonemeInventory::index() {
  by_key_.clear();
  for (const auto& sym : symbols_)
    by_key_[{static_cast<int>(sym.language), sym.label}] = sym.id;
}

const PhonemeSymbol& PhonemeInventory::symbol(int id) const {
  if (id < 0 || id >= size())
    throw DataError("phoneme id " + std::to_string(id) + " out of range [0," +
                    std::to_string(size()) + ")");
  return symbols_[static_cast<size_t>(id)];
}

std::optional<int> PhonemeInventory::find(const std::string& label, Language lang) const {
  const auto it = by_key_.find({static_cast<int>(lang), label});
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> PhonemeInventory::parse(const std::string& s) const {
  std::istringstream stream(s);
  std::string token;
  std::optional<Language> scope;
  std::vector<int> ids;
  int position = 0;
  while (stream >> token) {
    ++position;
    if (token == "|MAN|") {
      scope = Language::MAN;
      continue;
    }
    if (token == "|ENG|") {
      scope = Language::ENG;
      continue;
    }
    if (auto special = find(token, Language::SPECIAL)) {
      ids.push_back(*special);
      continue;
    }
    if (!scope)
      throw DataError("phoneme token '" + token + "' at position " + std::to_string(position) +
                      " appears before any |MAN| or |ENG| scope tag");
    if (auto id = find(token, *scope)) {
      ids.push_back(*id);
      continue;
    }
    throw DataError("unknown phoneme token '" + token + "' at position " +
                    std::to_string(position) + " under language " + language_name(*scope));
  }
  if (ids.empty()) throw DataError("phoneme string contains no phoneme tokens");
  ids.push_back(eos_id());
  return ids;
}

std::string PhonemeInventory::render(const std::vector<int>& ids) const {
  std::ostringstream out;
  std::optional<Language> scope;
  bool first = true;
  for (int id : ids) {
    const PhonemeSymbol& sym = symbol(id);
    if (id == eos_id() || id == pad_id()) continue;
    if (sym.language != Language::SPECIAL && scope != sym.language) {
      if (!first) out << ' ';
      out << (sym.language == Language::MAN ? "|MAN|" : "|ENG|");
      scope = sym.language;
      first = false;
    }
    if (!first) out << ' ';
    out << sym.label;
    first = false;
  }
  return out.str();
}

UttLanguage PhonemeInventory::classify(const std::vector<int>& ids) const {
  bool man = false, eng = false;
  for (int id : ids) {
    const Language lang = symbol(id).language;
    man = man || lang == Language::MAN;
    eng = eng || lang == Language::ENG;
  }
  if (man && eng) return UttLanguage::MIX;
  if (man) return UttLanguage::MAN;
  if (eng) return UttLanguage::ENG;
  throw DataError("phoneme sequence has no language-bearing symbols");
}

std::string PhonemeInventory::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  nlohmann::json syms = nlohmann::json::array();
  for (const auto& s : symbols_)
    syms.push_back({{"label", s.label}, {"language", language_json_name(s.language)}});
  j["symbols"] = std::move(syms);
  return j.dump(2) + "\n";
}

PhonemeInventory PhonemeInventory::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad inventory JSON: ") + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw DataError("unsupported inventory version");
  if (!j.contains("symbols") || !j["symbols"].is_array())
    throw DataError("inventory JSON missing 'symbols' array");
  PhonemeInventory inv;
  for (const auto& s : j["symbols"]) {
    PhonemeSymbol sym;
    sym.label = s.at("label").get<std::string>();
    sym.language = language_from_json_name(s.at("language").get<std::string>());
    sym.id = static_cast<int>(inv.symbols_.size());
    inv.symbols_.push_back(std::move(sym));
  }
  if (inv.size() < 4 || inv.symbols_[0].label != "PAD" || inv.symbols_[1].label != "EOS" ||
      inv.symbols_[2].label != "SIL" || inv.symbols_[3].label != "WB")
    throw DataError("inventory JSON does not start with the SPECIAL block PAD,EOS,SIL,WB");
  inv.index();
  if (static_cast<int>(inv.by_key_.size()) != inv.size())
    throw DataError("inventory JSON contains duplicate (label, language) pairs");
  return inv;
}

} // namespace mltts::text
