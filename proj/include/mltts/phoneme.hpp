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
#include <optional>
#include <string>
#include <vector>

#include "mltts/errors.hpp"

namespace mltts::text {

enum class Language { SPECIAL, MAN, ENG };

enum class UttLanguage { MAN, ENG, MIX };

std::string language_name(Language lang);
std::string utt_language_name(UttLanguage lang);
UttLanguage utt_language_from_name(const std::string& name);

struct PhonemeSymbol {
  std::string label;
  Language language = Language::SPECIAL;
  int id = 0;
};

// Language-tagged phoneme identities with dense ids. Id layout is fixed:
// SPECIAL block (PAD, EOS, SIL, WB), then Mandarin sorted, then English
// sorted, so identical inputs always produce identical tables.
class PhonemeInventory {
public:
  static PhonemeInventory build(std::vector<std::string> man_phones,
                                std::vector<std::string> eng_phones);

  // Shipped phone set: pinyin initials plus tone-carrying finals (tones 1-5
  // on the final), and stress-collapsed ARPAbet.
  static PhonemeInventory default_inventory();

  static PhonemeInventory from_json(const std::string& text);
  std::string to_json() const;

  int size() const { return static_cast<int>(symbols_.size()); }
  const PhonemeSymbol& symbol(int id) const;
  std::optional<int> find(const std::string& label, Language lang) const;

  int pad_id() const { return 0; }
  int eos_id() const { return 1; }
  int sil_id() const { return 2; }
  int word_boundary_id() const { return 3; }

  // Whitespace-separated tokens under |MAN| / |ENG| scope tags; SPECIAL
  // symbols resolve in any scope. Appends EOS.
  std::vector<int> parse(const std::string& s) const;

  // Canonical rendering: scope tags only at language changes, EOS/PAD
  // dropped. parse(render(parse(s))) == parse(s).
  std::string render(const std::vector<int>& ids) const;

  // MIX iff both Mandarin and English symbols occur.
  UttLanguage classify(const std::vector<int>& ids) const;

private:
  std::vector<PhonemeSymbol> symbols_;
  std::map<std::pair<int, std::string>, int> by_key_;

  void index();
};

} // namespace mltts::text
