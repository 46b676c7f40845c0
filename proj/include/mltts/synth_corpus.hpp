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

#include <string>

#include "mltts/manifest.hpp"

namespace mltts::train {

// Deterministic two-language toy corpus: every phoneme maps to a fixed
// formant chord, with the Mandarin and English pools occupying distinct
// frequency bands, plus a per-speaker pitch offset. Audio goes to
// <out_dir>/wav/, the manifest to <out_dir>/corpus.jsonl.
struct SynthCorpusSpec {
  std::string out_dir;
  int n_speakers = 2;
  int utterances_man = 4;
  int utterances_eng = 3;
  int utterances_mix = 3;
  int tokens_min = 4;
  int tokens_max = 7;
  double phone_seconds_min = 0.06;
  double phone_seconds_max = 0.11;
  uint64_t seed = 1;
};

struct SynthCorpusResult {
  std::string manifest_path;
  text::CorpusStats stats;
};

SynthCorpusResult generate_synth_corpus(const SynthCorpusSpec& spec,
                                        const text::PhonemeInventory& inv);

} // namespace mltts::train
