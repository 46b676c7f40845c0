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

#include "mltts/synth_corpus.hpp"

#include <cmath>
#include <filesystem>

#include "mltts/audio.hpp"
#include "mltts/rng.hpp"

namespace mltts::train {

namespace fs = std::filesystem;
using text::Language;
using text::PhonemeInventory;
using text::UttLanguage;

namespace {

// Small fixed pools so a toy model can cover the space quickly.
const char* kManPool[] = {"a1", "i3", "u2", "e4", "ao3", "n", "m", "sh", "ang1", "ong4"};
const char* kEngPool[] = {"AA", "IY", "UW", "EH", "K", "S", "T", "OW", "NG", "AE"};

struct Formants {
  double f1, f2, a1, a2;
};

// Phoneme identity -> fixed formant chord; the two languages sit in
// disjoint bands so encoder representations can separate them.
Formants formants_for(int phoneme_id, Language lang) {
  const uint64_t h = fnv1a(&phoneme_id, sizeof(phoneme_id));
  const double u1 = static_cast<double>(h % 1000) / 1000.0;
  const double u2 = static_cast<double>((h / 1000) % 1000) / 1000.0;
  Formants f;
  if (lang == Language::MAN) {
    f.f1 = 280.0 + 620.0 * u1;   // 280..900
    f.f2 = 950.0 + 850.0 * u2;   // 950..1800
  } else {
    f.f1 = 1900.0 + 700.0 * u1;  // 1900..2600
    f.f2 = 2700.0 + 900.0 * u2;  // 2700..3600
  }
  f.a1 = 0.45;
  f.a2 = 0.28;
  return f;
}

void append_tone(std::vector<double>& samples, double seconds, double f0, const Formants& f,
                 int rate) {
  const auto n = static_cast<size_t>(seconds * rate);
  const size_t ramp = static_cast<size_t>(0.005 * rate);
  // formants glide by ~12% across the phone, so every frame is
  // position-informative rather than a stationary chord
  const double glide = 0.12;
  double phase0 = 0.0, phase1 = 0.0, phase2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double u = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    const double sweep = 1.0 - glide / 2.0 + glide * u;
    phase0 += 2.0 * M_PI * f0 / rate;
    phase1 += 2.0 * M_PI * f.f1 * sweep / rate;
    phase2 += 2.0 * M_PI * f.f2 * sweep / rate;
    double s = 0.22 * std::sin(phase0) + f.a1 * std::sin(phase1) + f.a2 * std::sin(phase2);
    double env = 1.0;
    if (i < ramp) env = static_cast<double>(i) / ramp;
    if (n - i <= ramp) env = std::min(env, static_cast<double>(n - i) / ramp);
    samples.push_back(s * env);
  }
}

void append_silence(std::vector<double>& samples, double seconds, int rate) {
  samples.insert(samples.end(), static_cast<size_t>(seconds * rate), 0.0);
}

} // namespace

SynthCorpusResult generate_synth_corpus(const SynthCorpusSpec& spec, const PhonemeInventory& inv) {
  if (spec.n_speakers < 1) throw ConfigError("synth corpus: need at least one speaker");
  if (spec.tokens_min < 1 || spec.tokens_max < spec.tokens_min)
    throw ConfigError("synth corpus: bad token count range");
  fs::create_directories(fs::path(spec.out_dir) / "wav");

  std::vector<int> man_ids, eng_ids;
  for (const char* label : kManPool) {
    const auto id = inv.find(label, Language::MAN);
    if (!id) throw ConfigError(std::string("synth corpus: inventory lacks MAN phoneme ") + label);
    man_ids.push_back(*id);
  }
  for (const char* label : kEngPool) {
    const auto id = inv.find(label, Language::ENG);
    if (!id) throw ConfigError(std::string("synth corpus: inventory lacks ENG phoneme ") + label);
    eng_ids.push_back(*id);
  }

  Rng rng(spec.seed);
  const int rate = dsp::kCanonicalSampleRate;
  std::vector<text::UtteranceRecord> records;
  int utt_index = 0;

  const auto make_utterance = [&](UttLanguage lang, int speaker) {
    const double f0 = 110.0 + 26.0 * speaker;
    const double speaker_shift = 1.0 + 0.03 * speaker;
    const int n_tokens =
        spec.tokens_min + static_cast<int>(rng.integer(
                              static_cast<uint64_t>(spec.tokens_max - spec.tokens_min + 1)));

    std::string phonemes = "SIL";
    std::vector<double> samples;
    append_silence(samples, 0.05, rate);
    Language current = Language::SPECIAL;
    for (int k = 0; k < n_tokens; ++k) {
      Language token_lang;
      switch (lang) {
        case UttLanguage::MAN: token_lang = Language::MAN; break;
        case UttLanguage::ENG: token_lang = Language::ENG; break;
        default: token_lang = (k < (n_tokens + 1) / 2) ? Language::MAN : Language::ENG; break;
      }
      const auto& pool = token_lang == Language::MAN ? man_ids : eng_ids;
      const int id = pool[static_cast<size_t>(rng.integer(pool.size()))];
      if (token_lang != current) {
        phonemes += token_lang == Language::MAN ? " |MAN|" : " |ENG|";
        current = token_lang;
      }
      phonemes += " " + inv.symbol(id).label;
      const double dur =
          rng.uniform(spec.phone_seconds_min, spec.phone_seconds_max);
      Formants f = formants_for(id, token_lang);
      f.f1 *= speaker_shift;
      f.f2 *= speaker_shift;
      append_tone(samples, dur, f0, f, rate);
    }
    phonemes += " SIL";
    append_silence(samples, 0.06, rate);

    // normalize peak
    double peak = 0.0;
    for (double s : samples) peak = std::max(peak, std::abs(s));
    if (peak > 0)
      for (double& s : samples) s *= 0.7 / peak;

    text::UtteranceRecord rec;
    rec.id = "spk" + std::to_string(speaker) + "_utt" + std::to_string(utt_index++);
    rec.speaker = speaker;
    rec.phonemes = phonemes;
    rec.phoneme_ids = inv.parse(phonemes);
    rec.language = inv.classify(rec.phoneme_ids);
    rec.audio = "wav/" + rec.id + ".wav";

    dsp::AudioClip clip;
    clip.sample_rate = rate;
    clip.samples = std::move(samples);
    dsp::wav_write((fs::path(spec.out_dir) / rec.audio).string(), clip);
    records.push_back(std::move(rec));
  };

  const auto speaker_for = [&](int i) { return i % spec.n_speakers; };
  int produced = 0;
  for (int i = 0; i < spec.utterances_man; ++i) make_utterance(UttLanguage::MAN, speaker_for(produced++));
  for (int i = 0; i < spec.utterances_eng; ++i) make_utterance(UttLanguage::ENG, speaker_for(produced++));
  for (int i = 0; i < spec.utterances_mix; ++i) make_utterance(UttLanguage::MIX, speaker_for(produced++));

  SynthCorpusResult result;
  result.manifest_path = (fs::path(spec.out_dir) / "corpus.jsonl").string();
  text::write_manifest(result.manifest_path, records);
  result.stats = text::corpus_stats(records);
  return result;
}

} // namespace mltts::train
