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

#include "mltts/feature_prep.hpp"

#include <filesystem>
#include <future>

#include "mltts/audio.hpp"

namespace mltts::train {

namespace fs = std::filesystem;
using namespace mltts::dsp;

FeaturePrepResult prepare_corpus_features(const std::string& manifest_path,
                                          const text::PhonemeInventory& inv,
                                          const std::string& out_dir,
                                          const FeaturePrepOptions& options) {
  const auto records = text::load_manifest(manifest_path, inv, /*require_audio=*/true);
  fs::create_directories(out_dir);
  const std::string stats_path = (fs::path(out_dir) / "stats.json").string();

  FeaturePrepResult result;
  result.n_files = static_cast<int>(records.size());
  if (records.empty()) return result;

  // Cache is all-or-nothing: stats are corpus-wide.
  bool cache_complete = fs::exists(stats_path);
  std::map<std::string, int> cached_frames;
  if (cache_complete) {
    for (const auto& rec : records) {
      int t = 0, mel = 0, lin = 0;
      const std::string p = (fs::path(out_dir) / (rec.id + ".ptfp")).string();
      if (!probe_feature_cache(p, &t, &mel, &lin) || mel != options.features.n_mels ||
          lin != options.features.stft.n_bins()) {
        cache_complete = false;
        break;
      }
      cached_frames[rec.id] = t;
    }
  }
  if (cache_complete) {
    result.cache_hits = result.n_files;
    result.frames_per_file = std::move(cached_frames);
    result.stats = read_norm_stats(stats_path);
    return result;
  }

  const auto compute_one = [&](const text::UtteranceRecord& rec) {
    AudioClip clip = wav_read(rec.audio_resolved);
    if (clip.sample_rate != options.features.stft.sample_rate) {
      if (!options.resample)
        throw DataError("features: " + rec.audio + " is " + std::to_string(clip.sample_rate) +
                        " Hz and resampling is disabled");
      clip = resample(clip, options.features.stft.sample_rate);
    }
    clip = trim_silence(clip, options.trim_threshold_db, options.trim_tail_ms);
    return compute_log_features(clip, options.features);
  };

  std::vector<LogFeatures> logs(records.size());
  if (options.jobs > 1) {
    std::vector<std::future<LogFeatures>> futures;
    futures.reserve(records.size());
    for (const auto& rec : records)
      futures.push_back(std::async(std::launch::async, compute_one, rec));
    for (size_t i = 0; i < futures.size(); ++i) logs[i] = futures[i].get();
  } else {
    for (size_t i = 0; i < records.size(); ++i) logs[i] = compute_one(records[i]);
  }

  std::vector<const LogFeatures*> ptrs;
  ptrs.reserve(logs.size());
  for (const auto& l : logs) ptrs.push_back(&l);
  result.stats = stats_of(ptrs);

  for (size_t i = 0; i < records.size(); ++i) {
    const FeaturePair fp = normalize_features(logs[i], result.stats, options.features);
    write_feature_cache((fs::path(out_dir) / (records[i].id + ".ptfp")).string(), fp);
    result.frames_per_file[records[i].id] = fp.mel.rows();
  }
  write_norm_stats(stats_path, result.stats, result.n_files);
  return result;
}

} // namespace mltts::train
