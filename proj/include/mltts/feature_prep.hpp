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

#include "mltts/features_io.hpp"
#include "mltts/manifest.hpp"

namespace mltts::train {

// Batch pipeline: read -> (optional) resample to 24 kHz -> trim silence ->
// log features -> corpus min-max stats -> normalized caches.
// Outputs <out_dir>/<id>.ptfp plus <out_dir>/stats.json. A complete, valid
// cache set is reused as-is; any gap triggers a full recompute because the
// normalization stats are corpus-wide.
struct FeaturePrepOptions {
  dsp::FeatureConfig features;
  bool resample = true;
  double trim_threshold_db = -40.0;
  double trim_tail_ms = 200.0;
  int jobs = 1;
};

struct FeaturePrepResult {
  int n_files = 0;
  int cache_hits = 0;
  std::map<std::string, int> frames_per_file;
  dsp::NormStats stats;
};

FeaturePrepResult prepare_corpus_features(const std::string& manifest_path,
                                          const text::PhonemeInventory& inv,
                                          const std::string& out_dir,
                                          const FeaturePrepOptions& options);

} // namespace mltts::train
