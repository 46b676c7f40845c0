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

#include "mltts/dsp.hpp"

namespace mltts::dsp {

// Flat binary feature container:
//   magic "PTFP" | version u32 | T u32 | mel_dim u32 | lin_dim u32
//   | mel f32 row-major | linear f32 row-major
// little-endian throughout.
void write_feature_cache(const std::string& path, const FeaturePair& features);
FeaturePair read_feature_cache(const std::string& path);

// Header-only probe for cache validation (returns false on any mismatch).
bool probe_feature_cache(const std::string& path, int* t_frames, int* mel_dim, int* lin_dim);

void write_norm_stats(const std::string& path, const NormStats& stats, int n_files);
NormStats read_norm_stats(const std::string& path);

} // namespace mltts::dsp
