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
#include <vector>

#include "mltts/errors.hpp"

namespace mltts::dsp {

inline constexpr int kCanonicalSampleRate = 24000;

struct AudioClip {
  std::vector<double> samples; // in [-1, 1]
  int sample_rate = kCanonicalSampleRate;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// PCM16 mono WAV. Parse errors name the offending chunk.
AudioClip wav_read(const std::string& path);
void wav_write(const std::string& path, const AudioClip& clip);

// Windowed-sinc resampler.
AudioClip resample(const AudioClip& clip, int target_rate);

// Removes everything before the first sample above threshold and truncates
// the trailing sub-threshold region to tail_ms. Fully silent input is an
// error.
AudioClip trim_silence(const AudioClip& clip, double threshold_db = -40.0, double tail_ms = 200.0);

} // namespace mltts::dsp
