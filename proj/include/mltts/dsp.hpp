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

#include <complex>
#include <optional>
#include <vector>

#include "mltts/array.hpp"
#include "mltts/audio.hpp"

namespace mltts::dsp {

// 24 kHz defaults: 2048-point FFT (1025 bins), 50 ms window, 12.5 ms hop.
struct StftConfig {
  int n_fft = 2048;
  int win_length = 1200;
  int hop_length = 300;
  int sample_rate = kCanonicalSampleRate;

  int n_bins() const { return n_fft / 2 + 1; }
  void validate() const;
};

struct FeatureConfig {
  StftConfig stft;
  int n_mels = 80;
  double fmin = 20.0;
  double fmax = 12000.0;
  double log_floor = 1e-5;
};

// Complex STFT, frames centered via reflect padding:
// n_frames = 1 + floor(len / hop).
struct Spectrogram {
  int n_frames = 0;
  int n_bins = 0;
  std::vector<std::complex<double>> v; // row-major [n_frames, n_bins]

  std::complex<double>& at(int t, int b) { return v[static_cast<size_t>(t) * n_bins + b]; }
  std::complex<double> at(int t, int b) const { return v[static_cast<size_t>(t) * n_bins + b]; }
};

Spectrogram stft(const std::vector<double>& samples, const StftConfig& cfg);
Spectrogram stft(const AudioClip& clip, const StftConfig& cfg);

// Weighted overlap-add inverse; returns out_len samples (pass -1 for the
// natural length (n_frames - 1) * hop).
std::vector<double> istft(const Spectrogram& spec, const StftConfig& cfg, int64_t out_len = -1);

Array<double> magnitude(const Spectrogram& spec);

// Triangular, area-normalized filters on the mel scale
// m = 2595 log10(1 + f/700); [n_mels, n_fft/2+1].
Array<double> mel_filterbank(int n_fft, int n_mels, double fmin, double fmax, int sample_rate);

// Per-corpus min/max of the log features, used to map into [0,1] and back.
struct NormStats {
  double mel_min = 0.0, mel_max = 0.0;
  double lin_min = 0.0, lin_max = 0.0;
};

struct FeaturePair {
  Array<float> mel;    // [T, n_mels]
  Array<float> linear; // [T, n_bins]
  double frame_shift_ms = 12.5;
  double frame_length_ms = 50.0;
};

// Raw log-magnitude features before normalization.
struct LogFeatures {
  Array<double> mel;
  Array<double> linear;
};

LogFeatures compute_log_features(const AudioClip& clip, const FeatureConfig& cfg);

NormStats stats_of(const std::vector<const LogFeatures*>& feats);

FeaturePair normalize_features(const LogFeatures& logf, const NormStats& stats,
                               const FeatureConfig& cfg);

// One-clip convenience: normalization stats default to the clip's own range.
FeaturePair extract_features(const AudioClip& clip, const FeatureConfig& cfg,
                             const NormStats* stats = nullptr);

double normalize_value(double x, double lo, double hi);
double denormalize_value(double x, double lo, double hi);

// Map a normalized [0,1] linear-spectrogram prediction back to magnitudes.
Array<double> denormalize_linear(const Array<float>& normalized, const NormStats& stats,
                                 const FeatureConfig& cfg);

// Iterative phase reconstruction (alternating projections, seeded random
// initial phase). The spectral-convergence error ||(|STFT(x)| - M)|| / ||M||
// per iteration is appended to *errors when given; at momentum == 0 (the
// default, plain Griffin-Lim) it is non-increasing.
AudioClip griffin_lim(const Array<double>& linear_mag, const StftConfig& cfg, int n_iters = 60,
                      uint64_t seed = 0, std::vector<double>* errors = nullptr,
                      double momentum = 0.0);

} // namespace mltts::dsp
