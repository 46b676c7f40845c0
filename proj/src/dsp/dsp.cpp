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

#include "mltts/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>

#include "mltts/rng.hpp"

namespace mltts::dsp {

namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex g_fftw_plan_mutex;

class RealFft {
public:
  explicit RealFft(int n) : n_(n) {
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    re_ = fftw_alloc_real(static_cast<size_t>(n_));
    cx_ = fftw_alloc_complex(static_cast<size_t>(n_ / 2 + 1));
    fwd_ = fftw_plan_dft_r2c_1d(n_, re_, cx_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(n_, cx_, re_, FFTW_ESTIMATE);
  }

  ~RealFft() {
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(re_);
    fftw_free(cx_);
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  void forward(const double* in, std::complex<double>* out) {
    std::memcpy(re_, in, sizeof(double) * static_cast<size_t>(n_));
    fftw_execute(fwd_);
    for (int b = 0; b <= n_ / 2; ++b) out[b] = {cx_[b][0], cx_[b][1]};
  }

  // Includes the 1/n normalization.
  void inverse(const std::complex<double>* in, double* out) {
    for (int b = 0; b <= n_ / 2; ++b) {
      cx_[b][0] = in[b].real();
      cx_[b][1] = in[b].imag();
    }
    fftw_execute(inv_);
    const double scale = 1.0 / n_;
    for (int i = 0; i < n_; ++i) out[i] = re_[i] * scale;
  }

private:
  int n_;
  double* re_;
  fftw_complex* cx_;
  fftw_plan fwd_, inv_;
};

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

std::vector<double> reflect_pad(const std::vector<double>& x, int pad) {
  const auto n = static_cast<int64_t>(x.size());
  std::vector<double> out(static_cast<size_t>(n + 2 * pad));
  for (int64_t i = 0; i < pad; ++i) out[static_cast<size_t>(i)] = x[static_cast<size_t>(pad - i)];
  std::copy(x.begin(), x.end(), out.begin() + pad);
  for (int64_t i = 0; i < pad; ++i)
    out[static_cast<size_t>(pad + n + i)] = x[static_cast<size_t>(n - 2 - i)];
  return out;
}

// Frame analysis of an already-padded signal; no further padding.
Spectrogram stft_of_padded(const std::vector<double>& padded, const StftConfig& cfg) {
  const auto t_frames =
      1 + (static_cast<int64_t>(padded.size()) - cfg.win_length) / cfg.hop_length;
  const std::vector<double> window = hann_window(cfg.win_length);

  Spectrogram spec;
  spec.n_frames = static_cast<int>(t_frames);
  spec.n_bins = cfg.n_bins();
  spec.v.resize(static_cast<size_t>(t_frames) * spec.n_bins);

  RealFft fft(cfg.n_fft);
  std::vector<double> frame(static_cast<size_t>(cfg.n_fft), 0.0);
  for (int64_t t = 0; t < t_frames; ++t) {
    const double* src = padded.data() + t * cfg.hop_length;
    for (int i = 0; i < cfg.win_length; ++i)
      frame[static_cast<size_t>(i)] = src[i] * window[static_cast<size_t>(i)];
    std::fill(frame.begin() + cfg.win_length, frame.end(), 0.0);
    fft.forward(frame.data(), spec.v.data() + t * spec.n_bins);
  }
  return spec;
}

// Least-squares synthesis (weighted overlap-add) back to the padded-domain
// signal. Together with stft_of_padded this forms the projection pair the
// Griffin-Lim iteration runs on.
std::vector<double> istft_to_padded(const Spectrogram& spec, const StftConfig& cfg) {
  const int64_t padded_len =
      static_cast<int64_t>(spec.n_frames - 1) * cfg.hop_length + cfg.win_length;
  const std::vector<double> window = hann_window(cfg.win_length);
  std::vector<double> acc(static_cast<size_t>(padded_len), 0.0);
  std::vector<double> wsum(static_cast<size_t>(padded_len), 0.0);

  RealFft fft(cfg.n_fft);
  std::vector<double> frame(static_cast<size_t>(cfg.n_fft));
  for (int t = 0; t < spec.n_frames; ++t) {
    fft.inverse(spec.v.data() + static_cast<size_t>(t) * spec.n_bins, frame.data());
    double* dst = acc.data() + static_cast<int64_t>(t) * cfg.hop_length;
    double* wd = wsum.data() + static_cast<int64_t>(t) * cfg.hop_length;
    for (int i = 0; i < cfg.win_length; ++i) {
      dst[i] += frame[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
      wd[i] += window[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
    }
  }
  for (int64_t i = 0; i < padded_len; ++i)
    if (wsum[static_cast<size_t>(i)] > 1e-9)
      acc[static_cast<size_t>(i)] /= wsum[static_cast<size_t>(i)];
  return acc;
}

} // namespace

void StftConfig::validate() const {
  if (!(hop_length <= win_length && win_length <= n_fft))
    throw ConfigError("stft: need hop <= win <= n_fft, got hop=" + std::to_string(hop_length) +
                      " win=" + std::to_string(win_length) + " n_fft=" + std::to_string(n_fft));
  if (hop_length <= 0) throw ConfigError("stft: hop must be positive");
}

Spectrogram stft(const std::vector<double>& samples, const StftConfig& cfg) {
  cfg.validate();
  const auto len = static_cast<int64_t>(samples.size());
  if (len < cfg.win_length)
    throw DataError("stft: clip too short: " + std::to_string(len) + " samples < window " +
                    std::to_string(cfg.win_length));
  const int pad = cfg.win_length / 2;
  return stft_of_padded(reflect_pad(samples, pad), cfg);
}

Spectrogram stft(const AudioClip& clip, const StftConfig& cfg) {
  for (double s : clip.samples)
    if (!std::isfinite(s)) throw NumericError("stft: non-finite sample");
  return stft(clip.samples, cfg);
}

std::vector<double> istft(const Spectrogram& spec, const StftConfig& cfg, int64_t out_len) {
  cfg.validate();
  if (spec.n_bins != cfg.n_bins())
    throw DimensionError("istft: spectrogram has " + std::to_string(spec.n_bins) +
                         " bins, config expects " + std::to_string(cfg.n_bins()));
  const int pad = cfg.win_length / 2;
  const std::vector<double> acc = istft_to_padded(spec, cfg);
  const auto padded_len = static_cast<int64_t>(acc.size());
  if (out_len < 0) out_len = static_cast<int64_t>(spec.n_frames - 1) * cfg.hop_length;

  std::vector<double> out(static_cast<size_t>(std::max<int64_t>(out_len, 0)), 0.0);
  for (int64_t i = 0; i < out_len; ++i) {
    const int64_t src = i + pad;
    if (src >= 0 && src < padded_len) out[static_cast<size_t>(i)] = acc[static_cast<size_t>(src)];
  }
  return out;
}

Array<double> magnitude(const Spectrogram& spec) {
  Array<double> mag({spec.n_frames, spec.n_bins});
  for (size_t i = 0; i < spec.v.size(); ++i) mag.v[i] = std::abs(spec.v[i]);
  return mag;
}

Array<double> mel_filterbank(int n_fft, int n_mels, double fmin, double fmax, int sample_rate) {
  if (n_mels <= 0) throw ConfigError("mel_filterbank: n_mels must be positive");
  if (!(fmin < fmax && fmax <= sample_rate / 2.0))
    throw ConfigError("mel_filterbank: need fmin < fmax <= sample_rate/2");
  const int n_bins = n_fft / 2 + 1;
  const auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  const auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };

  const double m_lo = hz_to_mel(fmin), m_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[static_cast<size_t>(i)] = mel_to_hz(m_lo + (m_hi - m_lo) * i / (n_mels + 1));

  Array<double> bank({n_mels, n_bins});
  const double bin_hz = static_cast<double>(sample_rate) / n_fft;
  for (int m = 0; m < n_mels; ++m) {
    const double f0 = edges[static_cast<size_t>(m)], f1 = edges[static_cast<size_t>(m) + 1],
                 f2 = edges[static_cast<size_t>(m) + 2];
    const double area_norm = 2.0 / (f2 - f0);
    bool any = false;
    for (int b = 0; b < n_bins; ++b) {
      const double f = b * bin_hz;
      double w = 0.0;
      if (f >= f0 && f <= f1 && f1 > f0) {
        w = (f - f0) / (f1 - f0);
      } else if (f > f1 && f <= f2 && f2 > f1) {
        w = (f2 - f) / (f2 - f1);
      }
      if (w > 0.0) any = true;
      bank.at(m, b) = w * area_norm;
    }
    if (!any)
      throw ConfigError("mel_filterbank: filter " + std::to_string(m) +
                        " covers no FFT bin; n_mels too large for this n_fft");
  }
  // Every bin strictly inside (fmin, fmax) must carry weight somewhere.
  for (int b = 0; b < n_bins; ++b) {
    const double f = b * bin_hz;
    if (f <= fmin || f >= fmax) continue;
    double total = 0.0;
    for (int m = 0; m < n_mels; ++m) total += bank.at(m, b);
    if (total <= 0.0)
      throw ConfigError("mel_filterbank: FFT bin at " + std::to_string(f) +
                        " Hz has zero total weight");
  }
  return bank;
}

LogFeatures compute_log_features(const AudioClip& clip, const FeatureConfig& cfg) {
  if (clip.sample_rate != cfg.stft.sample_rate)
    throw DataError("features: clip rate " + std::to_string(clip.sample_rate) +
                    " Hz does not match configured " + std::to_string(cfg.stft.sample_rate) +
                    " Hz");
  const Spectrogram spec = stft(clip, cfg.stft);
  const Array<double> mag = magnitude(spec);
  const Array<double> bank =
      mel_filterbank(cfg.stft.n_fft, cfg.n_mels, cfg.fmin, cfg.fmax, cfg.stft.sample_rate);

  LogFeatures out;
  out.linear = Array<double>({spec.n_frames, spec.n_bins});
  for (size_t i = 0; i < mag.v.size(); ++i)
    out.linear.v[i] = std::log(std::max(mag.v[i], cfg.log_floor));

  out.mel = Array<double>({spec.n_frames, cfg.n_mels});
  for (int t = 0; t < spec.n_frames; ++t) {
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      for (int b = 0; b < spec.n_bins; ++b) acc += bank.at(m, b) * mag.at(t, b);
      out.mel.at(t, m) = std::log(std::max(acc, cfg.log_floor));
    }
  }
  return out;
}

NormStats stats_of(const std::vector<const LogFeatures*>& feats) {
  NormStats s;
  if (feats.empty() || feats[0]->mel.v.empty() || feats[0]->linear.v.empty())
    throw DataError("feature stats: no data");
  s.mel_min = s.mel_max = feats[0]->mel.v[0];
  s.lin_min = s.lin_max = feats[0]->linear.v[0];
  for (const LogFeatures* f : feats) {
    for (double x : f->mel.v) {
      s.mel_min = std::min(s.mel_min, x);
      s.mel_max = std::max(s.mel_max, x);
    }
    for (double x : f->linear.v) {
      s.lin_min = std::min(s.lin_min, x);
      s.lin_max = std::max(s.lin_max, x);
    }
  }
  return s;
}

double normalize_value(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span < 1e-12) return 0.0;
  return (x - lo) / span;
}

double denormalize_value(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span < 1e-12) return lo;
  return x * span + lo;
}

FeaturePair normalize_features(const LogFeatures& logf, const NormStats& stats,
                               const FeatureConfig& cfg) {
  FeaturePair out;
  out.frame_shift_ms = 1000.0 * cfg.stft.hop_length / cfg.stft.sample_rate;
  out.frame_length_ms = 1000.0 * cfg.stft.win_length / cfg.stft.sample_rate;
  out.mel = Array<float>(logf.mel.shape);
  for (size_t i = 0; i < logf.mel.v.size(); ++i)
    out.mel.v[i] = static_cast<float>(normalize_value(logf.mel.v[i], stats.mel_min, stats.mel_max));
  out.linear = Array<float>(logf.linear.shape);
  for (size_t i = 0; i < logf.linear.v.size(); ++i)
    out.linear.v[i] =
        static_cast<float>(normalize_value(logf.linear.v[i], stats.lin_min, stats.lin_max));
  return out;
}

FeaturePair extract_features(const AudioClip& clip, const FeatureConfig& cfg,
                             const NormStats* stats) {
  const LogFeatures logf = compute_log_features(clip, cfg);
  if (logf.mel.numel() == 0)
    throw DataError("features: no frames extracted (clip silent or empty after trimming)");
  NormStats own;
  if (!stats) {
    own = stats_of({&logf});
    stats = &own;
  }
  return normalize_features(logf, *stats, cfg);
}

Array<double> denormalize_linear(const Array<float>& normalized, const NormStats& stats,
                                 const FeatureConfig& cfg) {
  Array<double> mag(normalized.shape);
  for (size_t i = 0; i < normalized.v.size(); ++i) {
    const double logv = denormalize_value(normalized.v[i], stats.lin_min, stats.lin_max);
    mag.v[i] = std::exp(logv);
    if (mag.v[i] < cfg.log_floor) mag.v[i] = 0.0;
  }
  return mag;
}

AudioClip griffin_lim(const Array<double>& linear_mag, const StftConfig& cfg, int n_iters,
                      uint64_t seed, std::vector<double>* errors, double momentum) {
  if (n_iters < 1) throw ConfigError("griffin_lim: n_iters must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("griffin_lim: momentum must be in [0,1)");
  if (linear_mag.ndim() != 2 || linear_mag.cols() != cfg.n_bins())
    throw DimensionError("griffin_lim: magnitude shape " + shape_str(linear_mag.shape) +
                         " does not match " + std::to_string(cfg.n_bins()) + " bins");
  double mag_norm_sq = 0.0;
  for (double x : linear_mag.v) {
    if (!std::isfinite(x)) throw NumericError("griffin_lim: non-finite magnitude");
    if (x < 0.0) throw NumericError("griffin_lim: negative magnitude");
    mag_norm_sq += x * x;
  }
  const int t_frames = linear_mag.rows();
  const auto out_len = static_cast<int64_t>(t_frames - 1) * cfg.hop_length;

  AudioClip out;
  out.sample_rate = cfg.sample_rate;
  if (mag_norm_sq == 0.0) {
    out.samples.assign(static_cast<size_t>(std::max<int64_t>(out_len, 0)), 0.0);
    if (errors) errors->assign(static_cast<size_t>(n_iters), 0.0);
    return out;
  }

  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  Spectrogram s;
  s.n_frames = t_frames;
  s.n_bins = cfg.n_bins();
  s.v.resize(linear_mag.v.size());
  for (size_t i = 0; i < s.v.size(); ++i) {
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    s.v[i] = std::polar(linear_mag.v[i], phi);
  }

  const double mag_norm = std::sqrt(mag_norm_sq);
  std::vector<std::complex<double>> prev(s.v.size(), std::complex<double>(0.0, 0.0));
  for (int it = 0; it < n_iters; ++it) {
    const std::vector<double> x = istft_to_padded(s, cfg);
    const Spectrogram estimate = stft_of_padded(x, cfg);
    double err_sq = 0.0;
    for (size_t i = 0; i < s.v.size(); ++i) {
      const double d = std::abs(estimate.v[i]) - linear_mag.v[i];
      err_sq += d * d;
    }
    if (errors) errors->push_back(std::sqrt(err_sq) / mag_norm);
    // Project back onto the magnitude constraint set. momentum == 0 is the
    // plain alternating-projection update, whose convergence error is
    // provably non-increasing; momentum > 0 is the fast variant.
    for (size_t i = 0; i < s.v.size(); ++i) {
      std::complex<double> dir = estimate.v[i];
      if (momentum > 0.0) dir -= (momentum / (1.0 + momentum)) * prev[i];
      const double m = std::abs(dir);
      s.v[i] = m > 1e-12 ? dir * (linear_mag.v[i] / m)
                         : std::complex<double>(linear_mag.v[i], 0.0);
      if (momentum > 0.0) prev[i] = estimate.v[i];
    }
  }
  const std::vector<double> final_padded = istft_to_padded(s, cfg);
  const int pad = cfg.win_length / 2;
  out.samples.assign(static_cast<size_t>(std::max<int64_t>(out_len, 0)), 0.0);
  for (int64_t i = 0; i < out_len; ++i) {
    const int64_t src = i + pad;
    if (src >= 0 && src < static_cast<int64_t>(final_padded.size()))
      out.samples[static_cast<size_t>(i)] = final_padded[static_cast<size_t>(src)];
  }
  return out;
}

} // namespace mltts::dsp
