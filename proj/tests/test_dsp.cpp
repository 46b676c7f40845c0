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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mltts/dsp.hpp"
#include "mltts/features_io.hpp"
#include "support.hpp"

using namespace mltts;
using namespace mltts::dsp;
using mltts::testing::TempDir;

namespace {

AudioClip sinusoid(double freq, double seconds, int rate = 24000, double amp = 0.6) {
  AudioClip clip;
  clip.sample_rate = rate;
  const auto n = static_cast<size_t>(seconds * rate);
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    clip.samples[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate);
  return clip;
}

// Best-lag, best-gain alignment before the SNR, since phase reconstruction
// is free to shift the signal.
double aligned_snr_db(const std::vector<double>& ref, const std::vector<double>& est,
                      int max_lag) {
  double best = -1e300;
  const auto n = static_cast<int64_t>(std::min(ref.size(), est.size()));
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double xy = 0, yy = 0, xx = 0;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t j = i + lag;
      if (j < 0 || j >= static_cast<int64_t>(est.size())) continue;
      xy += ref[static_cast<size_t>(i)] * est[static_cast<size_t>(j)];
      yy += est[static_cast<size_t>(j)] * est[static_cast<size_t>(j)];
      xx += ref[static_cast<size_t>(i)] * ref[static_cast<size_t>(i)];
    }
    if (yy <= 0 || xx <= 0) continue;
    const double gain = xy / yy;
    double err = 0;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t j = i + lag;
      const double e = (j < 0 || j >= static_cast<int64_t>(est.size()))
                           ? ref[static_cast<size_t>(i)]
                           : ref[static_cast<size_t>(i)] - gain * est[static_cast<size_t>(j)];
      err += e * e;
    }
    if (err <= 0) return 300.0;
    best = std::max(best, 10.0 * std::log10(xx / err));
  }
  return best;
}

} // namespace

TEST_CASE("stft of zero signal is all-zero magnitude") {
  AudioClip clip;
  clip.samples.assign(24000, 0.0);
  StftConfig cfg;
  const auto mag = magnitude(stft(clip, cfg));
  for (double m : mag.v) CHECK(m == 0.0);
}

TEST_CASE("stft peak bin of a 440 Hz sinusoid") {
  const AudioClip clip = sinusoid(440.0, 1.0);
  StftConfig cfg;
  const auto mag = magnitude(stft(clip, cfg));
  const int expect = static_cast<int>(std::lround(440.0 * cfg.n_fft / clip.sample_rate));
  CHECK(expect == 38);
  // Edge frames see reflected/partial data; interior frames must all peak at
  // the analytic bin.
  for (int t = 2; t < mag.rows() - 2; ++t) {
    int argmax = 0;
    for (int b = 1; b < mag.cols(); ++b)
      if (mag.at(t, b) > mag.at(t, argmax)) argmax = b;
    CHECK(argmax == expect);
  }
}

TEST_CASE("stft satisfies Parseval per frame") {
  Rng rng(31);
  AudioClip clip;
  clip.sample_rate = 24000;
  clip.samples.resize(6000);
  for (auto& s : clip.samples) s = rng.uniform(-0.5, 0.5);
  StftConfig cfg;
  cfg.n_fft = 512;
  cfg.win_length = 400;
  cfg.hop_length = 100;
  const Spectrogram spec = stft(clip, cfg);

  // Direct-summation oracle: rebuild the padded, windowed frames and compare
  // time-domain energy against spectrum energy (real-FFT symmetry).
  const int pad = cfg.win_length / 2;
  std::vector<double> padded(clip.samples.size() + 2 * pad);
  for (int i = 0; i < pad; ++i) padded[static_cast<size_t>(i)] = clip.samples[static_cast<size_t>(pad - i)];
  std::copy(clip.samples.begin(), clip.samples.end(), padded.begin() + pad);
  for (int i = 0; i < pad; ++i)
    padded[pad + clip.samples.size() + i] = clip.samples[clip.samples.size() - 2 - i];

  double time_energy = 0.0, freq_energy = 0.0;
  for (int t = 0; t < spec.n_frames; ++t) {
    for (int i = 0; i < cfg.win_length; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / cfg.win_length);
      const double s = padded[static_cast<size_t>(t) * cfg.hop_length + i] * w;
      time_energy += s * s;
    }
    double e = 0.0;
    for (int b = 0; b < spec.n_bins; ++b) {
      const double m = std::abs(spec.at(t, b));
      const bool shared = b == 0 || b == cfg.n_fft / 2;
      e += (shared ? 1.0 : 2.0) * m * m;
    }
    freq_energy += e / cfg.n_fft;
  }
  CHECK(std::abs(time_energy - freq_energy) / time_energy < 1e-3);
}

TEST_CASE("stft rejects clips shorter than one window") {
  AudioClip clip;
  clip.samples.assign(100, 0.1);
  StftConfig cfg;
  CHECK_THROWS_WITH_AS(stft(clip, cfg), doctest::Contains("too short"), DataError);
}

TEST_CASE("stft frame count formula over a property sweep") {
  Rng rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    StftConfig cfg;
    cfg.n_fft = 256;
    cfg.win_length = 64 + 2 * static_cast<int>(rng.integer(96)); // even, <= 254
    cfg.hop_length = 1 + static_cast<int>(rng.integer(static_cast<uint64_t>(cfg.win_length)));
    const auto len = static_cast<int>(static_cast<uint64_t>(cfg.win_length) + rng.integer(5000));
    AudioClip clip;
    clip.sample_rate = 24000;
    clip.samples.assign(static_cast<size_t>(len), 0.01);
    const Spectrogram spec = stft(clip, cfg);
    const int padded = len + 2 * (cfg.win_length / 2);
    CHECK(spec.n_frames == 1 + (padded - cfg.win_length) / cfg.hop_length);
  }
}

TEST_CASE("mel filterbank rows are nonnegative and unimodal") {
  const auto bank = mel_filterbank(2048, 80, 20.0, 12000.0, 24000);
  REQUIRE(bank.shape == std::vector<int>{80, 1025});
  for (int m = 0; m < 80; ++m) {
    double row_sum = 0.0;
    bool falling = false;
    for (int b = 0; b < 1025; ++b) {
      CHECK(bank.at(m, b) >= 0.0);
      row_sum += bank.at(m, b);
      if (b > 0) {
        if (bank.at(m, b) < bank.at(m, b - 1)) falling = true;
        if (falling && bank.at(m, b) > bank.at(m, b - 1) && bank.at(m, b - 1) > 0.0)
          FAIL_CHECK("filter ", m, " is not unimodal at bin ", b);
      }
    }
    CHECK(row_sum > 0.0);
  }
}

TEST_CASE("mel filter centers strictly increase") {
  const int n_mels = 80;
  const auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  const auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double lo = hz_to_mel(20.0), hi = hz_to_mel(12000.0);
  double prev = -1.0;
  for (int m = 1; m <= n_mels; ++m) {
    const double center = mel_to_hz(lo + (hi - lo) * m / (n_mels + 1));
    CHECK(center > prev);
    prev = center;
  }
}

TEST_CASE("mel filterbank applied to a flat spectrum is all-positive") {
  const auto bank = mel_filterbank(2048, 80, 20.0, 12000.0, 24000);
  for (int m = 0; m < 80; ++m) {
    double acc = 0.0;
    for (int b = 0; b < 1025; ++b) acc += bank.at(m, b);
    CHECK(acc > 0.0);
  }
}

TEST_CASE("mel filterbank with empty filters is a configuration error") {
  CHECK_THROWS_AS(mel_filterbank(64, 60, 20.0, 8000.0, 16000), ConfigError);
  CHECK_THROWS_AS(mel_filterbank(2048, 80, 8000.0, 100.0, 24000), ConfigError);
}

TEST_CASE("extract_features shapes and range") {
  const AudioClip clip = sinusoid(523.0, 0.5);
  FeatureConfig cfg;
  const FeaturePair fp = extract_features(clip, cfg);
  const int expect_t = 1 + static_cast<int>(clip.samples.size()) / cfg.stft.hop_length;
  CHECK(fp.mel.shape == std::vector<int>{expect_t, 80});
  CHECK(fp.linear.shape == std::vector<int>{expect_t, 1025});
  CHECK(fp.mel.finite());
  CHECK(fp.linear.finite());
  for (float x : fp.mel.v) {
    CHECK(x >= 0.0f);
    CHECK(x <= 1.0f);
  }
  CHECK(fp.frame_shift_ms == doctest::Approx(12.5));
  CHECK(fp.frame_length_ms == doctest::Approx(50.0));
}

TEST_CASE("constant DC signal concentrates energy in the lowest mel band") {
  AudioClip clip;
  clip.sample_rate = 24000;
  clip.samples.assign(12000, 0.5);
  FeatureConfig cfg;
  const LogFeatures logf = compute_log_features(clip, cfg);
  const int mid = logf.mel.rows() / 2;
  int argmax = 0;
  for (int m = 1; m < 80; ++m)
    if (logf.mel.at(mid, m) > logf.mel.at(mid, argmax)) argmax = m;
  CHECK(argmax == 0);
}

TEST_CASE("feature normalization is invertible") {
  Rng rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    const double lo = rng.uniform(-12.0, 0.0);
    const double hi = lo + rng.uniform(0.5, 12.0);
    const double x = rng.uniform(lo, hi);
    const double round_trip = denormalize_value(normalize_value(x, lo, hi), lo, hi);
    CHECK(std::abs(round_trip - x) < 1e-6);
  }
}

TEST_CASE("trim_silence") {
  SUBCASE("leading digital zeros removed entirely") {
    AudioClip clip = sinusoid(440.0, 0.5);
    std::vector<double> lead(24000, 0.0);
    clip.samples.insert(clip.samples.begin(), lead.begin(), lead.end());
    const AudioClip trimmed = trim_silence(clip, -40.0, 200.0);
    CHECK(std::abs(trimmed.samples.front()) >= 0.01);
    CHECK(trimmed.samples.size() <= static_cast<size_t>(12000));
  }

  SUBCASE("clip with no silence is unchanged") {
    const AudioClip clip = sinusoid(440.0, 0.25);
    AudioClip loud = clip;
    for (auto& s : loud.samples) s = s >= 0 ? std::max(s, 0.02) : std::min(s, -0.02);
    const AudioClip trimmed = trim_silence(loud, -40.0, 200.0);
    CHECK(trimmed.samples == loud.samples);
  }

  SUBCASE("trailing silence truncated to tail_ms") {
    AudioClip clip = sinusoid(440.0, 0.4);
    const size_t voiced = clip.samples.size();
    clip.samples.resize(voiced + 12000, 0.0); // 0.5 s of silence
    const AudioClip trimmed = trim_silence(clip, -40.0, 200.0);
    const auto tail = static_cast<int64_t>(trimmed.samples.size()) - static_cast<int64_t>(voiced);
    CHECK(std::abs(tail - 4800) <= 300); // 200 ms +- one hop
  }

  SUBCASE("all-silent clip is an error") {
    AudioClip clip;
    clip.samples.assign(24000, 0.0001);
    CHECK_THROWS_AS(trim_silence(clip, -40.0, 200.0), DataError);
  }
}

TEST_CASE("griffin-lim sinusoid magnitude round-trip reaches > 20 dB") {
  // 0.1 s 440 Hz burst with 50 ms silence margins; the silent edge frames
  // anchor the phase field.
  AudioClip clip;
  clip.sample_rate = 24000;
  clip.samples.assign(1200, 0.0);
  for (int i = 0; i < 2400; ++i)
    clip.samples.push_back(0.6 * std::sin(2.0 * M_PI * 440.0 * i / 24000.0));
  clip.samples.insert(clip.samples.end(), 1200, 0.0);
  StftConfig cfg;
  const auto mag = magnitude(stft(clip, cfg));

  // Median over seeded replicates: random-init Griffin-Lim has a luck
  // component; the median is stable.
  std::vector<double> snrs;
  AudioClip rec;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<double> errors;
    rec = griffin_lim(mag, cfg, 60, seed, &errors);
    REQUIRE(errors.size() == 60);
    // Convergence error non-increasing and improved over iteration one.
    for (size_t i = 1; i < errors.size(); ++i) CHECK(errors[i] <= errors[i - 1] + 1e-6);
    CHECK(errors.back() < errors.front());
    snrs.push_back(-20.0 * std::log10(errors.back()));
  }
  std::sort(snrs.begin(), snrs.end());
  INFO("griffin-lim magnitude round-trip SNR dB (median of 5): ", snrs[2]);
  CHECK(snrs[2] > 20.0);

  // The reconstruction carries the tone: dominant bin matches the source.
  const auto rec_mag = magnitude(stft(rec, cfg));
  const int mid = rec_mag.rows() / 2;
  int argmax = 0;
  for (int b = 1; b < rec_mag.cols(); ++b)
    if (rec_mag.at(mid, b) > rec_mag.at(mid, argmax)) argmax = b;
  CHECK(argmax == 38);
}

TEST_CASE("griffin-lim convergence error is monotone for random smooth magnitudes") {
  Rng rng(35);
  StftConfig cfg;
  Array<double> mag({24, cfg.n_bins()});
  // smooth random surface: sum of a few low-frequency bumps
  for (int t = 0; t < 24; ++t)
    for (int b = 0; b < cfg.n_bins(); ++b)
      mag.at(t, b) = 0.2 + 0.1 * std::sin(0.01 * b + 0.3 * t) + 0.05 * std::cos(0.003 * b * t);
  for (auto& x : mag.v) x = std::max(0.0, x + 0.01 * rng.uniform(-1.0, 1.0));
  std::vector<double> errors;
  griffin_lim(mag, cfg, 60, 99, &errors);
  for (size_t i = 1; i < errors.size(); ++i) CHECK(errors[i] <= errors[i - 1] + 1e-6);
  CHECK(errors[59] < errors[0]);
}

TEST_CASE("griffin-lim zero magnitude gives zero signal") {
  StftConfig cfg;
  const Array<double> mag = Array<double>::zeros({20, cfg.n_bins()});
  const AudioClip rec = griffin_lim(mag, cfg, 5, 7);
  CHECK(rec.samples.size() == static_cast<size_t>(19 * cfg.hop_length));
  for (double s : rec.samples) CHECK(s == 0.0);
}

TEST_CASE("griffin-lim rejects NaN magnitudes") {
  StftConfig cfg;
  Array<double> mag = Array<double>::zeros({8, cfg.n_bins()});
  mag.v[3] = std::nan("");
  CHECK_THROWS_AS(griffin_lim(mag, cfg, 5, 7), NumericError);
}

TEST_CASE("wav write-then-read identity for random PCM16 content") {
  TempDir tmp("wav");
  Rng rng(34);
  AudioClip clip;
  clip.sample_rate = 24000;
  clip.samples.resize(5000);
  for (auto& s : clip.samples)
    s = static_cast<double>(static_cast<int>(rng.integer(65536)) - 32768) / 32768.0;
  const std::string path = (tmp.path() / "t.wav").string();
  wav_write(path, clip);
  const AudioClip back = wav_read(path);
  CHECK(back.sample_rate == 24000);
  REQUIRE(back.samples.size() == clip.samples.size());
  CHECK(back.samples == clip.samples);
}

TEST_CASE("truncated wav is a parse error") {
  TempDir tmp("wavtrunc");
  const AudioClip clip = sinusoid(440.0, 0.1);
  const std::string path = (tmp.path() / "t.wav").string();
  wav_write(path, clip);
  std::string bytes = mltts::testing::read_file(path);
  bytes.resize(bytes.size() / 2);
  {
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_WITH_AS(wav_read(path), doctest::Contains("chunk"), DataError);
}

TEST_CASE("48 kHz to 24 kHz resample halves length and keeps the tone") {
  const AudioClip high = sinusoid(440.0, 0.5, 48000);
  const AudioClip low = resample(high, 24000);
  CHECK(low.sample_rate == 24000);
  CHECK(std::abs(static_cast<int64_t>(low.samples.size()) -
                 static_cast<int64_t>(high.samples.size()) / 2) <= 1);

  // Polyphase oracle: the analytic resampled sinusoid.
  const AudioClip oracle = sinusoid(440.0, 0.5, 24000);
  const size_t margin = 512;
  std::vector<double> ref(oracle.samples.begin() + margin, oracle.samples.end() - margin);
  std::vector<double> est(low.samples.begin() + margin, low.samples.end() - margin);
  const double snr = aligned_snr_db(ref, est, 4);
  INFO("resample SNR dB: ", snr);
  CHECK(snr > 35.0);
}

TEST_CASE("feature cache round trip and probe") {
  TempDir tmp("ptfp");
  const AudioClip clip = sinusoid(660.0, 0.3);
  FeatureConfig cfg;
  const FeaturePair fp = extract_features(clip, cfg);
  const std::string path = (tmp.path() / "u.ptfp").string();
  write_feature_cache(path, fp);

  int t = 0, mel = 0, lin = 0;
  CHECK(probe_feature_cache(path, &t, &mel, &lin));
  CHECK(t == fp.mel.rows());
  CHECK(mel == 80);
  CHECK(lin == 1025);

  const FeaturePair back = read_feature_cache(path);
  CHECK(back.mel.v == fp.mel.v);
  CHECK(back.linear.v == fp.linear.v);

  // Truncation invalidates the cache.
  std::string bytes = mltts::testing::read_file(path);
  bytes.resize(bytes.size() - 8);
  {
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_FALSE(probe_feature_cache(path, nullptr, nullptr, nullptr));
  CHECK_THROWS_AS(read_feature_cache(path), DataError);
}

TEST_CASE("norm stats json round trip") {
  TempDir tmp("stats");
  NormStats s{-11.5, 2.25, -11.5, 4.0};
  const std::string path = (tmp.path() / "stats.json").string();
  write_norm_stats(path, s, 10);
  const NormStats back = read_norm_stats(path);
  CHECK(back.mel_min == s.mel_min);
  CHECK(back.mel_max == s.mel_max);
  CHECK(back.lin_min == s.lin_min);
  CHECK(back.lin_max == s.lin_max);
}
