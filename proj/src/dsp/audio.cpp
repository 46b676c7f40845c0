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

#include "mltts/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace mltts::dsp {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

} // namespace

AudioClip wav_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const size_t n = bytes.size();

  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw DataError("malformed RIFF header in " + path);

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t pos = 12;
  AudioClip clip;
  bool have_data = false;

  while (pos + 8 <= n) {
    char id[5] = {0};
    std::memcpy(id, p + pos, 4);
    const uint32_t size = read_u32(p + pos + 4);
    pos += 8;
    if (pos + size > n)
      throw DataError(std::string("truncated '") + id + "' chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("short 'fmt ' chunk in " + path);
      format = read_u16(p + pos);
      channels = read_u16(p + pos + 2);
      rate = read_u32(p + pos + 4);
      bits = read_u16(p + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw DataError("'data' chunk before 'fmt ' chunk in " + path);
      if (format != 1 || bits != 16)
        throw DataError("unsupported encoding in 'fmt ' chunk (want PCM16) in " + path);
      if (channels != 1)
        throw DataError("unsupported channel count in 'fmt ' chunk (want mono) in " + path);
      const size_t count = size / 2;
      clip.samples.resize(count);
      for (size_t i = 0; i < count; ++i) {
        const auto v = static_cast<int16_t>(read_u16(p + pos + 2 * i));
        clip.samples[i] = static_cast<double>(v) / 32768.0;
      }
      clip.sample_rate = static_cast<int>(rate);
      have_data = true;
    }
    pos += size + (size & 1); // chunks are word-aligned
  }
  if (!have_fmt) throw DataError("missing 'fmt ' chunk in " + path);
  if (!have_data) throw DataError("missing 'data' chunk in " + path);
  return clip;
}

void wav_write(const std::string& path, const AudioClip& clip) {
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put_u32(out, 36 + 2 * n);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);  // block align
  put_u16(out, 16); // bits
  out += "data";
  put_u32(out, 2 * n);
  for (uint32_t i = 0; i < n; ++i) {
    double scaled = std::round(clip.samples[i] * 32768.0);
    scaled = std::clamp(scaled, -32768.0, 32767.0);
    put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(scaled)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write WAV file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing WAV file: " + path);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ConfigError("resample: target rate must be positive");
  if (clip.sample_rate == target_rate) return clip;
  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const auto in_len = static_cast<int64_t>(clip.samples.size());
  const auto out_len = static_cast<int64_t>(std::llround(in_len * ratio));

  // Anti-aliasing cutoff in cycles per input sample; wider kernel when
  // downsampling.
  const double fc = 0.45 * std::min(1.0, ratio);
  const int half_width = static_cast<int>(std::ceil(16.0 / std::min(1.0, ratio)));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<size_t>(std::max<int64_t>(out_len, 0)));
  for (int64_t i = 0; i < out_len; ++i) {
    const double center = static_cast<double>(i) / ratio;
    const auto k0 = static_cast<int64_t>(std::floor(center)) - half_width;
    const auto k1 = static_cast<int64_t>(std::floor(center)) + half_width + 1;
    double acc = 0.0;
    for (int64_t k = std::max<int64_t>(k0, 0); k <= std::min(k1, in_len - 1); ++k) {
      const double t = center - static_cast<double>(k);
      double h;
      if (t == 0.0) {
        h = 2.0 * fc;
      } else {
        h = std::sin(2.0 * M_PI * fc * t) / (M_PI * t);
      }
      const double w = 0.5 + 0.5 * std::cos(M_PI * t / (half_width + 1)); // Hann taper
      acc += clip.samples[static_cast<size_t>(k)] * h * w;
    }
    out.samples[static_cast<size_t>(i)] = acc;
  }
  return out;
}

AudioClip trim_silence(const AudioClip& clip, double threshold_db, double tail_ms) {
  if (tail_ms < 0) throw ConfigError("trim_silence: tail_ms must be nonnegative");
  const double threshold = std::pow(10.0, threshold_db / 20.0);
  const auto n = static_cast<int64_t>(clip.samples.size());
  int64_t first = -1, last = -1;
  for (int64_t i = 0; i < n; ++i) {
    if (std::abs(clip.samples[static_cast<size_t>(i)]) >= threshold) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0)
    throw DataError("trim_silence: clip is entirely below the silence threshold");
  const auto tail = static_cast<int64_t>(std::llround(tail_ms * 1e-3 * clip.sample_rate));
  const int64_t end = std::min(n, last + 1 + tail);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.begin() + first, clip.samples.begin() + end);
  return out;
}

} // namespace mltts::dsp
