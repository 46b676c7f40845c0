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

#include "mltts/features_io.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace mltts::dsp {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'F', 'P'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

} // namespace

void write_feature_cache(const std::string& path, const FeaturePair& features) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write feature cache: " + path);
  f.write(kMagic, 4);
  write_u32(f, kVersion);
  write_u32(f, static_cast<uint32_t>(features.mel.rows()));
  write_u32(f, static_cast<uint32_t>(features.mel.cols()));
  write_u32(f, static_cast<uint32_t>(features.linear.cols()));
  f.write(reinterpret_cast<const char*>(features.mel.v.data()),
          static_cast<std::streamsize>(features.mel.v.size() * sizeof(float)));
  f.write(reinterpret_cast<const char*>(features.linear.v.data()),
          static_cast<std::streamsize>(features.linear.v.size() * sizeof(float)));
  if (!f) throw IoError("failed writing feature cache: " + path);
}

FeaturePair read_feature_cache(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open feature cache: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("bad feature cache magic in " + path);
  const uint32_t version = read_u32(f);
  if (version != kVersion)
    throw DataError("unsupported feature cache version " + std::to_string(version) + " in " + path);
  const uint32_t t = read_u32(f);
  const uint32_t mel_dim = read_u32(f);
  const uint32_t lin_dim = read_u32(f);
  if (!f) throw DataError("truncated feature cache header in " + path);

  FeaturePair out;
  out.mel = Array<float>({static_cast<int>(t), static_cast<int>(mel_dim)});
  out.linear = Array<float>({static_cast<int>(t), static_cast<int>(lin_dim)});
  f.read(reinterpret_cast<char*>(out.mel.v.data()),
         static_cast<std::streamsize>(out.mel.v.size() * sizeof(float)));
  f.read(reinterpret_cast<char*>(out.linear.v.data()),
         static_cast<std::streamsize>(out.linear.v.size() * sizeof(float)));
  if (!f) throw DataError("truncated feature cache payload in " + path);
  return out;
}

bool probe_feature_cache(const std::string& path, int* t_frames, int* mel_dim, int* lin_dim) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) return false;
  if (read_u32(f) != kVersion) return false;
  const uint32_t t = read_u32(f);
  const uint32_t mel = read_u32(f);
  const uint32_t lin = read_u32(f);
  if (!f) return false;
  f.seekg(0, std::ios::end);
  const auto size = static_cast<uint64_t>(f.tellg());
  const uint64_t expect = 20 + sizeof(float) * (static_cast<uint64_t>(t) * mel + static_cast<uint64_t>(t) * lin);
  if (size != expect) return false;
  if (t_frames) *t_frames = static_cast<int>(t);
  if (mel_dim) *mel_dim = static_cast<int>(mel);
  if (lin_dim) *lin_dim = static_cast<int>(lin);
  return true;
}

void write_norm_stats(const std::string& path, const NormStats& stats, int n_files) {
  nlohmann::json j;
  j["version"] = 1;
  j["mel_min"] = stats.mel_min;
  j["mel_max"] = stats.mel_max;
  j["lin_min"] = stats.lin_min;
  j["lin_max"] = stats.lin_max;
  j["n_files"] = n_files;
  std::ofstream f(path);
  if (!f) throw IoError("cannot write stats file: " + path);
  f << j.dump(2) << "\n";
}

NormStats read_norm_stats(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open stats file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad stats file " + path + ": " + e.what());
  }
  NormStats s;
  try {
    s.mel_min = j.at("mel_min").get<double>();
    s.mel_max = j.at("mel_max").get<double>();
    s.lin_min = j.at("lin_min").get<double>();
    s.lin_max = j.at("lin_max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("stats file " + path + " missing fields: " + e.what());
  }
  return s;
}

} // namespace mltts::dsp
