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

#include "mltts/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mltts/rng.hpp"

namespace mltts::tts {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw DataError("truncated checkpoint: " + path);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

} // namespace

template <typename S>
void save_checkpoint(const std::string& path, const TtsModel<S>& model,
                     const std::string& aux_json) {
  nlohmann::json blob;
  blob["model"] = nlohmann::json::parse(model.config().to_json());
  blob["aux"] = aux_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(aux_json);
  const std::string config = blob.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f.write(kMagic, 4);
  write_u32(f, kVersion);
  write_u32(f, static_cast<uint32_t>(config.size()));
  f.write(config.data(), static_cast<std::streamsize>(config.size()));

  const auto params = model.params().all();
  write_u32(f, static_cast<uint32_t>(params.size()));
  for (const auto* p : params) {
    write_u32(f, static_cast<uint32_t>(p->name.size()));
    f.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u32(f, static_cast<uint32_t>(p->value.shape.size()));
    for (int d : p->value.shape) write_u32(f, static_cast<uint32_t>(d));
    std::vector<float> data(p->value.v.size());
    for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(p->value.v[i]);
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  }
  if (!f) throw IoError("failed writing checkpoint: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("bad checkpoint magic in " + path);
  const uint32_t version = read_u32(f, path);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path);

  const uint32_t config_len = read_u32(f, path);
  std::string config(config_len, '\0');
  f.read(config.data(), config_len);
  if (!f) throw DataError("truncated checkpoint config in " + path);

  CheckpointData data;
  try {
    nlohmann::json blob = nlohmann::json::parse(config);
    data.config = ModelConfig::from_json(blob.at("model").dump());
    data.aux_json = blob.value("aux", nlohmann::json::object()).dump();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint config JSON in " + path + ": " + e.what());
  }

  const uint32_t n_params = read_u32(f, path);
  for (uint32_t i = 0; i < n_params; ++i) {
    const uint32_t name_len = read_u32(f, path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint32_t ndim = read_u32(f, path);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(f, path));
    Array<float> tensor(shape);
    f.read(reinterpret_cast<char*>(tensor.v.data()),
           static_cast<std::streamsize>(tensor.v.size() * sizeof(float)));
    if (!f) throw DataError("truncated checkpoint tensor '" + name + "' in " + path);
    data.tensors.emplace(std::move(name), std::move(tensor));
  }
  return data;
}

template <typename S>
TtsModel<S> model_from_checkpoint(const CheckpointData& data) {
  TtsModel<S> model(data.config, 0);
  auto params = model.params().all();
  if (params.size() != data.tensors.size())
    throw DataError("checkpoint parameter count " + std::to_string(data.tensors.size()) +
                    " does not match config-derived layout " + std::to_string(params.size()));
  for (auto* p : params) {
    const auto it = data.tensors.find(p->name);
    if (it == data.tensors.end())
      throw DataError("checkpoint is missing parameter '" + p->name + "'");
    if (it->second.shape != p->value.shape)
      throw DataError("checkpoint tensor '" + p->name + "' has shape " +
                      shape_str(it->second.shape) + ", config expects " +
                      shape_str(p->value.shape));
    for (size_t i = 0; i < p->value.v.size(); ++i)
      p->value.v[i] = static_cast<S>(it->second.v[i]);
  }
  return model;
}

uint64_t checkpoint_file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return fnv1a(bytes.data(), bytes.size());
}

template void save_checkpoint<float>(const std::string&, const TtsModel<float>&,
                                     const std::string&);
template void save_checkpoint<double>(const std::string&, const TtsModel<double>&,
                                      const std::string&);
template TtsModel<float> model_from_checkpoint<float>(const CheckpointData&);
template TtsModel<double> model_from_checkpoint<double>(const CheckpointData&);

} // namespace mltts::tts
