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

#include "mltts/model.hpp"

namespace mltts::tts {

// Versioned binary container:
//   magic "PTCK" | version u32 | config_json_len u32 | config JSON
//   | n_params u32 | per parameter: name_len u32, name, ndim u32,
//     dims u32..., f32 data (little-endian)
// The config JSON blob carries the ModelConfig under "model" plus free-form
// auxiliary metadata (feature stats, inventory) under "aux".
struct CheckpointData {
  ModelConfig config;
  std::string aux_json; // "{}" when absent
  std::map<std::string, Array<float>> tensors;
};

template <typename S>
void save_checkpoint(const std::string& path, const TtsModel<S>& model,
                     const std::string& aux_json = "{}");

CheckpointData load_checkpoint(const std::string& path);

// Builds a model from checkpoint contents; every tensor shape is validated
// against the config-derived parameter layout.
template <typename S>
TtsModel<S> model_from_checkpoint(const CheckpointData& data);

uint64_t checkpoint_file_hash(const std::string& path);

} // namespace mltts::tts
