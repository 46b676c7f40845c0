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

#include "mltts/model_config.hpp"

#include <nlohmann/json.hpp>

namespace mltts::tts {

std::string attention_variant_name(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::BASE: return "base";
    case AttentionVariant::PECV: return "pecv";
    case AttentionVariant::RES: return "res";
  }
  return "base";
}

AttentionVariant attention_variant_from_name(const std::string& s) {
  if (s == "base" || s == "BASE") return AttentionVariant::BASE;
  if (s == "pecv" || s == "PECV") return AttentionVariant::PECV;
  if (s == "res" || s == "RES") return AttentionVariant::RES;
  throw ConfigError("unknown attention variant '" + s + "' (expected base, pecv or res)");
}

std::string speaker_placement_name(SpeakerPlacement p) {
  switch (p) {
    case SpeakerPlacement::NONE: return "none";
    case SpeakerPlacement::SE_ENC: return "se_enc";
    case SpeakerPlacement::SE_DEC: return "se_dec";
  }
  return "none";
}

SpeakerPlacement speaker_placement_from_name(const std::string& s) {
  if (s == "none" || s == "NONE") return SpeakerPlacement::NONE;
  if (s == "se_enc" || s == "SE_ENC" || s == "se-enc" || s == "SE-ENC")
    return SpeakerPlacement::SE_ENC;
  if (s == "se_dec" || s == "SE_DEC" || s == "se-dec" || s == "SE-DEC")
    return SpeakerPlacement::SE_DEC;
  throw ConfigError("unknown speaker placement '" + s + "' (expected none, se_enc or se_dec)");
}

void ModelConfig::validate() const {
  const auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
  };
  positive(phoneme_vocab, "phoneme_vocab");
  positive(embedding_dim, "embedding_dim");
  positive(encoder_dim, "encoder_dim");
  positive(decoder_dim, "decoder_dim");
  positive(attention_dim, "attention_dim");
  positive(speaker_count, "speaker_count");
  positive(mel_dim, "mel_dim");
  positive(linear_dim, "linear_dim");
  positive(postnet_dim, "postnet_dim");
  positive(max_decoder_steps, "max_decoder_steps");
  if (speaker_dim < 0) throw ConfigError("model config: speaker_dim must be nonnegative");
  if (reduction_factor < 1) throw ConfigError("model config: reduction_factor must be >= 1");
  if (phoneme_vocab < 5)
    throw ConfigError("model config: phoneme_vocab must cover the SPECIAL block");
  if (encoder_dim % 2 != 0)
    throw ConfigError("model config: encoder_dim must be even (bidirectional halves)");
  if (prenet_dims.empty()) throw ConfigError("model config: prenet_dims must be nonempty");
  for (int d : prenet_dims) positive(d, "prenet dim");
  if (prenet_dropout < 0.0 || prenet_dropout >= 1.0)
    throw ConfigError("model config: prenet_dropout must be in [0,1)");
  if (encoder_conv_kernel < 1 || encoder_conv_kernel % 2 == 0 || postnet_conv_kernel < 1 ||
      postnet_conv_kernel % 2 == 0)
    throw ConfigError("model config: conv kernels must be odd");
  if (attention_variant == AttentionVariant::RES && embedding_dim != encoder_dim)
    throw ConfigError("model config: RES requires embedding_dim == encoder_dim, got " +
                      std::to_string(embedding_dim) + " vs " + std::to_string(encoder_dim));
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["phoneme_vocab"] = phoneme_vocab;
  j["embedding_dim"] = embedding_dim;
  j["encoder_dim"] = encoder_dim;
  j["decoder_dim"] = decoder_dim;
  j["attention_dim"] = attention_dim;
  j["speaker_count"] = speaker_count;
  j["speaker_dim"] = speaker_dim;
  j["attention_variant"] = attention_variant_name(attention_variant);
  j["speaker_placement"] = speaker_placement_name(speaker_placement);
  j["reduction_factor"] = reduction_factor;
  j["prenet_dims"] = prenet_dims;
  j["prenet_dropout"] = prenet_dropout;
  j["encoder_conv_kernel"] = encoder_conv_kernel;
  j["postnet_dim"] = postnet_dim;
  j["postnet_conv_kernel"] = postnet_conv_kernel;
  j["mel_dim"] = mel_dim;
  j["linear_dim"] = linear_dim;
  j["max_decoder_steps"] = max_decoder_steps;
  j["stop_threshold"] = stop_threshold;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config JSON: ") + e.what());
  }
  ModelConfig c;
  try {
    c.phoneme_vocab = j.value("phoneme_vocab", c.phoneme_vocab);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.encoder_dim = j.value("encoder_dim", c.encoder_dim);
    c.decoder_dim = j.value("decoder_dim", c.decoder_dim);
    c.attention_dim = j.value("attention_dim", c.attention_dim);
    c.speaker_count = j.value("speaker_count", c.speaker_count);
    c.speaker_dim = j.value("speaker_dim", c.speaker_dim);
    if (j.contains("attention_variant"))
      c.attention_variant = attention_variant_from_name(j["attention_variant"].get<std::string>());
    if (j.contains("speaker_placement"))
      c.speaker_placement = speaker_placement_from_name(j["speaker_placement"].get<std::string>());
    c.reduction_factor = j.value("reduction_factor", c.reduction_factor);
    if (j.contains("prenet_dims")) c.prenet_dims = j["prenet_dims"].get<std::vector<int>>();
    c.prenet_dropout = j.value("prenet_dropout", c.prenet_dropout);
    c.encoder_conv_kernel = j.value("encoder_conv_kernel", c.encoder_conv_kernel);
    c.postnet_dim = j.value("postnet_dim", c.postnet_dim);
    c.postnet_conv_kernel = j.value("postnet_conv_kernel", c.postnet_conv_kernel);
    c.mel_dim = j.value("mel_dim", c.mel_dim);
    c.linear_dim = j.value("linear_dim", c.linear_dim);
    c.max_decoder_steps = j.value("max_decoder_steps", c.max_decoder_steps);
    c.stop_threshold = j.value("stop_threshold", c.stop_threshold);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config field: ") + e.what());
  }
  c.validate();
  return c;
}

} // namespace mltts::tts
