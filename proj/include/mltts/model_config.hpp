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

namespace mltts::tts {

enum class AttentionVariant { BASE, PECV, RES };
enum class SpeakerPlacement { NONE, SE_ENC, SE_DEC };

std::string attention_variant_name(AttentionVariant v);
AttentionVariant attention_variant_from_name(const std::string& s);
std::string speaker_placement_name(SpeakerPlacement p);
SpeakerPlacement speaker_placement_from_name(const std::string& s);

// Architecture switchboard. Desk-scale defaults keep gradient checks and
// overfit runs in the minutes range.
struct ModelConfig {
  int phoneme_vocab = 239;
  int embedding_dim = 128; // d_p
  int encoder_dim = 128;   // d_h; must equal d_p when RES is enabled
  int decoder_dim = 256;   // d_s
  int attention_dim = 128; // d_a
  int speaker_count = 2;
  int speaker_dim = 16; // d_spk; 0 degenerates SE-* to NONE exactly
  AttentionVariant attention_variant = AttentionVariant::BASE;
  SpeakerPlacement speaker_placement = SpeakerPlacement::NONE;
  int reduction_factor = 2; // frames per decoder step
  std::vector<int> prenet_dims = {256, 128};
  double prenet_dropout = 0.0;
  int encoder_conv_kernel = 5;
  int postnet_dim = 128;
  int postnet_conv_kernel = 5;
  int mel_dim = 80;
  int linear_dim = 1025;
  int max_decoder_steps = 400;
  double stop_threshold = 0.5;

  // attention memory width: encoder output, plus the broadcast speaker
  // embedding under SE-ENC
  int memory_dim() const {
    return encoder_dim + (speaker_placement == SpeakerPlacement::SE_ENC ? speaker_dim : 0);
  }

  // width of C_i handed to the decoder
  int context_dim() const {
    return attention_variant == AttentionVariant::PECV ? encoder_dim : memory_dim();
  }

  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

} // namespace mltts::tts
