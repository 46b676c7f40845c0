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

#include "mltts/analysis.hpp"

namespace mltts::analysis {

// Language-colored scatter with a legend; tolerates an empty point set
// (axes only).
std::string scatter_svg(const Array<double>& points2d,
                        const std::vector<text::PhonemeSymbol>& labels, const std::string& title);

// Alignment heatmap: one cell per (decoder step, encoder position).
std::string alignment_svg(const std::vector<tts::AttentionTrace<float>>& traces,
                          const std::string& title);

void write_svg(const std::string& path, const std::string& svg);

} // namespace mltts::analysis
