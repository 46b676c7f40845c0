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

namespace mltts::train {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_pass = true;
  double seconds = 0.0;
};

// Central finite differences at 64-bit on every differentiable tensor op;
// tolerance 1e-4.
GradCheckReport run_op_gradchecks(uint64_t seed);

// End-to-end teacher-forced loss gradients on toy instances across the full
// 3 attention-variants x 3 speaker-placements grid; tolerance 1e-3.
// Configs may run as parallel shards; each shard owns its tape.
GradCheckReport run_grid_gradcheck(uint64_t seed, int jobs = 1);

// Plain-text table, one row per check.
std::string format_report(const GradCheckReport& report);

} // namespace mltts::train
