// Copyright 2026 The teamfs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TEAM_TIM_HPP_
#define TEAM_TIM_HPP_

#include <cstdint>

#include "team/rng.hpp"
#include "team/types.hpp"

namespace team {

/// Task-internal mixing schedule and mixing-weight interval.
struct TimConfig {
  double low = 0.5;
  double high = 1.0;
  int mixes_per_instance = 2;
  std::int64_t warmup_episodes = 5000;
  std::int64_t on_episodes = 4;   // Y
  std::int64_t off_episodes = 1;  // Z

  void validate() const;
  /// True when episode `episode_index` is mixed under this schedule.
  bool active(std::int64_t episode_index) const;
};

/// omega * x_i + (1 - omega) * x_j, keeping x_i's label. omega must lie in
/// (0.5, 1].
EmbeddingVector mix_pair(const EmbeddingVector& x_i, const EmbeddingVector& x_j, double omega);

/// Replaces each support point by `mixes_per_instance` mixtures with
/// uniformly drawn other support points of the same episode. Query and
/// unlabeled points are untouched. Inactive schedule positions return the
/// episode unchanged.
Episode augment_episode(const Episode& episode, const TimConfig& cfg, std::int64_t episode_index, Rng& rng);

}  // namespace team

#endif  // TEAM_TIM_HPP_
