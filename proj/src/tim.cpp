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

#include "team/tim.hpp"

#include "team/errors.hpp"

namespace team {

void TimConfig::validate() const {
  if (!(0.5 <= low && low < high && high <= 1.0)) {
    throw Error(ErrorKind::parameter, "TIM interval must satisfy 0.5 <= low < high <= 1");
  }
  if (mixes_per_instance < 1) throw Error(ErrorKind::parameter, "mixes_per_instance must be positive");
  if (warmup_episodes < 0 || on_episodes < 1 || off_episodes < 0) {
    throw Error(ErrorKind::parameter, "invalid TIM schedule");
  }
}

bool TimConfig::active(std::int64_t episode_index) const {
  if (episode_index < warmup_episodes) return false;
  return (episode_index - warmup_episodes) % (on_episodes + off_episodes) < on_episodes;
}

EmbeddingVector mix_pair(const EmbeddingVector& x_i, const EmbeddingVector& x_j, double omega) {
  if (!(omega > 0.5 && omega <= 1.0)) throw Error(ErrorKind::parameter, "omega must lie in (0.5, 1]");
  if (x_i.values.size() != x_j.values.size()) throw Error(ErrorKind::parameter, "mix_pair dimension mismatch");
  return {omega * x_i.values + (1.0 - omega) * x_j.values, x_i.label};
}

Episode augment_episode(const Episode& episode, const TimConfig& cfg, std::int64_t episode_index, Rng& rng) {
  cfg.validate();
  if (!cfg.active(episode_index)) return episode;

  const std::size_t n = episode.support.size();
  std::uniform_int_distribution<std::size_t> partner(0, n - 2);
  std::uniform_real_distribution<double> weight(cfg.low, cfg.high);

  Episode out = episode;
  out.support.clear();
  out.support.reserve(n * static_cast<std::size_t>(cfg.mixes_per_instance));
  out.k_shot = episode.k_shot * cfg.mixes_per_instance;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& xi = episode.support[i];
    for (int m = 0; m < cfg.mixes_per_instance; ++m) {
      std::size_t j = partner(rng);
      if (j >= i) ++j;  // any other support point
      double omega = weight(rng);
      while (omega <= 0.5 || omega == cfg.low) omega = weight(rng);
      const auto& xj = episode.support[j];
      out.support.push_back({omega * xi.x + (1.0 - omega) * xj.x, xi.cls, kSyntheticRow});
    }
  }
  return out;
}

}  // namespace team
