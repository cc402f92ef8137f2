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

#ifndef TEAM_SAMPLER_HPP_
#define TEAM_SAMPLER_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "team/rng.hpp"
#include "team/types.hpp"

namespace team {

struct SemiSplitConfig {
  double labeled_fraction = 0.4;
  std::uint64_t split_seed = 0;
};

/// Fixed per-class labeled/unlabeled partition of a dataset. Indices are
/// dataset rows in ascending order.
struct SemiSplit {
  std::map<std::uint32_t, std::vector<std::size_t>> labeled;
  std::map<std::uint32_t, std::vector<std::size_t>> unlabeled;
};

/// Per class, round(labeled_fraction * class size) rows become labeled;
/// a deterministic function of split_seed.
SemiSplit make_semi_split(const Dataset& data, const SemiSplitConfig& split);

/// Draws N classes uniformly without replacement, then K support and Q
/// query rows per class without replacement. Local class i is the i-th
/// drawn class.
Episode sample_episode(const Dataset& data, const EpisodeConfig& config, Rng& rng);

/// Like sample_episode but restricted to the labeled partition, then fills
/// `unlabeled` from the unlabeled partition of the selected classes. The
/// support/query draws consume the generator before the unlabeled draw, so
/// equal seeds give equal support and query for any unlabeled_per_episode.
Episode sample_semi_episode(const Dataset& data, const EpisodeConfig& config, const SemiSplit& split,
                            std::size_t unlabeled_per_episode, Rng& rng);

}  // namespace team

#endif  // TEAM_SAMPLER_HPP_
