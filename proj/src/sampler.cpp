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

#include "team/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "team/errors.hpp"

namespace team {
namespace {

// First `count` entries of `items` become a uniform draw without replacement.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
}

using ClassIndex = std::map<std::uint32_t, std::vector<std::size_t>>;

Episode draw(const Dataset& data, const EpisodeConfig& config, const ClassIndex& pool, Rng& rng) {
  config.validate();
  const auto n_way = static_cast<std::size_t>(config.n_way);
  const auto need = static_cast<std::size_t>(config.k_shot + config.n_query_per_class);
  if (pool.size() < n_way) {
    throw Error(ErrorKind::sampling, "dataset has " + std::to_string(pool.size()) + " classes, episode needs " +
                                         std::to_string(n_way));
  }
  for (const auto& [label, rows] : pool) {
    if (rows.size() < need) {
      throw Error(ErrorKind::sampling, "class " + std::to_string(label) + " has " + std::to_string(rows.size()) +
                                           " examples, episode needs " + std::to_string(need));
    }
  }

  std::vector<std::uint32_t> labels;
  labels.reserve(pool.size());
  for (const auto& entry : pool) labels.push_back(entry.first);
  partial_shuffle(labels, n_way, rng);

  Episode ep;
  ep.n_way = config.n_way;
  ep.k_shot = config.k_shot;
  ep.class_ids.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_way));
  for (std::size_t c = 0; c < n_way; ++c) {
    std::vector<std::size_t> rows = pool.at(ep.class_ids[c]);
    partial_shuffle(rows, need, rng);
    for (std::size_t i = 0; i < need; ++i) {
      LabeledPoint p{data[rows[i]].values, static_cast<int>(c), rows[i]};
      if (i < static_cast<std::size_t>(config.k_shot)) {
        ep.support.push_back(std::move(p));
      } else {
        ep.query.push_back(std::move(p));
      }
    }
  }
  return ep;
}

}  // namespace

SemiSplit make_semi_split(const Dataset& data, const SemiSplitConfig& split) {
  if (!(split.labeled_fraction > 0.0 && split.labeled_fraction <= 1.0)) {
    throw Error(ErrorKind::parameter, "labeled_fraction must lie in (0, 1]");
  }
  Rng rng(mix_seed(split.split_seed));
  SemiSplit out;
  for (const auto& [label, rows] : data.classes()) {
    std::vector<std::size_t> shuffled = rows;
    const auto n_labeled = static_cast<std::size_t>(std::lround(split.labeled_fraction * rows.size()));
    partial_shuffle(shuffled, n_labeled, rng);
    std::vector<std::size_t> lab(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_labeled));
    std::vector<std::size_t> unl(shuffled.begin() + static_cast<std::ptrdiff_t>(n_labeled), shuffled.end());
    std::sort(lab.begin(), lab.end());
    std::sort(unl.begin(), unl.end());
    out.labeled.emplace(label, std::move(lab));
    out.unlabeled.emplace(label, std::move(unl));
  }
  return out;
}

Episode sample_episode(const Dataset& data, const EpisodeConfig& config, Rng& rng) {
  return draw(data, config, data.classes(), rng);
}

Episode sample_semi_episode(const Dataset& data, const EpisodeConfig& config, const SemiSplit& split,
                            std::size_t unlabeled_per_episode, Rng& rng) {
  Episode ep = draw(data, config, split.labeled, rng);
  if (unlabeled_per_episode == 0) return ep;

  std::vector<std::size_t> pool;
  for (std::uint32_t label : ep.class_ids) {
    const auto& rows = split.unlabeled.at(label);
    pool.insert(pool.end(), rows.begin(), rows.end());
  }
  if (pool.empty()) throw Error(ErrorKind::sampling, "unlabeled partition is empty for the selected classes");
  if (pool.size() < unlabeled_per_episode) {
    throw Error(ErrorKind::sampling, "unlabeled partition has " + std::to_string(pool.size()) +
                                         " rows for the selected classes, episode needs " +
                                         std::to_string(unlabeled_per_episode));
  }
  partial_shuffle(pool, unlabeled_per_episode, rng);
  for (std::size_t i = 0; i < unlabeled_per_episode; ++i) {
    ep.unlabeled.push_back(data[pool[i]].values);
    ep.unlabeled_rows.push_back(pool[i]);
  }
  return ep;
}

}  // namespace team
