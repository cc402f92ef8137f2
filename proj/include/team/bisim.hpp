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

#ifndef TEAM_BISIM_HPP_
#define TEAM_BISIM_HPP_

#include <span>
#include <vector>

#include "team/types.hpp"

namespace team {

enum class SimilarityMode { positive_only, bisim };

/// Distance fed to the softmaxes. Unsquared is the default; squared matches
/// the usual prototypical-network logits.
enum class DistanceForm { unsquared, squared };

/// All tables are (queries x prototypes).
///   positive(i, c) = softmax over c of -d(x_i, p_c)
///   negative(i, c) = softmax over i of -d(p_c, x_i)
///   bisim          = positive .* negative
struct SimilarityTable {
  Matrix positive;
  Matrix negative;
  Matrix bisim;
  std::vector<int> predictions;
};

/// Pairwise distances under `m`, (queries x prototypes).
Matrix distance_table(std::span<const Vector> queries, std::span<const Vector> prototypes, const MetricMatrix& m,
                      DistanceForm form = DistanceForm::unsquared);

/// Classifies the whole query set jointly. Predictions are the row argmax of
/// the selected table, ties to the lowest class index.
SimilarityTable classify(std::span<const Vector> queries, std::span<const Vector> prototypes, const MetricMatrix& m,
                         SimilarityMode mode, DistanceForm form = DistanceForm::unsquared);

/// Fraction of predictions equal to `true_labels`.
double score(const SimilarityTable& table, std::span<const int> true_labels);

}  // namespace team

#endif  // TEAM_BISIM_HPP_
