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

#include "team/bisim.hpp"

#include <cmath>

#include "team/eam.hpp"
#include "team/errors.hpp"

namespace team {
namespace {

// Softmax of -x over each row, shifted by the row minimum.
Matrix row_softmax_neg(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double lo = x.row(i).minCoeff();
    out.row(i) = (-(x.row(i).array() - lo)).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace

Matrix distance_table(std::span<const Vector> queries, std::span<const Vector> prototypes, const MetricMatrix& m,
                      DistanceForm form) {
  Matrix d(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(prototypes.size()));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t c = 0; c < prototypes.size(); ++c) {
      const double dist = metric_distance(m, queries[i], prototypes[c]);
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = form == DistanceForm::squared ? dist * dist : dist;
    }
  }
  return d;
}

SimilarityTable classify(std::span<const Vector> queries, std::span<const Vector> prototypes, const MetricMatrix& m,
                         SimilarityMode mode, DistanceForm form) {
  if (queries.empty()) throw Error(ErrorKind::parameter, "classify needs at least one query");
  if (prototypes.size() < 2) throw Error(ErrorKind::parameter, "classify needs at least two prototypes");
  for (const auto& q : queries) {
    if (q.size() != m.dim()) throw Error(ErrorKind::parameter, "query dimension mismatch");
  }
  for (const auto& p : prototypes) {
    if (p.size() != m.dim()) throw Error(ErrorKind::parameter, "prototype dimension mismatch");
  }

  const Matrix dist = distance_table(queries, prototypes, m, form);
  SimilarityTable t;
  t.positive = row_softmax_neg(dist);
  t.negative = row_softmax_neg(dist.transpose()).transpose();
  t.bisim = t.positive.cwiseProduct(t.negative);

  // Row argmax of positive equals the row argmin of the distances; the
  // latter avoids ties introduced by exp underflow.
  t.predictions.resize(queries.size());
  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < dist.cols(); ++c) {
      const bool better = mode == SimilarityMode::bisim ? t.bisim(i, c) > t.bisim(i, best) : dist(i, c) < dist(i, best);
      if (better) best = c;
    }
    t.predictions[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return t;
}

double score(const SimilarityTable& table, std::span<const int> true_labels) {
  if (true_labels.size() != table.predictions.size()) {
    throw Error(ErrorKind::parameter, "label count does not match prediction count");
  }
  if (true_labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < true_labels.size(); ++i) hits += table.predictions[i] == true_labels[i];
  return static_cast<double>(hits) / static_cast<double>(true_labels.size());
}

}  // namespace team
