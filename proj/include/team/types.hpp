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

#ifndef TEAM_TYPES_HPP_
#define TEAM_TYPES_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace team {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A feature vector with an optional class label. Unlabeled rows carry
/// std::nullopt.
struct EmbeddingVector {
  Vector values;
  std::optional<std::uint32_t> label;
};

/// An immutable collection of equally sized, finite embedding vectors.
class Dataset {
 public:
  Dataset() = default;

  /// Validates uniform dimension and finiteness; throws Error(format).
  explicit Dataset(std::vector<EmbeddingVector> rows);

  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<EmbeddingVector>& rows() const noexcept { return rows_; }
  const EmbeddingVector& operator[](std::size_t i) const { return rows_[i]; }

  /// Row indices per label, ascending. Unlabeled rows are not indexed.
  const std::map<std::uint32_t, std::vector<std::size_t>>& classes() const noexcept {
    return classes_;
  }

  /// Rows whose label is in `keep`, in original order.
  Dataset subset_classes(const std::vector<std::uint32_t>& keep) const;

 private:
  std::vector<EmbeddingVector> rows_;
  std::size_t dim_ = 0;
  std::map<std::uint32_t, std::vector<std::size_t>> classes_;
};

struct EpisodeConfig {
  int n_way = 5;
  int k_shot = 1;
  int n_query_per_class = 15;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr std::size_t kSyntheticRow = std::numeric_limits<std::size_t>::max();

/// A point inside an episode. `cls` is the episode-local class index and
/// `row` the originating dataset row (kSyntheticRow for mixed points).
struct LabeledPoint {
  Vector x;
  int cls = 0;
  std::size_t row = kSyntheticRow;
};

struct Episode {
  int n_way = 0;
  int k_shot = 0;
  std::vector<LabeledPoint> support;
  std::vector<LabeledPoint> query;
  std::vector<Vector> unlabeled;
  std::vector<std::size_t> unlabeled_rows;
  /// Global label of each local class index.
  std::vector<std::uint32_t> class_ids;

  std::size_t dim() const { return support.empty() ? 0 : support.front().x.size(); }
  std::vector<Vector> query_points() const;
  std::vector<int> query_labels() const;

  /// Throws Error(parameter) when the support is unbalanced, a label is
  /// out of range, or a dataset row is shared between support and query.
  void validate() const;
};

/// M0 in the log-det regularizer. Identity unless an explicit SPD matrix
/// is supplied.
class MetricPrior {
 public:
  MetricPrior() = default;
  static MetricPrior identity() { return {}; }
  /// Throws Error(parameter) unless `m` is symmetric with min eigenvalue > 0.
  static MetricPrior explicit_matrix(Matrix m);

  bool is_identity() const noexcept { return !matrix_.has_value(); }
  const std::optional<Matrix>& matrix() const noexcept { return matrix_; }
  /// M0^{-1} at dimension d; throws on dimension mismatch.
  Matrix inverse(Eigen::Index d) const;

 private:
  std::optional<Matrix> matrix_;
  std::optional<Matrix> inverse_;
};

struct MetricHyperParams {
  double alpha = 2.0;
  double gamma = 0.2;
  double lambda = 0.01;
  MetricPrior prior;
  int knn_k = 3;
  double pd_floor = 1e-6;
  /// Include query/unlabeled k-NN must-link pairs.
  bool transductive = true;

  void validate() const;
};

/// Symmetric positive-definite matrix defining a Mahalanobis distance.
class MetricMatrix {
 public:
  /// Throws Error(domain) unless symmetric and strictly positive definite.
  explicit MetricMatrix(Matrix entries);
  static MetricMatrix identity(Eigen::Index d);

  const Matrix& matrix() const noexcept { return entries_; }
  Eigen::Index dim() const noexcept { return entries_.rows(); }

 private:
  Matrix entries_;
};

/// Per-class mean embeddings of seen training classes.
class PrototypeBank {
 public:
  PrototypeBank() = default;
  explicit PrototypeBank(std::map<std::uint32_t, Vector> entries);
  /// Class means of every labeled class in `data`.
  static PrototypeBank from_dataset(const Dataset& data);

  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::uint32_t, Vector>& entries() const noexcept { return entries_; }

 private:
  std::map<std::uint32_t, Vector> entries_;
};

/// Minimum eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& symmetric);

bool is_symmetric(const Matrix& m);

}  // namespace team

#endif  // TEAM_TYPES_HPP_
