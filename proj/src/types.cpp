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

#include "team/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>

#include "team/errors.hpp"

namespace team {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::format: return "format error";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::sampling: return "sampling error";
    case ErrorKind::constraint: return "constraint error";
    case ErrorKind::degenerate: return "degenerate-episode error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::consistency: return "internal-consistency error";
    case ErrorKind::training: return "training error";
  }
  return "error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter:
      return 1;
    case ErrorKind::format:
    case ErrorKind::io:
    case ErrorKind::sampling:
      return 2;
    default:
      return 3;
  }
}

bool is_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      const double tol = 1e-9 * std::max(1.0, std::abs(m(i, j)));
      if (!(std::abs(m(i, j) - m(j, i)) <= tol)) return false;
    }
  }
  return true;
}

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------- Dataset

Dataset::Dataset(std::vector<EmbeddingVector> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) return;
  dim_ = static_cast<std::size_t>(rows_.front().values.size());
  if (dim_ == 0) throw Error(ErrorKind::format, "row 0: dimension must be at least 1");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (static_cast<std::size_t>(r.values.size()) != dim_) {
      std::ostringstream os;
      os << "row " << i << ": dimension " << r.values.size() << " differs from " << dim_;
      throw Error(ErrorKind::format, os.str());
    }
    if (!r.values.allFinite()) {
      throw Error(ErrorKind::format, "row " + std::to_string(i) + ": non-finite value");
    }
    if (r.label) classes_[*r.label].push_back(i);
  }
}

Dataset Dataset::subset_classes(const std::vector<std::uint32_t>& keep) const {
  const std::set<std::uint32_t> wanted(keep.begin(), keep.end());
  std::vector<EmbeddingVector> out;
  for (const auto& r : rows_) {
    if (r.label && wanted.count(*r.label)) out.push_back(r);
  }
  return Dataset(std::move(out));
}

// ---------------------------------------------------------------- Episode

void EpisodeConfig::validate() const {
  if (n_way < 2) throw Error(ErrorKind::parameter, "n_way must be >= 2");
  if (k_shot < 1) throw Error(ErrorKind::parameter, "k_shot must be >= 1");
  if (n_query_per_class < 1) throw Error(ErrorKind::parameter, "n_query_per_class must be >= 1");
}

std::vector<Vector> Episode::query_points() const {
  std::vector<Vector> out;
  out.reserve(query.size());
  for (const auto& q : query) out.push_back(q.x);
  return out;
}

std::vector<int> Episode::query_labels() const {
  std::vector<int> out;
  out.reserve(query.size());
  for (const auto& q : query) out.push_back(q.cls);
  return out;
}

void Episode::validate() const {
  if (n_way < 2 || k_shot < 1) throw Error(ErrorKind::parameter, "episode shape invalid");
  if (support.size() != static_cast<std::size_t>(n_way) * static_cast<std::size_t>(k_shot)) {
    throw Error(ErrorKind::parameter, "support size is not n_way * k_shot");
  }
  std::vector<int> per_class(static_cast<std::size_t>(n_way), 0);
  std::set<std::size_t> support_rows;
  const auto d = support.front().x.size();
  for (const auto& s : support) {
    if (s.cls < 0 || s.cls >= n_way) throw Error(ErrorKind::parameter, "support class out of range");
    if (s.x.size() != d) throw Error(ErrorKind::parameter, "support dimension mismatch");
    ++per_class[static_cast<std::size_t>(s.cls)];
    if (s.row != kSyntheticRow) support_rows.insert(s.row);
  }
  for (int c : per_class) {
    if (c != k_shot) throw Error(ErrorKind::parameter, "support is not balanced across classes");
  }
  for (const auto& q : query) {
    if (q.cls < 0 || q.cls >= n_way) throw Error(ErrorKind::parameter, "query class out of range");
    if (q.x.size() != d) throw Error(ErrorKind::parameter, "query dimension mismatch");
    if (q.row != kSyntheticRow && support_rows.count(q.row)) {
      throw Error(ErrorKind::parameter, "query shares dataset row with support");
    }
  }
  for (const auto& u : unlabeled) {
    if (u.size() != d) throw Error(ErrorKind::parameter, "unlabeled dimension mismatch");
  }
}

// ---------------------------------------------------------------- Metric types

MetricPrior MetricPrior::explicit_matrix(Matrix m) {
  if (m.rows() == 0 || !is_symmetric(m)) {
    throw Error(ErrorKind::parameter, "prior must be a non-empty symmetric matrix");
  }
  if (!(min_eigenvalue(m) > 0.0)) throw Error(ErrorKind::parameter, "prior is not positive definite");
  MetricPrior p;
  p.inverse_ = m.ldlt().solve(Matrix::Identity(m.rows(), m.cols()));
  p.inverse_ = (0.5 * (*p.inverse_ + p.inverse_->transpose())).eval();
  p.matrix_ = std::move(m);
  return p;
}

Matrix MetricPrior::inverse(Eigen::Index d) const {
  if (!matrix_) return Matrix::Identity(d, d);
  if (matrix_->rows() != d) {
    throw Error(ErrorKind::parameter, "prior dimension " + std::to_string(matrix_->rows()) +
                                          " does not match embedding dimension " + std::to_string(d));
  }
  return *inverse_;
}

void MetricHyperParams::validate() const {
  if (!(alpha >= 0.0) || !(gamma >= 0.0) || !(lambda >= 0.0)) {
    throw Error(ErrorKind::parameter, "alpha, gamma and lambda must be non-negative");
  }
  if (knn_k < 1) throw Error(ErrorKind::parameter, "knn_k must be positive");
  if (!(pd_floor > 0.0)) throw Error(ErrorKind::parameter, "pd_floor must be positive");
}

MetricMatrix::MetricMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.rows() != entries_.cols()) {
    throw Error(ErrorKind::domain, "metric must be a non-empty square matrix");
  }
  if (!entries_.allFinite()) throw Error(ErrorKind::domain, "metric has non-finite entries");
  if (!is_symmetric(entries_)) throw Error(ErrorKind::domain, "metric is not symmetric");
  if (!(min_eigenvalue(entries_) > 0.0)) {
    throw Error(ErrorKind::domain, "metric is not positive definite");
  }
}

MetricMatrix MetricMatrix::identity(Eigen::Index d) { return MetricMatrix(Matrix::Identity(d, d)); }

PrototypeBank::PrototypeBank(std::map<std::uint32_t, Vector> entries) : entries_(std::move(entries)) {
  Eigen::Index d = -1;
  for (const auto& [id, v] : entries_) {
    if (d < 0) d = v.size();
    if (v.size() != d || d == 0) throw Error(ErrorKind::parameter, "prototype bank dimension mismatch");
  }
}

PrototypeBank PrototypeBank::from_dataset(const Dataset& data) {
  std::map<std::uint32_t, Vector> means;
  for (const auto& [label, idx] : data.classes()) {
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(data.dim()));
    for (std::size_t i : idx) sum += data[i].values;
    means.emplace(label, sum / static_cast<double>(idx.size()));
  }
  return PrototypeBank(std::move(means));
}

}  // namespace team
