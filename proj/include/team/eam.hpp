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

#ifndef TEAM_EAM_HPP_
#define TEAM_EAM_HPP_

// Episode-wise adaptive Mahalanobis metric.
//
// For one episode the must-link set M (same-class support pairs, support to
// own prototype, support to its k nearest transductive neighbours) and the
// cannot-link set C (prototype pairs, prototype to bank entries) give the
// scatter matrices
//
//   Mt = mean over M of (xi - xj)(xi - xj)^T,   Ct = likewise over C.
//
// The log-det regularized pair loss
//
//   f(M) = tr(M0^{-1} M) - log det M + gamma * (tr(M Mt) - lambda tr(M Ct))
//        = tr(M Y) - log det M,     Y = M0^{-1} + gamma Mt - gamma lambda Ct
//
// is minimized over the SPD cone by M* = Y^{-1}. The returned metric adds
// the transductive task covariance: Y^{-1} + alpha * Sigma.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "team/types.hpp"

namespace team {

struct ConstraintSets {
  std::vector<std::pair<Vector, Vector>> must_link;
  std::vector<std::pair<Vector, Vector>> cannot_link;
};

struct ScatterPair {
  Matrix m_tilde;
  Matrix c_tilde;
};

/// Class means of the support set, in class index order.
std::vector<Vector> compute_prototypes(const Episode& episode);

/// Builds both constraint sets. The k-NN pool is query plus unlabeled,
/// searched under the prior metric. Throws Error(parameter) when
/// transductive and knn_k exceeds the pool.
ConstraintSets build_constraints(const Episode& episode, std::span<const Vector> prototypes,
                                 const PrototypeBank& bank, int knn_k, bool transductive,
                                 const MetricPrior& prior = MetricPrior::identity());

/// Mean outer products of pair differences. Zero-difference must-link pairs
/// are dropped before averaging; if every must-link pair is zero the
/// must-link scatter is the zero matrix. Throws Error(constraint) on an
/// empty input list.
ScatterPair scatter_matrices(const ConstraintSets& cs);

/// Unbiased sample covariance of support, query and unlabeled points.
/// Throws Error(degenerate) with fewer than two points.
Matrix task_covariance(const Episode& episode);

/// Y = M0^{-1} + gamma Mt - gamma lambda Ct, unrepaired.
Matrix eam_target(const ScatterPair& sp, const MetricHyperParams& hp);

struct ClosedFormResult {
  MetricMatrix metric;
  /// Smallest eigenvalue of Y before any repair.
  double min_eig_y = 0.0;
  /// True when Y was shifted by (pd_floor - min_eig_y) I.
  bool repaired = false;
  double repair_shift = 0.0;
};

/// Y^{-1} + alpha * cov, symmetrized.
ClosedFormResult closed_form_metric(const ScatterPair& sp, const Matrix& cov, const MetricHyperParams& hp);

/// Whole per-episode construction: prototypes, constraints, scatter,
/// covariance and closed form.
ClosedFormResult adapt_metric(const Episode& episode, const PrototypeBank& bank, const MetricHyperParams& hp);

/// sqrt((x_i - x_j)^T M (x_i - x_j)).
double metric_distance(const MetricMatrix& m, const Vector& x_i, const Vector& x_j);

/// tr(M Mt) - lambda tr(M Ct).
double pair_loss(const MetricMatrix& m, const ScatterPair& sp, double lambda);

/// tr(M0^{-1} M) - log det M.
double reg_loss(const MetricMatrix& m, const MetricPrior& prior);

/// reg_loss + gamma * pair_loss.
double eam_objective(const MetricMatrix& m, const ScatterPair& sp, const MetricHyperParams& hp);

/// tr(M Y) - log det M. Algebraically equal to eam_objective.
double eam_objective_reformulated(const MetricMatrix& m, const ScatterPair& sp, const MetricHyperParams& hp);

/// Y - M^{-1}, the gradient of the objective at M.
Matrix eam_gradient(const Matrix& m, const ScatterPair& sp, const MetricHyperParams& hp);

struct OracleResult {
  MetricMatrix metric;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;
};

/// Projected gradient descent on tr(M Y) - log det M over {M : eig(M) >=
/// pd_floor}, with backtracking from `step_size`. Starts at M0. Stops when
/// the gradient Frobenius norm drops below `tolerance`; otherwise returns
/// the last iterate with converged = false.
OracleResult oracle_solve(const ScatterPair& sp, const MetricHyperParams& hp, int steps, double step_size,
                          double tolerance = 1e-9);

/// Upper-triangular L with L^T L = M.
Matrix factor_metric(const MetricMatrix& m);

struct SparsityReport {
  double diag_mean = 0.0;
  double offdiag_mean = 0.0;
  /// diag_mean / offdiag_mean; +inf when offdiag_mean is 0. Empty for a
  /// constant matrix, where min-max scaling is undefined.
  std::optional<double> gap_ratio;
  bool degenerate = false;
  /// Scaled entries, descending.
  std::vector<double> sorted_values;
};

/// Statistics of the metric after scaling its entries to [0, 1] by
/// (v - min) / (max - min).
SparsityReport sparsity_report(const MetricMatrix& m);
SparsityReport sparsity_report(const Matrix& m);

/// tr(A B).
double trace_product(const Matrix& a, const Matrix& b);

/// log det of an SPD matrix; throws Error(domain) otherwise.
double log_det_spd(const Matrix& m);

}  // namespace team

#endif  // TEAM_EAM_HPP_
