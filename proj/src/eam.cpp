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

#include "team/eam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "team/errors.hpp"

namespace team {
namespace {

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix spd_inverse(const Matrix& a) {
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::domain, "matrix inversion failed");
  return symmetrize(ldlt.solve(Matrix::Identity(a.rows(), a.cols())));
}

// Mean of (a - b)(a - b)^T over the pairs, as D D^T / n with the
// differences stacked column-wise.
Matrix mean_outer(const std::vector<const std::pair<Vector, Vector>*>& pairs, Eigen::Index d) {
  Matrix diffs(d, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    diffs.col(static_cast<Eigen::Index>(k)) = pairs[k]->first - pairs[k]->second;
  }
  Matrix out = Matrix::Zero(d, d);
  out.selfadjointView<Eigen::Lower>().rankUpdate(diffs, 1.0 / static_cast<double>(pairs.size()));
  return out.selfadjointView<Eigen::Lower>();
}

Matrix project_spd(const Matrix& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const Vector vals = es.eigenvalues().cwiseMax(floor);
  return symmetrize(es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose());
}

double objective_with_target(const Matrix& m, const Matrix& y) { return trace_product(m, y) - log_det_spd(m); }

}  // namespace

double trace_product(const Matrix& a, const Matrix& b) {
  return (a.array() * b.transpose().array()).sum();
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::domain, "log det undefined: matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

std::vector<Vector> compute_prototypes(const Episode& episode) {
  const auto d = static_cast<Eigen::Index>(episode.dim());
  std::vector<Vector> sums(static_cast<std::size_t>(episode.n_way), Vector::Zero(d));
  std::vector<int> counts(static_cast<std::size_t>(episode.n_way), 0);
  for (const auto& s : episode.support) {
    sums[static_cast<std::size_t>(s.cls)] += s.x;
    ++counts[static_cast<std::size_t>(s.cls)];
  }
  for (std::size_t c = 0; c < sums.size(); ++c) {
    if (counts[c] == 0) throw Error(ErrorKind::parameter, "class " + std::to_string(c) + " has no support");
    sums[c] /= static_cast<double>(counts[c]);
  }
  return sums;
}

ConstraintSets build_constraints(const Episode& episode, std::span<const Vector> prototypes,
                                 const PrototypeBank& bank, int knn_k, bool transductive,
                                 const MetricPrior& prior) {
  ConstraintSets cs;
  const auto& support = episode.support;

  std::vector<const Vector*> pool;
  if (transductive) {
    for (const auto& q : episode.query) pool.push_back(&q.x);
    for (const auto& u : episode.unlabeled) pool.push_back(&u);
    if (knn_k < 1 || static_cast<std::size_t>(knn_k) > pool.size()) {
      throw Error(ErrorKind::parameter, "knn_k=" + std::to_string(knn_k) + " exceeds the transductive pool of " +
                                            std::to_string(pool.size()) + " points");
    }
  }

  for (std::size_t i = 0; i < support.size(); ++i) {
    for (std::size_t j = i + 1; j < support.size(); ++j) {
      if (support[i].cls == support[j].cls) cs.must_link.emplace_back(support[i].x, support[j].x);
    }
  }
  for (const auto& s : support) cs.must_link.emplace_back(s.x, prototypes[static_cast<std::size_t>(s.cls)]);

  if (transductive) {
    const Eigen::Index d = static_cast<Eigen::Index>(episode.dim());
    const Matrix weight = prior.is_identity() ? Matrix() : *prior.matrix();
    if (!prior.is_identity() && weight.rows() != d) throw Error(ErrorKind::parameter, "prior dimension mismatch");
    std::vector<double> dist(pool.size());
    std::vector<std::size_t> order(pool.size());
    for (const auto& s : support) {
      for (std::size_t q = 0; q < pool.size(); ++q) {
        const Vector diff = s.x - *pool[q];
        dist[q] = prior.is_identity() ? diff.squaredNorm() : diff.dot(weight * diff);
      }
      std::iota(order.begin(), order.end(), std::size_t{0});
      const auto kth = order.begin() + knn_k;
      std::partial_sort(order.begin(), kth, order.end(), [&](std::size_t a, std::size_t b) {
        return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
      });
      for (auto it = order.begin(); it != kth; ++it) cs.must_link.emplace_back(s.x, *pool[*it]);
    }
  }

  for (std::size_t c = 0; c < prototypes.size(); ++c) {
    for (std::size_t c2 = c + 1; c2 < prototypes.size(); ++c2) cs.cannot_link.emplace_back(prototypes[c], prototypes[c2]);
  }
  for (const auto& p : prototypes) {
    for (const auto& [label, b] : bank.entries()) {
      if (b.size() != p.size()) throw Error(ErrorKind::parameter, "prototype bank dimension mismatch");
      cs.cannot_link.emplace_back(p, b);
    }
  }
  return cs;
}

ScatterPair scatter_matrices(const ConstraintSets& cs) {
  if (cs.must_link.empty()) throw Error(ErrorKind::constraint, "must-link set is empty");
  if (cs.cannot_link.empty()) throw Error(ErrorKind::constraint, "cannot-link set is empty");
  const Eigen::Index d = cs.must_link.front().first.size();

  std::vector<const std::pair<Vector, Vector>*> must;
  for (const auto& p : cs.must_link) {
    if (p.first.size() != d || p.second.size() != d) throw Error(ErrorKind::parameter, "constraint dimension mismatch");
    if (p.first != p.second) must.push_back(&p);
  }
  std::vector<const std::pair<Vector, Vector>*> cannot;
  for (const auto& p : cs.cannot_link) {
    if (p.first.size() != d || p.second.size() != d) throw Error(ErrorKind::parameter, "constraint dimension mismatch");
    cannot.push_back(&p);
  }
  return {must.empty() ? Matrix::Zero(d, d) : mean_outer(must, d), mean_outer(cannot, d)};
}

Matrix task_covariance(const Episode& episode) {
  const std::size_t n = episode.support.size() + episode.query.size() + episode.unlabeled.size();
  if (n < 2) throw Error(ErrorKind::degenerate, "task covariance needs at least two points");
  const auto d = static_cast<Eigen::Index>(episode.dim());
  Matrix x(d, static_cast<Eigen::Index>(n));
  Eigen::Index col = 0;
  for (const auto& s : episode.support) x.col(col++) = s.x;
  for (const auto& q : episode.query) x.col(col++) = q.x;
  for (const auto& u : episode.unlabeled) x.col(col++) = u;
  x.colwise() -= x.rowwise().mean();
  Matrix cov = Matrix::Zero(d, d);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0 / static_cast<double>(n - 1));
  return cov.selfadjointView<Eigen::Lower>();
}

Matrix eam_target(const ScatterPair& sp, const MetricHyperParams& hp) {
  const Eigen::Index d = sp.m_tilde.rows();
  if (sp.c_tilde.rows() != d || sp.m_tilde.cols() != d || sp.c_tilde.cols() != d) {
    throw Error(ErrorKind::parameter, "scatter matrices must be square and of equal size");
  }
  Matrix y = hp.prior.inverse(d);
  if (hp.gamma != 0.0) y += hp.gamma * sp.m_tilde - hp.gamma * hp.lambda * sp.c_tilde;
  return y;
}

ClosedFormResult closed_form_metric(const ScatterPair& sp, const Matrix& cov, const MetricHyperParams& hp) {
  hp.validate();
  const Eigen::Index d = sp.m_tilde.rows();
  if (cov.rows() != d || cov.cols() != d) throw Error(ErrorKind::parameter, "covariance dimension mismatch");

  Matrix y = eam_target(sp, hp);
  const double min_eig = min_eigenvalue(y);
  double shift = 0.0;
  if (min_eig < hp.pd_floor) {
    shift = hp.pd_floor - min_eig;
    y.diagonal().array() += shift;
  }
  Matrix m = spd_inverse(y);
  if (hp.alpha != 0.0) m += hp.alpha * cov;
  return {MetricMatrix(symmetrize(m)), min_eig, shift > 0.0, shift};
}

ClosedFormResult adapt_metric(const Episode& episode, const PrototypeBank& bank, const MetricHyperParams& hp) {
  const auto prototypes = compute_prototypes(episode);
  const auto cs = build_constraints(episode, prototypes, bank, hp.knn_k, hp.transductive, hp.prior);
  return closed_form_metric(scatter_matrices(cs), task_covariance(episode), hp);
}

double metric_distance(const MetricMatrix& m, const Vector& x_i, const Vector& x_j) {
  if (x_i.size() != m.dim() || x_j.size() != m.dim()) throw Error(ErrorKind::parameter, "metric_distance dimension mismatch");
  const Vector diff = x_i - x_j;
  const double q = diff.dot(m.matrix() * diff);
  if (q >= 0.0) return std::sqrt(q);
  const double scale = std::max(1.0, m.matrix().norm() * diff.squaredNorm());
  if (q < -1e-9 * scale) throw Error(ErrorKind::consistency, "negative quadratic form under a PD metric");
  return 0.0;
}

double pair_loss(const MetricMatrix& m, const ScatterPair& sp, double lambda) {
  return trace_product(m.matrix(), sp.m_tilde) - lambda * trace_product(m.matrix(), sp.c_tilde);
}

double reg_loss(const MetricMatrix& m, const MetricPrior& prior) {
  return trace_product(prior.inverse(m.dim()), m.matrix()) - log_det_spd(m.matrix());
}

double eam_objective(const MetricMatrix& m, const ScatterPair& sp, const MetricHyperParams& hp) {
  const double reg = reg_loss(m, hp.prior);
  if (hp.gamma == 0.0) return reg;
  return reg + hp.gamma * pair_loss(m, sp, hp.lambda);
}

double eam_objective_reformulated(const MetricMatrix& m, const ScatterPair& sp, const MetricHyperParams& hp) {
  return objective_with_target(m.matrix(), eam_target(sp, hp));
}

Matrix eam_gradient(const Matrix& m, const ScatterPair& sp, const MetricHyperParams& hp) {
  return eam_target(sp, hp) - spd_inverse(m);
}

OracleResult oracle_solve(const ScatterPair& sp, const MetricHyperParams& hp, int steps, double step_size,
                          double tolerance) {
  hp.validate();
  if (steps < 0 || !(step_size > 0.0)) throw Error(ErrorKind::parameter, "oracle_solve needs steps >= 0 and step_size > 0");
  const Matrix y = eam_target(sp, hp);
  const Eigen::Index d = y.rows();

  Matrix m = project_spd(hp.prior.is_identity() ? Matrix(Matrix::Identity(d, d)) : *hp.prior.matrix(), hp.pd_floor);
  double f = objective_with_target(m, y);
  Matrix grad = y - spd_inverse(m);
  double gnorm = grad.norm();
  double t = step_size;
  int it = 0;
  for (; it < steps && gnorm >= tolerance; ++it) {
    // Backtrack until the projected step satisfies the sufficient-decrease
    // bound f(M+) <= f(M) + <G, M+ - M> + |M+ - M|^2 / (2t).
    Matrix next;
    double f_next = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      next = project_spd(m - t * grad, hp.pd_floor);
      const Matrix delta = next - m;
      f_next = objective_with_target(next, y);
      const double bound = f + trace_product(grad, delta) + delta.squaredNorm() / (2.0 * t);
      // Near the optimum the decrease is below the resolution of f; there a
      // smaller gradient is required instead.
      const bool noisy = std::abs(f_next - bound) <= 1e-12 * std::max(1.0, std::abs(f));
      if (noisy ? (y - spd_inverse(next)).norm() < gnorm : f_next <= bound) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    const bool stalled = (next - m).norm() == 0.0;
    m = std::move(next);
    f = f_next;
    grad = y - spd_inverse(m);
    gnorm = grad.norm();
    t = std::min(t * 2.0, step_size * 1e3);
    if (stalled) break;
  }
  return {MetricMatrix(m), gnorm < tolerance, it, gnorm, f};
}

Matrix factor_metric(const MetricMatrix& m) {
  Eigen::LLT<Matrix> llt(m.matrix());
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::domain, "metric is not positive definite");
  return llt.matrixU();
}

SparsityReport sparsity_report(const MetricMatrix& m) { return sparsity_report(m.matrix()); }

SparsityReport sparsity_report(const Matrix& a) {
  const Eigen::Index d = a.rows();
  const double lo = a.minCoeff();
  const double hi = a.maxCoeff();
  SparsityReport out;
  if (!(hi > lo)) {
    out.degenerate = true;
    out.diag_mean = std::numeric_limits<double>::quiet_NaN();
    out.offdiag_mean = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const Matrix scaled = (a.array() - lo) / (hi - lo);
  out.diag_mean = scaled.diagonal().mean();
  out.offdiag_mean = d > 1 ? (scaled.sum() - scaled.diagonal().sum()) / static_cast<double>(d * d - d) : 0.0;
  out.gap_ratio = out.offdiag_mean == 0.0 ? std::numeric_limits<double>::infinity() : out.diag_mean / out.offdiag_mean;
  out.sorted_values.assign(scaled.data(), scaled.data() + scaled.size());
  std::sort(out.sorted_values.begin(), out.sorted_values.end(), std::greater<>());
  return out;
}

}  // namespace team
