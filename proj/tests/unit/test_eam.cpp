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

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "team/eam.hpp"
#include "team/errors.hpp"
#include "test_util.hpp"

using namespace team;

namespace {

MetricHyperParams params(double alpha, double gamma, double lambda) {
  MetricHyperParams hp;
  hp.alpha = alpha;
  hp.gamma = gamma;
  hp.lambda = lambda;
  return hp;
}

ScatterPair random_scatter(int d, std::mt19937_64& rng) {
  return {testing::random_spd(d, rng, 0.0) * 0.5, testing::random_spd(d, rng, 0.0)};
}

// Objective written directly from its two terms with plain loops.
double objective_by_loops(const Matrix& m, const ScatterPair& sp, const MetricHyperParams& hp) {
  const auto d = m.rows();
  double tr_m = 0, tr_mm = 0, tr_mc = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    tr_m += m(i, i);
    for (Eigen::Index j = 0; j < d; ++j) {
      tr_mm += m(i, j) * sp.m_tilde(j, i);
      tr_mc += m(i, j) * sp.c_tilde(j, i);
    }
  }
  const double logdet = 2.0 * Eigen::LLT<Matrix>(m).matrixL().toDenseMatrix().diagonal().array().log().sum();
  return tr_m - logdet + hp.gamma * (tr_mm - hp.lambda * tr_mc);
}

}  // namespace

TEST_CASE("prototypes") {
  Episode ep;
  ep.n_way = 2;
  ep.k_shot = 2;
  ep.class_ids = {0, 1};
  Vector a(2), b(2), c(2), e(2);
  a << 1, 1;
  b << 3, 3;
  c << 0, 0;
  e << 0, 4;
  ep.support = {{a, 0, 0}, {b, 0, 1}, {c, 1, 2}, {e, 1, 3}};
  ep.query = {{a, 0, 4}, {c, 1, 5}};
  const auto p = compute_prototypes(ep);
  CHECK(p[0] == Vector::Constant(2, 2.0));
  CHECK(p[1] == Vector((Vector(2) << 0, 2).finished()));

  std::mt19937_64 rng(1);
  const Episode one = testing::gaussian_episode(4, 1, 2, 3, rng);
  const auto p1 = compute_prototypes(one);
  for (const auto& s : one.support) CHECK(p1[static_cast<std::size_t>(s.cls)] == s.x);
}

TEST_CASE("constraint counts") {
  std::mt19937_64 rng(2);
  SUBCASE("2-way 1-shot inductive") {
    const Episode ep = testing::gaussian_episode(2, 1, 3, 2, rng);
    const auto cs = build_constraints(ep, compute_prototypes(ep), {}, 3, false);
    CHECK(cs.must_link.size() == 2);
    CHECK(cs.cannot_link.size() == 1);
  }
  SUBCASE("5-way 5-shot transductive matches enumeration") {
    const Episode ep = testing::gaussian_episode(5, 5, 15, 4, rng);
    const auto cs = build_constraints(ep, compute_prototypes(ep), {}, 3, true);
    std::size_t same = 0;
    for (std::size_t i = 0; i < ep.support.size(); ++i)
      for (std::size_t j = 0; j < ep.support.size(); ++j)
        if (i < j && ep.support[i].cls == ep.support[j].cls) ++same;
    CHECK(cs.must_link.size() == same + ep.support.size() + 3 * ep.support.size());
    CHECK(cs.must_link.size() == 150);
    CHECK(cs.cannot_link.size() == 10);
  }
  SUBCASE("bank adds prototype-bank pairs") {
    const Episode ep = testing::gaussian_episode(5, 1, 3, 4, rng);
    std::map<std::uint32_t, Vector> entries;
    for (std::uint32_t c = 0; c < 64; ++c) entries[c] = testing::gaussian_vector(4, rng);
    const auto cs = build_constraints(ep, compute_prototypes(ep), PrototypeBank(entries), 3, true);
    CHECK(cs.cannot_link.size() == 10 + 320);
  }
  SUBCASE("knn_k beyond the pool") {
    const Episode ep = testing::gaussian_episode(2, 1, 1, 2, rng);
    CHECK_THROWS_AS(build_constraints(ep, compute_prototypes(ep), {}, 3, true), Error);
    CHECK_NOTHROW(build_constraints(ep, compute_prototypes(ep), {}, 3, false));
  }
}

TEST_CASE("k-NN pairs are the nearest pool points under the prior") {
  std::mt19937_64 rng(3);
  const Episode ep = testing::gaussian_episode(3, 2, 4, 3, rng, 5);
  std::vector<Vector> pool;
  for (const auto& q : ep.query) pool.push_back(q.x);
  for (const auto& u : ep.unlabeled) pool.push_back(u);

  for (bool identity : {true, false}) {
    const Matrix w = identity ? Matrix::Identity(3, 3) : testing::random_spd(3, rng, 0.5);
    const MetricPrior prior = identity ? MetricPrior::identity() : MetricPrior::explicit_matrix(w);
    const auto cs = build_constraints(ep, compute_prototypes(ep), {}, 2, true, prior);
    const std::size_t offset = 3 + ep.support.size();  // same-class pairs, then prototype pairs
    for (std::size_t i = 0; i < ep.support.size(); ++i) {
      std::vector<std::pair<double, std::size_t>> dist;
      for (std::size_t q = 0; q < pool.size(); ++q) {
        const Vector diff = ep.support[i].x - pool[q];
        dist.emplace_back(diff.dot(w * diff), q);
      }
      std::sort(dist.begin(), dist.end());
      for (std::size_t r = 0; r < 2; ++r) {
        const auto& pair = cs.must_link[offset + 2 * i + r];
        CHECK(pair.first == ep.support[i].x);
        CHECK(pair.second == pool[dist[r].second]);
      }
    }
  }
}

TEST_CASE("scatter matrices") {
  ConstraintSets cs;
  Vector a(2), z(2);
  a << 1, 0;
  z << 0, 0;
  cs.must_link.emplace_back(a, z);
  cs.cannot_link.emplace_back(a, z);
  const ScatterPair sp = scatter_matrices(cs);
  CHECK(sp.m_tilde(0, 0) == 1.0);
  CHECK(sp.m_tilde(0, 1) == 0.0);
  CHECK(sp.m_tilde(1, 1) == 0.0);

  cs.must_link.emplace_back(a, a);  // zero difference, dropped
  CHECK(scatter_matrices(cs).m_tilde == sp.m_tilde);

  ConstraintSets zeros;
  zeros.must_link.emplace_back(a, a);
  zeros.cannot_link.emplace_back(a, z);
  CHECK(scatter_matrices(zeros).m_tilde.isZero(0.0));

  CHECK_THROWS_AS(scatter_matrices(ConstraintSets{}), Error);
  ConstraintSets no_cannot;
  no_cannot.must_link.emplace_back(a, z);
  try {
    scatter_matrices(no_cannot);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::constraint);
  }
}

TEST_CASE("pair-loss identity: tr(M Mt) equals mean squared must-link distance") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const int d = 2 + t % 6;
    const Episode ep = testing::gaussian_episode(4, 3, 3, d, rng);
    const auto cs = build_constraints(ep, compute_prototypes(ep), {}, 3, true);
    const ScatterPair sp = scatter_matrices(cs);
    const MetricMatrix m(testing::random_spd(d, rng));
    double sum = 0;
    int n = 0;
    for (const auto& [x, y] : cs.must_link) {
      if (x == y) continue;
      const double dist = metric_distance(m, x, y);
      sum += dist * dist;
      ++n;
    }
    const double mean = sum / n;
    CHECK(std::abs(pair_loss(m, sp, 0.0) - mean) <= 1e-9 * std::abs(mean));
  }
}

TEST_CASE("task covariance") {
  Episode ep;
  ep.n_way = 1;
  ep.k_shot = 1;
  ep.class_ids = {0};
  ep.support = {{Vector::Constant(1, 0.0), 0, 0}};
  ep.query = {{Vector::Constant(1, 2.0), 0, 1}};
  CHECK(task_covariance(ep)(0, 0) == doctest::Approx(2.0));

  ep.query[0].x = Vector::Constant(1, 0.0);
  ep.unlabeled = {Vector::Constant(1, 0.0)};
  CHECK(task_covariance(ep).isZero(0.0));

  ep.query.clear();
  ep.unlabeled.clear();
  try {
    task_covariance(ep);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate);
  }
}

TEST_CASE("task covariance is consistent on Gaussian samples") {
  std::mt19937_64 rng(5);
  Matrix c(3, 3);
  c << 2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 0.5;
  const Matrix l = c.llt().matrixL();
  Episode ep;
  ep.n_way = 1;
  ep.k_shot = 1;
  ep.class_ids = {0};
  ep.support = {{l * testing::gaussian_vector(3, rng), 0, 0}};
  for (int i = 1; i < 500; ++i) ep.query.push_back({l * testing::gaussian_vector(3, rng), 0, std::size_t(i)});
  CHECK((task_covariance(ep) - c).norm() / c.norm() < 0.2);
}

TEST_CASE("closed form examples") {
  ScatterPair sp{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  sp.m_tilde(0, 0) = 1.0;
  sp.c_tilde = Matrix::Identity(2, 2);
  const Matrix cov = Matrix::Identity(2, 2);

  const auto euclid = closed_form_metric(sp, cov, params(0, 0, 0.01));
  CHECK(euclid.metric.matrix() == Matrix::Identity(2, 2));
  CHECK_FALSE(euclid.repaired);

  const auto diag = closed_form_metric(sp, cov, params(0, 1, 0));
  CHECK(diag.metric.matrix()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(diag.metric.matrix()(1, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(diag.metric.matrix()(0, 1) == 0.0);

  const auto with_cov = closed_form_metric(sp, 3.0 * cov, params(2, 1, 0));
  CHECK(with_cov.metric.matrix()(0, 0) == doctest::Approx(6.5));
}

TEST_CASE("Y repair keeps the metric valid and reports it") {
  ScatterPair sp{Matrix::Zero(2, 2), Matrix::Identity(2, 2) * 1000.0};
  const auto r = closed_form_metric(sp, Matrix::Identity(2, 2), params(0, 1, 0.01));
  CHECK(r.repaired);
  CHECK(r.min_eig_y == doctest::Approx(-9.0));
  CHECK(r.repair_shift == doctest::Approx(9.0 + 1e-6));
  CHECK(min_eigenvalue(r.metric.matrix()) > 0);
}

TEST_CASE("closed form beats its perturbations") {
  std::mt19937_64 rng(6);
  const MetricHyperParams hp = params(0, 0.2, 0.01);
  for (int inst = 0; inst < 20; ++inst) {
    const int d = 2 + inst % 7;
    const ScatterPair sp = random_scatter(d, rng);
    const auto cf = closed_form_metric(sp, Matrix::Zero(d, d), hp);
    REQUIRE_FALSE(cf.repaired);
    const double best = objective_by_loops(cf.metric.matrix(), sp, hp);
    CHECK(std::abs(best - eam_objective(cf.metric, sp, hp)) <= 1e-9 * std::max(1.0, std::abs(best)));
    CHECK(best <= objective_by_loops(Matrix::Identity(d, d), sp, hp) + 1e-12);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int p = 0; p < 200; ++p) {
      Matrix e(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) e(i, j) = n(rng);
      e = (0.025 * (e + e.transpose())).eval();
      const Matrix m = cf.metric.matrix() + e;
      if (min_eigenvalue(m) <= 0) continue;
      CHECK(best <= objective_by_loops(m, sp, hp) + 1e-12);
    }
  }
}

TEST_CASE("objective forms agree and the gradient matches finite differences") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const int d = 2 + t % 5;
    const ScatterPair sp = random_scatter(d, rng);
    MetricHyperParams hp = params(0, 0.3, 0.05);
    if (t % 2) hp.prior = MetricPrior::explicit_matrix(testing::random_spd(d, rng, 0.5));
    const Matrix mm = testing::random_spd(d, rng, 0.3);
    const MetricMatrix m(mm);
    const double a = eam_objective(m, sp, hp), b = eam_objective_reformulated(m, sp, hp);
    CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));

    const Matrix g = eam_gradient(mm, sp, hp);
    const double h = 1e-6;
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        Matrix e = Matrix::Zero(d, d);
        e(i, j) += 1;
        if (i != j) e(j, i) += 1;
        const double fd = (eam_objective_reformulated(MetricMatrix(mm + h * e), sp, hp) -
                           eam_objective_reformulated(MetricMatrix(mm - h * e), sp, hp)) /
                          (2 * h);
        const double an = trace_product(g, e);
        CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
      }
    }
  }
}

TEST_CASE("gamma zero reduces the objective to the regularizer") {
  std::mt19937_64 rng(8);
  const ScatterPair sp = random_scatter(4, rng);
  const MetricMatrix m(testing::random_spd(4, rng));
  CHECK(eam_objective(m, sp, params(0, 0, 0.01)) == reg_loss(m, MetricPrior::identity()));
}

TEST_CASE("pair and regularizer losses") {
  std::mt19937_64 rng(9);
  const ScatterPair sp = random_scatter(3, rng);
  CHECK(pair_loss(MetricMatrix::identity(3), sp, 0.1) ==
        doctest::Approx(sp.m_tilde.trace() - 0.1 * sp.c_tilde.trace()));
  CHECK(reg_loss(MetricMatrix::identity(4), MetricPrior::identity()) == doctest::Approx(4.0));
  const Matrix m0 = testing::random_spd(3, rng, 0.5);
  CHECK(reg_loss(MetricMatrix(m0), MetricPrior::explicit_matrix(m0)) ==
        doctest::Approx(3.0 - std::log(m0.determinant())));
  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 1) = -1;
  try {
    log_det_spd(bad);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::domain);
  }
}

TEST_CASE("metric distance") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 100; ++t) {
    const Vector x = testing::gaussian_vector(5, rng), y = testing::gaussian_vector(5, rng);
    CHECK(metric_distance(MetricMatrix::identity(5), x, y) == doctest::Approx((x - y).norm()).epsilon(1e-12));
  }
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 4;
  m(1, 1) = 1;
  Vector a(2);
  a << 1, 1;
  CHECK(metric_distance(MetricMatrix(m), a, Vector::Zero(2)) == doctest::Approx(std::sqrt(5.0)));
  CHECK(metric_distance(MetricMatrix(m), a, a) == 0.0);
}

TEST_CASE("Euclidean reduction of the adapted metric") {
  std::mt19937_64 rng(11);
  const Episode ep = testing::gaussian_episode(5, 3, 4, 6, rng);
  const auto r = adapt_metric(ep, {}, params(0, 0, 0.01));
  CHECK(r.metric.matrix() == Matrix::Identity(6, 6));
}

TEST_CASE("adapted metrics satisfy the metric invariants") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    const Episode ep = testing::gaussian_episode(5, 1 + t % 5, 5, 2 + t % 10, rng, t % 3 * 5);
    const auto r = adapt_metric(ep, {}, MetricHyperParams{});
    const Matrix& m = r.metric.matrix();
    CHECK(m == m.transpose());
    CHECK(min_eigenvalue(m) > 0);
  }
}

TEST_CASE("oracle solver") {
  std::mt19937_64 rng(13);
  SUBCASE("gamma zero converges to the prior") {
    const ScatterPair sp = random_scatter(4, rng);
    const auto r = oracle_solve(sp, params(0, 0, 0.01), 5000, 0.5);
    CHECK(r.converged);
    CHECK((r.metric.matrix() - Matrix::Identity(4, 4)).norm() < 1e-4);
  }
  SUBCASE("matches the closed form at d = 8") {
    for (int t = 0; t < 5; ++t) {
      const ScatterPair sp = random_scatter(8, rng);
      const MetricHyperParams hp = params(0, 0.2, 0.01);
      const auto cf = closed_form_metric(sp, Matrix::Zero(8, 8), hp);
      const auto r = oracle_solve(sp, hp, 20000, 0.5);
      INFO("iterations ", r.iterations, " gradient ", r.gradient_norm);
      CHECK(r.converged);
      CHECK((r.metric.matrix() - cf.metric.matrix()).norm() < 1e-3);
      CHECK(std::abs(r.objective - eam_objective(cf.metric, sp, hp)) < 1e-6);
    }
  }
  SUBCASE("too few steps is reported") {
    const ScatterPair sp = random_scatter(8, rng);
    const auto r = oracle_solve(sp, params(0, 5, 0.01), 1, 0.5);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 1);
  }
}

TEST_CASE("metric factor") {
  const Matrix l = factor_metric(MetricMatrix::identity(3));
  CHECK((l.transpose() * l - Matrix::Identity(3, 3)).norm() < 1e-10);
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 4;
  m(1, 1) = 9;
  const Matrix f = factor_metric(MetricMatrix(m));
  CHECK((f.transpose() * f - m).norm() < 1e-12);
  CHECK(std::abs(f(0, 0)) == doctest::Approx(2.0));
  CHECK(std::abs(f(1, 1)) == doctest::Approx(3.0));

  std::mt19937_64 rng(14);
  for (int t = 0; t < 100; ++t) {
    const MetricMatrix mm(testing::random_spd(4, rng));
    const Matrix u = factor_metric(mm);
    const Vector x = testing::gaussian_vector(4, rng), y = testing::gaussian_vector(4, rng);
    CHECK(std::abs((u * x - u * y).norm() - metric_distance(mm, x, y)) < 1e-7);
  }
}

TEST_CASE("sparsity report") {
  const auto id = sparsity_report(MetricMatrix::identity(4));
  CHECK(id.diag_mean == 1.0);
  CHECK(id.offdiag_mean == 0.0);
  REQUIRE(id.gap_ratio);
  CHECK(std::isinf(*id.gap_ratio));
  CHECK(id.sorted_values.size() == 16);
  CHECK(std::is_sorted(id.sorted_values.rbegin(), id.sorted_values.rend()));

  const auto ones = sparsity_report(Matrix(Matrix::Ones(3, 3)));
  CHECK(ones.degenerate);
  CHECK_FALSE(ones.gap_ratio);

  Matrix m(2, 2);
  m << 3, 1, 1, 2;
  const auto r = sparsity_report(MetricMatrix(m));
  CHECK(r.diag_mean == doctest::Approx(0.75));
  CHECK(r.offdiag_mean == doctest::Approx(0.0));
}
