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

// Python bindings. Datasets cross the boundary as (X, labels) with X an
// (n, d) float64 array and labels int64, -1 marking unlabeled rows.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "team/bisim.hpp"
#include "team/eam.hpp"
#include "team/embedding_io.hpp"
#include "team/errors.hpp"
#include "team/harness.hpp"
#include "team/synth.hpp"

namespace py = pybind11;
using namespace team;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Labels = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

Dataset to_dataset(const RowMatrix& x, const Labels& labels) {
  if (labels.size() != x.rows()) throw Error(ErrorKind::parameter, "labels must have one entry per row");
  std::vector<EmbeddingVector> rows;
  rows.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::optional<std::uint32_t> label;
    if (labels[i] >= 0) label = static_cast<std::uint32_t>(labels[i]);
    rows.push_back({x.row(i).transpose(), label});
  }
  return Dataset(std::move(rows));
}

py::tuple from_dataset(const Dataset& data) {
  RowMatrix x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.dim()));
  Labels labels(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = data[i].values.transpose();
    labels[static_cast<Eigen::Index>(i)] = data[i].label ? static_cast<std::int64_t>(*data[i].label) : -1;
  }
  return py::make_tuple(x, labels);
}

std::vector<Vector> to_points(const RowMatrix& x) {
  std::vector<Vector> out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(x.row(i).transpose());
  return out;
}

MetricHyperParams hyper(double alpha, double gamma, double lambda, int knn_k) {
  MetricHyperParams hp;
  hp.alpha = alpha;
  hp.gamma = gamma;
  hp.lambda = lambda;
  hp.knn_k = knn_k;
  hp.validate();
  return hp;
}

py::dict report_dict(const TrialReport& r) {
  py::dict d;
  d["label"] = r.label;
  d["status"] = r.status;
  d["mean_accuracy"] = r.mean_accuracy;
  d["ci95_halfwidth"] = r.ci95_halfwidth;
  d["ci_degenerate"] = r.ci_degenerate;
  d["n_trials"] = r.n_trials;
  d["per_trial_accuracies"] = r.per_trial_accuracies;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Few-shot engine with episode-adaptive Mahalanobis metrics";

  py::register_exception<Error>(m, "TeamError");

  m.def(
      "load_embeddings",
      [](const std::string& path, const std::string& format) {
        return from_dataset(load_embeddings(path, parse_format(format)));
      },
      py::arg("path"), py::arg("format") = "bin");
  m.def(
      "save_embeddings",
      [](const std::string& path, const RowMatrix& x, const Labels& labels, const std::string& format) {
        save_embeddings(to_dataset(x, labels), path, parse_format(format));
      },
      py::arg("path"), py::arg("x"), py::arg("labels"), py::arg("format") = "bin");

  m.def(
      "synth",
      [](int n_classes, int per_class, std::uint64_t seed) {
        SynthConfig cfg = SynthConfig::an16();
        cfg.n_classes = n_classes;
        cfg.per_class = per_class;
        cfg.seed = seed;
        return from_dataset(generate(cfg));
      },
      py::arg("n_classes") = 20, py::arg("per_class") = 200, py::arg("seed") = 7,
      "Anisotropic 16-dimensional benchmark: 8 signal dims (std 1), 8 nuisance dims (std 3).");

  m.def(
      "closed_form_metric",
      [](const Matrix& m_tilde, const Matrix& c_tilde, const Matrix& cov, double alpha, double gamma, double lambda) {
        const auto r = closed_form_metric({m_tilde, c_tilde}, cov, hyper(alpha, gamma, lambda, 3));
        return py::make_tuple(r.metric.matrix(), r.repaired);
      },
      py::arg("m_tilde"), py::arg("c_tilde"), py::arg("cov"), py::arg("alpha") = 2.0, py::arg("gamma") = 0.2,
      py::arg("lambda_") = 0.01, "Returns (metric, repaired).");

  m.def(
      "adapt_metric",
      [](const RowMatrix& support, const std::vector<int>& support_labels, const RowMatrix& query,
         std::optional<RowMatrix> unlabeled, double alpha, double gamma, double lambda, int knn_k) {
        Episode ep;
        ep.n_way = support_labels.empty() ? 0 : *std::max_element(support_labels.begin(), support_labels.end()) + 1;
        for (int c = 0; c < ep.n_way; ++c) ep.class_ids.push_back(static_cast<std::uint32_t>(c));
        if (static_cast<Eigen::Index>(support_labels.size()) != support.rows()) {
          throw Error(ErrorKind::parameter, "support_labels must have one entry per support row");
        }
        std::vector<int> count(static_cast<std::size_t>(ep.n_way), 0);
        for (Eigen::Index i = 0; i < support.rows(); ++i) {
          const int c = support_labels[static_cast<std::size_t>(i)];
          ++count[static_cast<std::size_t>(c)];
          ep.support.push_back({support.row(i).transpose(), c, kSyntheticRow});
        }
        ep.k_shot = count.empty() ? 0 : count.front();
        // query labels are unknown here; class 0 is a placeholder never read
        for (Eigen::Index i = 0; i < query.rows(); ++i) ep.query.push_back({query.row(i).transpose(), 0, kSyntheticRow});
        if (unlabeled) {
          ep.unlabeled = to_points(*unlabeled);
          ep.unlabeled_rows.assign(ep.unlabeled.size(), kSyntheticRow);
        }
        const auto r = adapt_metric(ep, {}, hyper(alpha, gamma, lambda, knn_k));
        return py::make_tuple(r.metric.matrix(), r.repaired);
      },
      py::arg("support"), py::arg("support_labels"), py::arg("query"), py::arg("unlabeled") = py::none(),
      py::arg("alpha") = 2.0, py::arg("gamma") = 0.2, py::arg("lambda_") = 0.01, py::arg("knn_k") = 3,
      "Adapted metric of one episode. Returns (metric, repaired).");

  m.def(
      "classify",
      [](const RowMatrix& queries, const RowMatrix& prototypes, const Matrix& metric, const std::string& mode) {
        if (mode != "bisim" && mode != "positive") throw Error(ErrorKind::parameter, "mode is bisim or positive");
        const auto t = classify(to_points(queries), to_points(prototypes), MetricMatrix(metric),
                                mode == "bisim" ? SimilarityMode::bisim : SimilarityMode::positive_only);
        py::dict d;
        d["positive"] = t.positive;
        d["negative"] = t.negative;
        d["bisim"] = t.bisim;
        d["predictions"] = t.predictions;
        return d;
      },
      py::arg("queries"), py::arg("prototypes"), py::arg("metric"), py::arg("mode") = "bisim");

  m.def(
      "sparsity_report",
      [](const Matrix& metric) {
        const auto r = sparsity_report(metric);
        py::dict d;
        d["diag_mean"] = r.diag_mean;
        d["offdiag_mean"] = r.offdiag_mean;
        d["gap_ratio"] = r.gap_ratio ? py::cast(*r.gap_ratio) : py::none();
        d["sorted_values"] = r.sorted_values;
        return d;
      },
      py::arg("metric"));

  m.def(
      "run_trials",
      [](const RowMatrix& x, const Labels& labels, int n_way, int k_shot, int n_query, int trials, std::uint64_t seed,
         bool eam, bool bisim, double alpha, double gamma, double lambda, int knn_k) {
        const Dataset data = to_dataset(x, labels);
        EvalOptions o;
        o.episode = {n_way, k_shot, n_query, seed};
        o.hp = hyper(alpha, gamma, lambda, knn_k);
        o.n_trials = trials;
        py::gil_scoped_release release;
        TrialReport r = run_trials(data, o, {false, eam, bisim});
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      },
      py::arg("x"), py::arg("labels"), py::arg("n_way") = 5, py::arg("k_shot") = 1, py::arg("n_query") = 15,
      py::arg("trials") = 1000, py::arg("seed") = 0, py::arg("eam") = true, py::arg("bisim") = true,
      py::arg("alpha") = 2.0, py::arg("gamma") = 0.2, py::arg("lambda_") = 0.01, py::arg("knn_k") = 3);
}
