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

#include "team/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "team/errors.hpp"

namespace team {
namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

const char* on_off(bool b) { return b ? "on" : "off"; }

// Runs fn(t) for t in [0, n) on a worker pool. The first failing trial by
// index is rethrown with its index.
template <typename Fn>
void parallel_trials(int n, unsigned workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max(n, 1)));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto body = [&] {
    for (int t = next++; t < n; t = next++) {
      try {
        fn(t);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  }
  for (int t = 0; t < n; ++t) {
    if (!errors[static_cast<std::size_t>(t)]) continue;
    try {
      std::rethrow_exception(errors[static_cast<std::size_t>(t)]);
    } catch (const Error& e) {
      throw Error(e.kind(), "trial " + std::to_string(t) + ": " + e.what());
    }
  }
}

TrialReport run_arm(const Dataset& data, const EvalOptions& opt, AblationSpec spec, const std::string& label) {
  if (opt.n_trials < 1) throw Error(ErrorKind::parameter, "n_trials must be positive");
  opt.episode.validate();
  opt.hp.validate();
  TrialReport report;
  report.label = label;
  report.n_trials = opt.n_trials;
  report.per_trial_accuracies.assign(static_cast<std::size_t>(opt.n_trials), 0.0);
  parallel_trials(opt.n_trials, opt.workers, [&](int t) {
    report.per_trial_accuracies[static_cast<std::size_t>(t)] =
        evaluate_episode(trial_episode(data, opt, t), opt, spec);
  });
  summarize(report);
  report.config_echo = echo_config(opt, spec);
  return report;
}

}  // namespace

std::string AblationSpec::name() const {
  if (!tim && !eam && !bisim) return "baseline";
  std::string out;
  auto add = [&](const char* part) { out += out.empty() ? part : std::string("+") + part; };
  if (tim) add("tim");
  if (eam) add("eam");
  if (bisim) add("bisim");
  return out;
}

Episode trial_episode(const Dataset& data, const EvalOptions& opt, int trial) {
  Rng rng(derive_seed(opt.episode.seed, static_cast<std::uint64_t>(trial)));
  if (opt.split != nullptr) return sample_semi_episode(data, opt.episode, *opt.split, opt.unlabeled_per_episode, rng);
  return sample_episode(data, opt.episode, rng);
}

double evaluate_episode(const Episode& raw, const EvalOptions& opt, AblationSpec spec) {
  const Episode ep = opt.model ? embed_episode(*opt.model, raw) : raw;
  const auto prototypes = compute_prototypes(ep);
  const MetricMatrix metric =
      spec.eam ? adapt_metric(ep, opt.bank, opt.hp).metric : MetricMatrix::identity(static_cast<Eigen::Index>(ep.dim()));
  const auto table = classify(ep.query_points(), prototypes, metric,
                              spec.bisim ? SimilarityMode::bisim : SimilarityMode::positive_only, opt.distance);
  return score(table, ep.query_labels());
}

void summarize(TrialReport& r) {
  const auto& acc = r.per_trial_accuracies;
  r.n_trials = static_cast<int>(acc.size());
  if (acc.empty()) return;
  double sum = 0.0;
  for (double a : acc) sum += a;  // trial-index order
  r.mean_accuracy = sum / static_cast<double>(acc.size());
  if (acc.size() < 2) {
    r.ci95_halfwidth = 0.0;
    r.ci_degenerate = true;
    return;
  }
  double ss = 0.0;
  for (double a : acc) ss += (a - r.mean_accuracy) * (a - r.mean_accuracy);
  const double sd = std::sqrt(ss / static_cast<double>(acc.size() - 1));
  r.ci95_halfwidth = 1.96 * sd / std::sqrt(static_cast<double>(acc.size()));
  r.ci_degenerate = false;
}

TrialReport run_trials(const Dataset& data, const EvalOptions& opt, AblationSpec spec) {
  return run_arm(data, opt, spec, spec.name());
}

std::vector<TrialReport> run_ablation_suite(const Dataset& data, const EvalOptions& opt,
                                            const std::optional<EmbeddingModel>& tim_model) {
  std::vector<TrialReport> rows;
  rows.push_back(run_arm(data, opt, kBaseline, "baseline"));

  EvalOptions tim_opt = opt;
  if (tim_model) tim_opt.model = tim_model;
  if (tim_model) {
    rows.push_back(run_arm(data, tim_opt, {true, false, false}, "tim"));
  } else {
    TrialReport pending;
    pending.label = "tim";
    pending.status = "requires trained model";
    pending.config_echo = echo_config(opt, {true, false, false});
    rows.push_back(std::move(pending));
  }
  rows.push_back(run_arm(data, tim_opt, {true, true, false}, "tim+eam"));
  rows.push_back(run_arm(data, tim_opt, kTeam, "team"));
  if (!tim_model) {
    for (std::size_t i = 2; i < rows.size(); ++i) rows[i].config_echo.emplace_back("tim_model", "unavailable");
  }
  return rows;
}

std::vector<ShotResult> run_shot_sweep(const Dataset& data, const EvalOptions& opt, const std::vector<int>& shots) {
  std::vector<ShotResult> out;
  for (int k : shots) {
    EvalOptions o = opt;
    o.episode.k_shot = k;
    ShotResult r;
    r.k_shot = k;
    r.baseline = run_arm(data, o, kBaseline, "baseline@k=" + std::to_string(k));
    r.team = run_arm(data, o, {false, true, true}, "team@k=" + std::to_string(k));
    r.delta = r.team.mean_accuracy - r.baseline.mean_accuracy;
    out.push_back(std::move(r));
  }
  return out;
}

SemiReport run_semi(const Dataset& data, const EvalOptions& opt, const SemiSplitConfig& split,
                    std::size_t unlabeled_per_episode, int n_splits) {
  if (n_splits < 1) throw Error(ErrorKind::parameter, "n_splits must be positive");
  SemiReport out;
  out.semi.label = "team-semi";
  out.labeled_only.label = "team-labeled";
  const AblationSpec spec{false, true, true};
  for (int s = 0; s < n_splits; ++s) {
    SemiSplitConfig cfg = split;
    cfg.split_seed = derive_seed(split.split_seed, static_cast<std::uint64_t>(s));
    const SemiSplit partition = make_semi_split(data, cfg);

    EvalOptions o = opt;
    o.split = &partition;
    o.episode.seed = derive_seed(opt.episode.seed, 0x5E111ull + static_cast<std::uint64_t>(s));
    o.unlabeled_per_episode = unlabeled_per_episode;
    TrialReport semi = run_arm(data, o, spec, "team-semi@split=" + std::to_string(s));
    o.unlabeled_per_episode = 0;
    TrialReport labeled = run_arm(data, o, spec, "team-labeled@split=" + std::to_string(s));

    out.semi_wins += semi.mean_accuracy > labeled.mean_accuracy;
    out.semi.per_trial_accuracies.insert(out.semi.per_trial_accuracies.end(), semi.per_trial_accuracies.begin(),
                                         semi.per_trial_accuracies.end());
    out.labeled_only.per_trial_accuracies.insert(out.labeled_only.per_trial_accuracies.end(),
                                                 labeled.per_trial_accuracies.begin(),
                                                 labeled.per_trial_accuracies.end());
    out.semi_per_split.push_back(std::move(semi));
    out.labeled_per_split.push_back(std::move(labeled));
  }
  summarize(out.semi);
  summarize(out.labeled_only);
  auto echo = [&](std::size_t unlabeled) {
    auto e = echo_config(opt, spec);
    e.emplace_back("labeled_fraction", fmt(split.labeled_fraction));
    e.emplace_back("unlabeled_per_episode", std::to_string(unlabeled));
    e.emplace_back("splits", std::to_string(n_splits));
    return e;
  };
  out.semi.config_echo = echo(unlabeled_per_episode);
  out.labeled_only.config_echo = echo(0);
  return out;
}

std::vector<SparsityReport> sparsity_over_episodes(const Dataset& data, const EvalOptions& opt, int n) {
  std::vector<SparsityReport> out;
  for (int t = 0; t < n; ++t) {
    Episode ep = trial_episode(data, opt, t);
    if (opt.model) ep = embed_episode(*opt.model, ep);
    out.push_back(sparsity_report(adapt_metric(ep, opt.bank, opt.hp).metric));
  }
  return out;
}

ScatterPair random_scatter_instance(int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.3, 1.5);
  Vector axis(dim);
  for (int j = 0; j < dim; ++j) axis[j] = scale(rng);
  Episode ep;
  ep.n_way = 5;
  ep.k_shot = 3;
  std::size_t row = 0;
  for (int c = 0; c < ep.n_way; ++c) {
    Vector mu(dim);
    for (int j = 0; j < dim; ++j) mu[j] = 2.0 * normal(rng);
    for (int i = 0; i < 3 + 5; ++i) {
      Vector x(dim);
      for (int j = 0; j < dim; ++j) x[j] = mu[j] + axis[j] * normal(rng);
      (i < 3 ? ep.support : ep.query).push_back({std::move(x), c, row++});
    }
  }
  const auto protos = compute_prototypes(ep);
  return scatter_matrices(build_constraints(ep, protos, PrototypeBank{}, 3, true));
}

std::vector<OracleCheckRow> run_oracle_check(int dim, int instances, std::uint64_t seed, MetricHyperParams hp,
                                             int steps, double step_size) {
  if (dim < 1 || instances < 1) throw Error(ErrorKind::parameter, "dim and instances must be positive");
  hp.alpha = 0.0;
  std::vector<OracleCheckRow> rows;
  for (int i = 0; i < instances; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const ScatterPair sp = random_scatter_instance(dim, rng);
    const Matrix zero = Matrix::Zero(dim, dim);
    const ClosedFormResult closed = closed_form_metric(sp, zero, hp);
    const OracleResult oracle = oracle_solve(sp, hp, steps, step_size);
    OracleCheckRow row;
    row.frobenius_gap = (oracle.metric.matrix() - closed.metric.matrix()).norm();
    row.objective_gap = std::abs(eam_objective(oracle.metric, sp, hp) - eam_objective(closed.metric, sp, hp));
    row.closed_form_gradient_norm = eam_gradient(closed.metric.matrix(), sp, hp).norm();
    row.oracle_converged = oracle.converged;
    row.repaired = closed.repaired;
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::pair<std::string, std::string>> echo_config(const EvalOptions& opt, AblationSpec spec) {
  std::vector<std::pair<std::string, std::string>> e;
  e.emplace_back("n_way", std::to_string(opt.episode.n_way));
  e.emplace_back("k_shot", std::to_string(opt.episode.k_shot));
  e.emplace_back("n_query", std::to_string(opt.episode.n_query_per_class));
  e.emplace_back("seed", std::to_string(opt.episode.seed));
  e.emplace_back("trials", std::to_string(opt.n_trials));
  e.emplace_back("alpha", fmt(opt.hp.alpha));
  e.emplace_back("gamma", fmt(opt.hp.gamma));
  e.emplace_back("lambda", fmt(opt.hp.lambda));
  e.emplace_back("knn_k", std::to_string(opt.hp.knn_k));
  e.emplace_back("pd_floor", fmt(opt.hp.pd_floor));
  e.emplace_back("prior", opt.hp.prior.is_identity() ? "identity" : "explicit");
  e.emplace_back("transductive", on_off(opt.hp.transductive));
  e.emplace_back("bank_size", std::to_string(opt.bank.size()));
  e.emplace_back("distance", opt.distance == DistanceForm::squared ? "squared" : "unsquared");
  e.emplace_back("model", opt.model ? to_string(opt.model->kind()) : "none");
  e.emplace_back("tim", on_off(spec.tim));
  e.emplace_back("eam", on_off(spec.eam));
  e.emplace_back("bisim", on_off(spec.bisim));
  return e;
}

std::string format_report(const TrialReport& r) {
  std::ostringstream os;
  os << "label=" << r.label << '\n';
  os << "status=" << r.status << '\n';
  for (const auto& [k, v] : r.config_echo) os << "config." << k << '=' << v << '\n';
  if (r.status == "ok") {
    os << "n_trials=" << r.n_trials << '\n';
    os << "mean_accuracy=" << fmt(r.mean_accuracy) << '\n';
    os << "ci95_halfwidth=" << fmt(r.ci95_halfwidth) << '\n';
    os << "ci_degenerate=" << (r.ci_degenerate ? "true" : "false") << '\n';
  }
  return os.str();
}

void write_trials_csv(const std::vector<TrialReport>& reports, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  out << "label,trial,accuracy\n";
  for (const auto& r : reports) {
    for (std::size_t t = 0; t < r.per_trial_accuracies.size(); ++t) {
      out << r.label << ',' << t << ',' << fmt(r.per_trial_accuracies[t]) << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

}  // namespace team
