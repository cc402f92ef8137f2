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

#ifndef TEAM_HARNESS_HPP_
#define TEAM_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "team/bisim.hpp"
#include "team/eam.hpp"
#include "team/sampler.hpp"
#include "team/trainer.hpp"
#include "team/types.hpp"

namespace team {

/// Which components an evaluation arm uses. `tim` only selects a model
/// trained with mixing; evaluation episodes are never mixed.
struct AblationSpec {
  bool tim = false;
  bool eam = false;
  bool bisim = false;

  std::string name() const;
};

inline constexpr AblationSpec kBaseline{false, false, false};
inline constexpr AblationSpec kTeam{true, true, true};

struct TrialReport {
  std::string label;
  /// "ok", or "requires trained model" for a TIM arm without one.
  std::string status = "ok";
  double mean_accuracy = 0.0;
  double ci95_halfwidth = 0.0;
  /// Set when n_trials == 1 and the interval is reported as 0.
  bool ci_degenerate = false;
  int n_trials = 0;
  std::vector<double> per_trial_accuracies;
  std::vector<std::pair<std::string, std::string>> config_echo;
};

struct EvalOptions {
  /// episode.seed is the base seed; trial t uses an independent stream
  /// derived from (seed, t), so every arm sees the same episodes.
  EpisodeConfig episode;
  MetricHyperParams hp;
  PrototypeBank bank;
  int n_trials = 1000;
  /// Embedding applied to every episode point before the metric.
  std::optional<EmbeddingModel> model;
  DistanceForm distance = DistanceForm::unsquared;
  /// 0 = hardware concurrency.
  unsigned workers = 0;
  /// Semi-supervised sampling; null for the plain protocol.
  const SemiSplit* split = nullptr;
  std::size_t unlabeled_per_episode = 0;
};

/// Episode of trial `t` (before embedding).
Episode trial_episode(const Dataset& data, const EvalOptions& opt, int trial);

/// Accuracy of one episode under `spec`.
double evaluate_episode(const Episode& episode, const EvalOptions& opt, AblationSpec spec);

/// Mean, 1.96-normal CI half-width and degeneracy flag of a sample.
void summarize(TrialReport& report);

TrialReport run_trials(const Dataset& data, const EvalOptions& opt, AblationSpec spec);

/// Baseline, +TIM, +TIM+EAM and +TIM+EAM+BiSim on identical episodes.
/// Arms with tim = true use `tim_model` when given. Without it the +TIM arm
/// is reported as "requires trained model" and the other TIM arms fall back
/// to opt.model.
std::vector<TrialReport> run_ablation_suite(const Dataset& data, const EvalOptions& opt,
                                            const std::optional<EmbeddingModel>& tim_model = std::nullopt);

struct ShotResult {
  int k_shot = 0;
  TrialReport baseline;
  TrialReport team;
  /// team.mean_accuracy - baseline.mean_accuracy
  double delta = 0.0;
};

/// Paired baseline vs EAM+BiSim at each K.
std::vector<ShotResult> run_shot_sweep(const Dataset& data, const EvalOptions& opt, const std::vector<int>& shots);

struct SemiReport {
  TrialReport semi;
  TrialReport labeled_only;
  std::vector<TrialReport> semi_per_split;
  std::vector<TrialReport> labeled_per_split;
  /// Splits where the semi arm's mean is strictly higher.
  int semi_wins = 0;
};

/// EAM+BiSim with and without an unlabeled pool, averaged over n_splits
/// labeled/unlabeled partitions with seeds derived from split.split_seed.
/// Both arms share support and query episodes.
SemiReport run_semi(const Dataset& data, const EvalOptions& opt, const SemiSplitConfig& split,
                    std::size_t unlabeled_per_episode, int n_splits = 10);

/// Sparsity statistics of the adapted metric over the first n trial episodes.
std::vector<SparsityReport> sparsity_over_episodes(const Dataset& data, const EvalOptions& opt, int n);

struct OracleCheckRow {
  double frobenius_gap = 0.0;
  double objective_gap = 0.0;
  double closed_form_gradient_norm = 0.0;
  bool oracle_converged = false;
  bool repaired = false;
};

/// Scatter pair of a random Gaussian episode (5-way 3-shot, 5 queries per
/// class) in dimension `dim` with random per-axis scales.
ScatterPair random_scatter_instance(int dim, Rng& rng);

/// Closed form (alpha = 0) against oracle_solve on random instances.
std::vector<OracleCheckRow> run_oracle_check(int dim, int instances, std::uint64_t seed, MetricHyperParams hp,
                                             int steps = 20000, double step_size = 0.5);

/// Configuration snapshot for report headers.
std::vector<std::pair<std::string, std::string>> echo_config(const EvalOptions& opt, AblationSpec spec);

/// key=value lines, one report after another.
std::string format_report(const TrialReport& report);

/// CSV "label,trial,accuracy" of every per-trial accuracy.
void write_trials_csv(const std::vector<TrialReport>& reports, const std::filesystem::path& path);

}  // namespace team

#endif  // TEAM_HARNESS_HPP_
