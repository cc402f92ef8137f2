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

#ifndef TEAM_TRAINER_HPP_
#define TEAM_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "team/bisim.hpp"
#include "team/rng.hpp"
#include "team/tim.hpp"
#include "team/types.hpp"

namespace team {

enum class ModelKind { linear, mlp1 };

ModelKind parse_model_kind(std::string_view name);
const char* to_string(ModelKind kind);

/// Small parametric embedding f(x).
///   linear: W x + b
///   mlp1:   W2 relu(W1 x + b1) + b2
/// Parameters are stored flat, matrices row-major, in the order
/// W, b (linear) or W1, b1, W2, b2 (mlp1).
class EmbeddingModel {
 public:
  EmbeddingModel(ModelKind kind, int in_dim, int hidden_dim, int out_dim, Vector params);

  static std::size_t param_count(ModelKind kind, int in_dim, int hidden_dim, int out_dim);
  /// Each layer uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static EmbeddingModel random(ModelKind kind, int in_dim, int hidden_dim, int out_dim, Rng& rng);
  /// Linear model with W = I, b = 0.
  static EmbeddingModel identity(int dim);

  ModelKind kind() const noexcept { return kind_; }
  int in_dim() const noexcept { return in_dim_; }
  int hidden_dim() const noexcept { return hidden_dim_; }
  int out_dim() const noexcept { return out_dim_; }
  const Vector& params() const noexcept { return params_; }

  Vector forward(const Vector& x) const;

  /// Adds d(loss)/d(params) to `grad` given d(loss)/d(output) at input x.
  void accumulate_gradient(const Vector& x, const Vector& upstream, Vector& grad) const;

  EmbeddingModel with_params(Vector params) const;

 private:
  ModelKind kind_;
  int in_dim_;
  int hidden_dim_;
  int out_dim_;
  Vector params_;
};

/// Checkpoint: ASCII header "TEAMMODEL1 <kind> <in_dim> <hidden_dim> <out_dim>\n"
/// followed by params as f64 LE.
void save_model(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_model(const std::filesystem::path& path);

EmbeddingVector embed(const EmbeddingModel& model, const EmbeddingVector& x);

/// Every support, query and unlabeled point passed through the model.
Episode embed_episode(const EmbeddingModel& model, const Episode& episode);

enum class MetricMode { euclidean, eam };

/// Metric used for an already embedded episode: identity, or the adapted
/// closed form.
MetricMatrix episode_metric(const Episode& embedded, const MetricHyperParams& hp, MetricMode mode,
                            const PrototypeBank& bank = {});

/// Mean negative log positive-direction probability of the true query labels.
double episode_loss(const EmbeddingModel& model, const Episode& episode, const MetricHyperParams& hp,
                    MetricMode mode, DistanceForm form = DistanceForm::unsquared);

/// Same loss with the metric held fixed.
double episode_loss(const EmbeddingModel& model, const Episode& episode, const MetricMatrix& metric,
                    DistanceForm form = DistanceForm::unsquared);

struct LossAndGradient {
  double loss = 0.0;
  Vector gradient;
};

/// Analytic gradient of the fixed-metric loss.
LossAndGradient loss_and_gradient(const EmbeddingModel& model, const Episode& episode, const MetricMatrix& metric,
                                  DistanceForm form = DistanceForm::unsquared);

/// Gradient of episode_loss with the episode metric computed from the
/// current model and then treated as a constant.
Vector loss_gradient(const EmbeddingModel& model, const Episode& episode, const MetricHyperParams& hp,
                     MetricMode mode, DistanceForm form = DistanceForm::unsquared);

struct TrainConfig {
  double learning_rate = 0.01;
  int episodes = 1000;
  std::optional<TimConfig> tim;
  int lr_halving_every = 10000;
  int eval_every = 100;
  std::uint64_t seed = 0;
  EpisodeConfig episode;
  MetricMode metric_mode = MetricMode::euclidean;
  /// Fixed episodes scored at every checkpoint of the loss trace.
  int eval_episodes = 20;

  void validate() const;
};

struct TrainResult {
  EmbeddingModel model;
  /// Training loss of every episode, before its update.
  std::vector<double> episode_losses;
  /// Mean loss on the fixed evaluation episodes at episode 0, every
  /// eval_every episodes, and at the end.
  std::vector<double> loss_trace;
};

/// Plain SGD over sampled (and optionally mixed) episodes; the learning
/// rate halves every lr_halving_every episodes. Throws Error(training) on a
/// non-finite loss.
TrainResult train(const EmbeddingModel& model, const Dataset& data, const TrainConfig& cfg,
                  const MetricHyperParams& hp);

}  // namespace team

#endif  // TEAM_TRAINER_HPP_
