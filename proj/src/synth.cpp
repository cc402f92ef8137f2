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

#include "team/synth.hpp"

#include <cmath>

#include "team/errors.hpp"
#include "team/rng.hpp"

namespace team {

void SynthConfig::validate() const {
  if (n_classes < 1 || dim < 1 || per_class < 1) {
    throw Error(ErrorKind::parameter, "n_classes, dim and per_class must be positive");
  }
  if (!(class_sep >= 0.0) || !std::isfinite(class_sep)) throw Error(ErrorKind::parameter, "class_sep must be >= 0");
  if (nuisance_dims < 0 || nuisance_dims >= dim) throw Error(ErrorKind::parameter, "need 0 <= nuisance_dims < dim");
  if (noise_aniso.size() != static_cast<std::size_t>(dim)) {
    throw Error(ErrorKind::parameter, "noise_aniso must have one std per dimension");
  }
  for (double s : noise_aniso) {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::parameter, "noise stds must be positive");
  }
}

SynthConfig SynthConfig::an16() {
  SynthConfig cfg;
  cfg.noise_aniso.assign(8, 1.0);
  cfg.noise_aniso.insert(cfg.noise_aniso.end(), 8, 3.0);
  return cfg;
}

namespace {

std::vector<Vector> draw_means(const SynthConfig& cfg, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int signal = cfg.dim - cfg.nuisance_dims;
  std::vector<Vector> means;
  for (int c = 0; c < cfg.n_classes; ++c) {
    Vector mu = Vector::Zero(cfg.dim);
    for (int j = 0; j < signal; ++j) mu[j] = cfg.class_sep * normal(rng);
    means.push_back(std::move(mu));
  }
  return means;
}

}  // namespace

std::vector<Vector> synth_class_means(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed));
  return draw_means(cfg, rng);
}

Dataset generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed));
  const auto means = draw_means(cfg, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<EmbeddingVector> rows;
  rows.reserve(static_cast<std::size_t>(cfg.n_classes) * static_cast<std::size_t>(cfg.per_class));
  for (int c = 0; c < cfg.n_classes; ++c) {
    for (int i = 0; i < cfg.per_class; ++i) {
      Vector x(cfg.dim);
      for (int j = 0; j < cfg.dim; ++j) x[j] = means[static_cast<std::size_t>(c)][j] + cfg.noise_aniso[static_cast<std::size_t>(j)] * normal(rng);
      rows.push_back({std::move(x), static_cast<std::uint32_t>(c)});
    }
  }
  return Dataset(std::move(rows));
}

}  // namespace team
