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

#ifndef TEAM_SYNTH_HPP_
#define TEAM_SYNTH_HPP_

#include <cstdint>
#include <vector>

#include "team/types.hpp"

namespace team {

/// Gaussian class clusters. The first (dim - nuisance_dims) coordinates
/// carry class signal: class means are drawn N(0, class_sep^2) per
/// coordinate. The trailing nuisance_dims coordinates are zero-mean for
/// every class. Coordinate j has noise std noise_aniso[j].
struct SynthConfig {
  int n_classes = 20;
  int dim = 16;
  int per_class = 200;
  double class_sep = 3.0;
  std::vector<double> noise_aniso;
  int nuisance_dims = 8;
  std::uint64_t seed = 7;

  void validate() const;

  /// The default anisotropic benchmark: 20 classes, 8 signal dims with
  /// std 1, 8 nuisance dims with std 3, 200 per class, separation 3.
  static SynthConfig an16();
};

/// Rows are grouped by class, labels 0..n_classes-1.
Dataset generate(const SynthConfig& cfg);

/// Class means the generator used (signal dims; zero on nuisance dims).
std::vector<Vector> synth_class_means(const SynthConfig& cfg);

}  // namespace team

#endif  // TEAM_SYNTH_HPP_
