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

#include "team/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "team/eam.hpp"
#include "team/errors.hpp"
#include "team/sampler.hpp"

namespace team {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatView = Eigen::Map<const RowMajor>;
using MatView = Eigen::Map<RowMajor>;

struct Layout {
  Eigen::Index w1, b1, w2, b2;  // offsets
};

Layout layout(ModelKind kind, int in, int hidden, int out) {
  if (kind == ModelKind::linear) {
    const Eigen::Index w = static_cast<Eigen::Index>(out) * in;
    return {0, w, w + out, w + out};
  }
  const Eigen::Index w1 = static_cast<Eigen::Index>(hidden) * in;
  const Eigen::Index w2 = static_cast<Eigen::Index>(out) * hidden;
  return {0, w1, w1 + hidden, w1 + hidden + w2};
}

}  // namespace

ModelKind parse_model_kind(std::string_view name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "mlp1") return ModelKind::mlp1;
  throw Error(ErrorKind::parameter, "unknown model kind '" + std::string(name) + "'");
}

const char* to_string(ModelKind kind) { return kind == ModelKind::linear ? "linear" : "mlp1"; }

std::size_t EmbeddingModel::param_count(ModelKind kind, int in, int hidden, int out) {
  if (kind == ModelKind::linear) return static_cast<std::size_t>(out) * (static_cast<std::size_t>(in) + 1);
  return static_cast<std::size_t>(hidden) * (static_cast<std::size_t>(in) + 1) +
         static_cast<std::size_t>(out) * (static_cast<std::size_t>(hidden) + 1);
}

EmbeddingModel::EmbeddingModel(ModelKind kind, int in_dim, int hidden_dim, int out_dim, Vector params)
    : kind_(kind),
      in_dim_(in_dim),
      hidden_dim_(kind == ModelKind::linear ? 0 : hidden_dim),
      out_dim_(out_dim),
      params_(std::move(params)) {
  if (in_dim_ < 1 || out_dim_ < 1 || (kind_ == ModelKind::mlp1 && hidden_dim_ < 1)) {
    throw Error(ErrorKind::parameter, "model dimensions must be positive");
  }
  if (static_cast<std::size_t>(params_.size()) != param_count(kind_, in_dim_, hidden_dim_, out_dim_)) {
    throw Error(ErrorKind::parameter, "parameter count does not match the architecture");
  }
  if (!params_.allFinite()) throw Error(ErrorKind::parameter, "model parameters must be finite");
}

EmbeddingModel EmbeddingModel::random(ModelKind kind, int in_dim, int hidden_dim, int out_dim, Rng& rng) {
  const int hidden = kind == ModelKind::linear ? 0 : hidden_dim;
  Vector p(static_cast<Eigen::Index>(param_count(kind, in_dim, hidden, out_dim)));
  const Layout l = layout(kind, in_dim, hidden, out_dim);
  auto fill = [&](Eigen::Index from, Eigen::Index to, int fan_in) {
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-r, r);
    for (Eigen::Index i = from; i < to; ++i) p[i] = u(rng);
  };
  if (kind == ModelKind::linear) {
    fill(0, p.size(), in_dim);
  } else {
    fill(l.w1, l.w2, in_dim);
    fill(l.w2, p.size(), hidden);
  }
  return EmbeddingModel(kind, in_dim, hidden, out_dim, std::move(p));
}

EmbeddingModel EmbeddingModel::identity(int dim) {
  Vector p = Vector::Zero(static_cast<Eigen::Index>(param_count(ModelKind::linear, dim, 0, dim)));
  MatView(p.data(), dim, dim).setIdentity();
  return EmbeddingModel(ModelKind::linear, dim, 0, dim, std::move(p));
}

EmbeddingModel EmbeddingModel::with_params(Vector params) const {
  return EmbeddingModel(kind_, in_dim_, hidden_dim_, out_dim_, std::move(params));
}

Vector EmbeddingModel::forward(const Vector& x) const {
  if (x.size() != in_dim_) throw Error(ErrorKind::parameter, "embed: input dimension mismatch");
  const Layout l = layout(kind_, in_dim_, hidden_dim_, out_dim_);
  if (kind_ == ModelKind::linear) {
    return ConstMatView(params_.data(), out_dim_, in_dim_) * x + params_.segment(l.b1, out_dim_);
  }
  const Vector h = (ConstMatView(params_.data() + l.w1, hidden_dim_, in_dim_) * x + params_.segment(l.b1, hidden_dim_))
                       .cwiseMax(0.0);
  return ConstMatView(params_.data() + l.w2, out_dim_, hidden_dim_) * h + params_.segment(l.b2, out_dim_);
}

void EmbeddingModel::accumulate_gradient(const Vector& x, const Vector& upstream, Vector& grad) const {
  const Layout l = layout(kind_, in_dim_, hidden_dim_, out_dim_);
  if (kind_ == ModelKind::linear) {
    MatView(grad.data(), out_dim_, in_dim_).noalias() += upstream * x.transpose();
    grad.segment(l.b1, out_dim_) += upstream;
    return;
  }
  const Vector pre = ConstMatView(params_.data() + l.w1, hidden_dim_, in_dim_) * x + params_.segment(l.b1, hidden_dim_);
  const Vector h = pre.cwiseMax(0.0);
  MatView(grad.data() + l.w2, out_dim_, hidden_dim_).noalias() += upstream * h.transpose();
  grad.segment(l.b2, out_dim_) += upstream;
  Vector dh = ConstMatView(params_.data() + l.w2, out_dim_, hidden_dim_).transpose() * upstream;
  for (Eigen::Index k = 0; k < dh.size(); ++k) {
    if (pre[k] <= 0.0) dh[k] = 0.0;
  }
  MatView(grad.data() + l.w1, hidden_dim_, in_dim_).noalias() += dh * x.transpose();
  grad.segment(l.b1, hidden_dim_) += dh;
}

// ---------------------------------------------------------------- checkpoints

void save_model(const EmbeddingModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path.string());
  out << "TEAMMODEL1 " << to_string(model.kind()) << ' ' << model.in_dim() << ' ' << model.hidden_dim() << ' '
      << model.out_dim() << '\n';
  for (Eigen::Index i = 0; i < model.params().size(); ++i) {
    char buf[8];
    const double v = model.params()[i];
    std::memcpy(buf, &v, 8);
    out.write(buf, 8);
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, kind;
  int in_dim = 0, hidden = 0, out_dim = 0;
  if (!(hs >> magic >> kind >> in_dim >> hidden >> out_dim) || magic != "TEAMMODEL1") {
    throw Error(ErrorKind::format, path.string() + ": not a TEAMMODEL1 checkpoint");
  }
  ModelKind k;
  try {
    k = parse_model_kind(kind);
  } catch (const Error&) {
    throw Error(ErrorKind::format, path.string() + ": unknown model kind '" + kind + "'");
  }
  if (in_dim < 1 || out_dim < 1 || hidden < 0) throw Error(ErrorKind::format, path.string() + ": bad dimensions");
  const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t n = EmbeddingModel::param_count(k, in_dim, hidden, out_dim);
  if (body.size() != n * 8) throw Error(ErrorKind::format, path.string() + ": parameter block size mismatch");
  Vector p(static_cast<Eigen::Index>(n));
  std::memcpy(p.data(), body.data(), body.size());
  try {
    return EmbeddingModel(k, in_dim, hidden, out_dim, std::move(p));
  } catch (const Error& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- loss

EmbeddingVector embed(const EmbeddingModel& model, const EmbeddingVector& x) {
  return {model.forward(x.values), x.label};
}

Episode embed_episode(const EmbeddingModel& model, const Episode& episode) {
  Episode out = episode;
  for (auto& s : out.support) s.x = model.forward(s.x);
  for (auto& q : out.query) q.x = model.forward(q.x);
  for (auto& u : out.unlabeled) u = model.forward(u);
  return out;
}

MetricMatrix episode_metric(const Episode& embedded, const MetricHyperParams& hp, MetricMode mode,
                            const PrototypeBank& bank) {
  if (mode == MetricMode::euclidean) return MetricMatrix::identity(static_cast<Eigen::Index>(embedded.dim()));
  return adapt_metric(embedded, bank, hp).metric;
}

LossAndGradient loss_and_gradient(const EmbeddingModel& model, const Episode& episode, const MetricMatrix& metric,
                                  DistanceForm form) {
  if (episode.query.empty()) throw Error(ErrorKind::parameter, "episode has no queries");
  const Episode emb = embed_episode(model, episode);
  const auto prototypes = compute_prototypes(emb);
  const std::size_t n_way = prototypes.size();
  const Matrix& m = metric.matrix();
  const double n_query = static_cast<double>(emb.query.size());

  LossAndGradient out;
  out.gradient = Vector::Zero(model.params().size());
  std::vector<Vector> proto_grad(n_way, Vector::Zero(model.out_dim()));
  Vector dist(static_cast<Eigen::Index>(n_way));
  std::vector<Vector> mz(n_way);

  for (std::size_t i = 0; i < emb.query.size(); ++i) {
    const Vector& e = emb.query[i].x;
    for (std::size_t c = 0; c < n_way; ++c) {
      const Vector z = e - prototypes[c];
      mz[c] = m * z;
      const double q = std::max(0.0, z.dot(mz[c]));
      dist[static_cast<Eigen::Index>(c)] = form == DistanceForm::squared ? q : std::sqrt(q);
    }
    const double lo = dist.minCoeff();
    const Vector w = (-(dist.array() - lo)).exp();
    const double norm = w.sum();
    const auto y = static_cast<Eigen::Index>(emb.query[i].cls);
    out.loss += (dist[y] - lo + std::log(norm)) / n_query;

    Vector g_query = Vector::Zero(model.out_dim());
    for (std::size_t c = 0; c < n_way; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      const double dl_dd = ((ci == y ? 1.0 : 0.0) - w[ci] / norm) / n_query;
      Vector dd_dz;
      if (form == DistanceForm::squared) {
        dd_dz = 2.0 * mz[c];
      } else {
        dd_dz = dist[ci] > 0.0 ? Vector(mz[c] / dist[ci]) : Vector(Vector::Zero(model.out_dim()));
      }
      g_query += dl_dd * dd_dz;
      proto_grad[c] -= dl_dd * dd_dz;
    }
    model.accumulate_gradient(episode.query[i].x, g_query, out.gradient);
  }

  std::vector<int> counts(n_way, 0);
  for (const auto& s : emb.support) ++counts[static_cast<std::size_t>(s.cls)];
  for (const auto& s : episode.support) {
    const auto c = static_cast<std::size_t>(s.cls);
    model.accumulate_gradient(s.x, proto_grad[c] / counts[c], out.gradient);
  }
  return out;
}

double episode_loss(const EmbeddingModel& model, const Episode& episode, const MetricMatrix& metric,
                    DistanceForm form) {
  return loss_and_gradient(model, episode, metric, form).loss;
}

double episode_loss(const EmbeddingModel& model, const Episode& episode, const MetricHyperParams& hp, MetricMode mode,
                    DistanceForm form) {
  const MetricMatrix metric = episode_metric(embed_episode(model, episode), hp, mode);
  return episode_loss(model, episode, metric, form);
}

Vector loss_gradient(const EmbeddingModel& model, const Episode& episode, const MetricHyperParams& hp, MetricMode mode,
                     DistanceForm form) {
  const MetricMatrix metric = episode_metric(embed_episode(model, episode), hp, mode);
  return loss_and_gradient(model, episode, metric, form).gradient;
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::parameter, "learning_rate must be finite and non-negative");
  }
  if (episodes < 1 || lr_halving_every < 1 || eval_every < 1 || eval_episodes < 0) {
    throw Error(ErrorKind::parameter, "episodes, lr_halving_every and eval_every must be positive");
  }
  episode.validate();
  if (tim) tim->validate();
}

TrainResult train(const EmbeddingModel& model, const Dataset& data, const TrainConfig& cfg,
                  const MetricHyperParams& hp) {
  cfg.validate();
  if (static_cast<std::size_t>(model.in_dim()) != data.dim()) {
    throw Error(ErrorKind::parameter, "model input dimension does not match the dataset");
  }

  std::vector<Episode> eval_set;
  for (int i = 0; i < cfg.eval_episodes; ++i) {
    Rng rng(derive_seed(cfg.seed ^ 0xE7A1E7A1ull, static_cast<std::uint64_t>(i)));
    eval_set.push_back(sample_episode(data, cfg.episode, rng));
  }
  auto eval_loss = [&](const EmbeddingModel& m) {
    double sum = 0.0;
    for (const auto& ep : eval_set) sum += episode_loss(m, ep, hp, cfg.metric_mode);
    return eval_set.empty() ? 0.0 : sum / static_cast<double>(eval_set.size());
  };

  TrainResult result{model, {}, {}};
  result.episode_losses.reserve(static_cast<std::size_t>(cfg.episodes));
  result.loss_trace.push_back(eval_loss(result.model));

  Vector params = model.params();
  for (int e = 0; e < cfg.episodes; ++e) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(e)));
    Episode ep = sample_episode(data, cfg.episode, rng);
    if (cfg.tim) ep = augment_episode(ep, *cfg.tim, e, rng);

    const MetricMatrix metric = episode_metric(embed_episode(result.model, ep), hp, cfg.metric_mode);
    const LossAndGradient lg = loss_and_gradient(result.model, ep, metric);
    if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
      throw Error(ErrorKind::training, "loss diverged at episode " + std::to_string(e));
    }
    result.episode_losses.push_back(lg.loss);

    const double lr = cfg.learning_rate * std::pow(0.5, e / cfg.lr_halving_every);
    params -= lr * lg.gradient;
    if (!params.allFinite()) throw Error(ErrorKind::training, "parameters diverged at episode " + std::to_string(e));
    result.model = result.model.with_params(params);

    if ((e + 1) % cfg.eval_every == 0 || e + 1 == cfg.episodes) result.loss_trace.push_back(eval_loss(result.model));
  }
  return result;
}

}  // namespace team
