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

// Command-line front end for the few-shot engine.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "team/embedding_io.hpp"
#include "team/errors.hpp"
#include "team/harness.hpp"
#include "team/synth.hpp"
#include "team/trainer.hpp"

using namespace team;

namespace {

struct Common {
  int n_way = 5;
  int k_shot = 1;
  int n_query = 15;
  int trials = 1000;
  std::uint64_t seed = 0;
  double alpha = 2.0;
  double gamma = 0.2;
  double lambda = 0.01;
  int knn_k = 3;
  std::string prior = "identity";
  std::string embeddings;
  std::string format;
  bool bisim = true;
  bool eam = true;
  bool tim = false;
  std::string out;
  std::string model;
  std::string distance = "unsquared";
  unsigned workers = 0;
  std::string trials_csv;
};

void add_common(CLI::App* app, Common& c) {
  const std::map<std::string, bool> on_off{{"on", true}, {"off", false}};
  app->add_option("--n-way", c.n_way, "classes per episode")->capture_default_str();
  app->add_option("--k-shot", c.k_shot, "support examples per class")->capture_default_str();
  app->add_option("--n-query", c.n_query, "queries per class")->capture_default_str();
  app->add_option("--trials", c.trials, "evaluation episodes")->capture_default_str();
  app->add_option("--seed", c.seed, "base seed")->capture_default_str();
  app->add_option("--alpha", c.alpha)->capture_default_str();
  app->add_option("--gamma", c.gamma)->capture_default_str();
  app->add_option("--lambda", c.lambda)->capture_default_str();
  app->add_option("--knn-k", c.knn_k)->capture_default_str();
  app->add_option("--prior", c.prior, "identity, or a matrix block file")->capture_default_str();
  app->add_option("--embeddings", c.embeddings, "embedding file");
  app->add_option("--format", c.format, "csv or bin; default from the file extension")
      ->check(CLI::IsMember({"csv", "bin", "binary"}));
  app->add_option("--bisim", c.bisim)->transform(CLI::CheckedTransformer(on_off))->default_str("on");
  app->add_option("--eam", c.eam)->transform(CLI::CheckedTransformer(on_off))->default_str("on");
  app->add_option("--tim", c.tim)->transform(CLI::CheckedTransformer(on_off))->default_str("off");
  app->add_option("--out", c.out, "output path; stdout when omitted");
  app->add_option("--model", c.model, "embedding model checkpoint applied before evaluation");
  app->add_option("--distance", c.distance)->check(CLI::IsMember({"unsquared", "squared"}))->capture_default_str();
  app->add_option("--workers", c.workers, "0 = hardware concurrency")->capture_default_str();
  app->add_option("--trials-csv", c.trials_csv, "per-trial accuracies as CSV");
}

EmbeddingFormat file_format(const Common& c, const std::string& path) {
  if (!c.format.empty()) return parse_format(c.format);
  return path.ends_with(".csv") ? EmbeddingFormat::csv : EmbeddingFormat::binary;
}

MetricHyperParams hyper(const Common& c) {
  MetricHyperParams hp;
  hp.alpha = c.alpha;
  hp.gamma = c.gamma;
  hp.lambda = c.lambda;
  hp.knn_k = c.knn_k;
  if (c.prior != "identity") hp.prior = MetricPrior::explicit_matrix(load_matrix_block(c.prior));
  hp.validate();
  return hp;
}

Dataset load(const Common& c) {
  if (c.embeddings.empty()) throw Error(ErrorKind::parameter, "--embeddings is required");
  return load_embeddings(c.embeddings, file_format(c, c.embeddings));
}

EvalOptions eval_options(const Common& c) {
  EvalOptions o;
  o.episode = {c.n_way, c.k_shot, c.n_query, c.seed};
  o.hp = hyper(c);
  o.n_trials = c.trials;
  o.workers = c.workers;
  o.distance = c.distance == "squared" ? DistanceForm::squared : DistanceForm::unsquared;
  if (!c.model.empty()) o.model = load_model(c.model);
  return o;
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw Error(ErrorKind::io, "cannot write " + c.out);
  f << text;
}

std::string join_reports(const std::vector<TrialReport>& reports) {
  std::string s;
  for (const auto& r : reports) s += format_report(r) + "\n";
  return s;
}

void maybe_csv(const Common& c, const std::vector<TrialReport>& reports) {
  if (!c.trials_csv.empty()) write_trials_csv(reports, c.trials_csv);
}

std::string median_line(std::vector<double> v, const char* key) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double med = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  std::ostringstream os;
  os.precision(10);
  os << key << '=' << med << '\n';
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot evaluation with episode-adaptive metrics"};
  app.require_subcommand(1);
  Common c;

  auto* eval = app.add_subcommand("eval", "mean accuracy over trial episodes");
  add_common(eval, c);

  auto* ablate = app.add_subcommand("ablate", "baseline, +tim, +tim+eam and full rows on paired episodes");
  add_common(ablate, c);
  std::string tim_model;
  ablate->add_option("--tim-model", tim_model, "checkpoint trained with mixing");

  auto* shots = app.add_subcommand("shots", "paired baseline vs adapted metric per shot count");
  add_common(shots, c);
  std::vector<int> shot_list{1, 5};
  shots->add_option("--shots", shot_list)->delimiter(',')->capture_default_str();

  auto* semi = app.add_subcommand("semi", "with and without an unlabeled pool over labeled/unlabeled splits");
  add_common(semi, c);
  double labeled_fraction = 0.4;
  std::size_t unlabeled = 50;
  int splits = 10;
  std::uint64_t split_seed = 0;
  semi->add_option("--labeled-fraction", labeled_fraction)->capture_default_str();
  semi->add_option("--unlabeled", unlabeled, "unlabeled points per episode")->capture_default_str();
  semi->add_option("--splits", splits)->capture_default_str();
  semi->add_option("--split-seed", split_seed)->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "train an embedding model; --out is the checkpoint");
  add_common(train_cmd, c);
  std::string kind = "linear", metric_mode = "euclidean", loss_csv;
  int hidden = 32, out_dim = 0, episodes = 1000, warmup = 5000, mixes = 2, halving = 10000, eval_every = 100;
  double lr = 0.01;
  train_cmd->add_option("--kind", kind)->check(CLI::IsMember({"linear", "mlp1"}))->capture_default_str();
  train_cmd->add_option("--hidden", hidden)->capture_default_str();
  train_cmd->add_option("--out-dim", out_dim, "0 = input dimension")->capture_default_str();
  train_cmd->add_option("--episodes", episodes)->capture_default_str();
  train_cmd->add_option("--lr", lr)->capture_default_str();
  train_cmd->add_option("--lr-halving-every", halving)->capture_default_str();
  train_cmd->add_option("--eval-every", eval_every)->capture_default_str();
  train_cmd->add_option("--tim-warmup", warmup)->capture_default_str();
  train_cmd->add_option("--tim-mixes", mixes)->capture_default_str();
  train_cmd->add_option("--metric", metric_mode)->check(CLI::IsMember({"euclidean", "eam"}))->capture_default_str();
  train_cmd->add_option("--loss-csv", loss_csv, "loss trace as CSV");

  auto* oracle = app.add_subcommand("oracle-check", "closed form against the iterative solver");
  add_common(oracle, c);
  int dim = 8, instances = 50, steps = 20000;
  double step_size = 0.5;
  oracle->add_option("--dim", dim)->capture_default_str();
  oracle->add_option("--instances", instances)->capture_default_str();
  oracle->add_option("--steps", steps)->capture_default_str();
  oracle->add_option("--step-size", step_size)->capture_default_str();

  auto* sparsity = app.add_subcommand("sparsity", "gap between diagonal and off-diagonal metric entries");
  add_common(sparsity, c);
  int n_episodes = 100;
  std::string dump;
  sparsity->add_option("--episodes", n_episodes)->capture_default_str();
  sparsity->add_option("--dump", dump, "write the first episode's metric as a matrix block");

  auto* synth = app.add_subcommand("synth", "write a synthetic benchmark to an embedding file");
  add_common(synth, c);
  SynthConfig sc = SynthConfig::an16();
  double signal_std = 1.0, nuisance_std = 3.0;
  synth->add_option("--classes", sc.n_classes)->capture_default_str();
  synth->add_option("--dim", sc.dim)->capture_default_str();
  synth->add_option("--per-class", sc.per_class)->capture_default_str();
  synth->add_option("--class-sep", sc.class_sep)->capture_default_str();
  synth->add_option("--nuisance-dims", sc.nuisance_dims)->capture_default_str();
  synth->add_option("--signal-std", signal_std)->capture_default_str();
  synth->add_option("--nuisance-std", nuisance_std)->capture_default_str();
  synth->add_option("--synth-seed", sc.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (eval->parsed()) {
      const Dataset data = load(c);
      const EvalOptions o = eval_options(c);
      const TrialReport r = run_trials(data, o, {c.tim, c.eam, c.bisim});
      emit(c, format_report(r));
      maybe_csv(c, {r});
    } else if (ablate->parsed()) {
      const Dataset data = load(c);
      std::optional<EmbeddingModel> tm;
      if (!tim_model.empty()) tm = load_model(tim_model);
      const auto rows = run_ablation_suite(data, eval_options(c), tm);
      emit(c, join_reports(rows));
      maybe_csv(c, rows);
    } else if (shots->parsed()) {
      const Dataset data = load(c);
      const auto res = run_shot_sweep(data, eval_options(c), shot_list);
      std::vector<TrialReport> all;
      std::ostringstream os;
      os.precision(10);
      for (const auto& r : res) {
        os << format_report(r.baseline) << '\n' << format_report(r.team) << "k_shot=" << r.k_shot
           << "\ndelta=" << r.delta << "\n\n";
        all.push_back(r.baseline);
        all.push_back(r.team);
      }
      emit(c, os.str());
      maybe_csv(c, all);
    } else if (semi->parsed()) {
      const Dataset data = load(c);
      const SemiReport r = run_semi(data, eval_options(c), {labeled_fraction, split_seed}, unlabeled, splits);
      emit(c, format_report(r.semi) + "\n" + format_report(r.labeled_only) + "semi_wins=" +
                  std::to_string(r.semi_wins) + "\n");
      std::vector<TrialReport> all = r.semi_per_split;
      all.insert(all.end(), r.labeled_per_split.begin(), r.labeled_per_split.end());
      maybe_csv(c, all);
    } else if (train_cmd->parsed()) {
      if (c.out.empty()) throw Error(ErrorKind::parameter, "train needs --out for the checkpoint");
      const Dataset data = load(c);
      const MetricHyperParams hp = hyper(c);
      TrainConfig cfg;
      cfg.learning_rate = lr;
      cfg.episodes = episodes;
      cfg.lr_halving_every = halving;
      cfg.eval_every = eval_every;
      cfg.seed = c.seed;
      cfg.episode = {c.n_way, c.k_shot, c.n_query, c.seed};
      cfg.metric_mode = metric_mode == "eam" ? MetricMode::eam : MetricMode::euclidean;
      if (c.tim) {
        TimConfig t;
        t.warmup_episodes = warmup;
        t.mixes_per_instance = mixes;
        cfg.tim = t;
      }
      const int d = static_cast<int>(data.dim());
      Rng rng(derive_seed(c.seed, 0x1417ull));
      const auto k = parse_model_kind(kind);
      const EmbeddingModel init = c.model.empty()
                                      ? EmbeddingModel::random(k, d, k == ModelKind::mlp1 ? hidden : 0,
                                                               out_dim > 0 ? out_dim : d, rng)
                                      : load_model(c.model);
      const TrainResult r = train(init, data, cfg, hp);
      save_model(r.model, c.out);
      std::printf("episodes=%d\ninitial_loss=%.10g\nfinal_loss=%.10g\ncheckpoint=%s\n", episodes,
                  r.loss_trace.front(), r.loss_trace.back(), c.out.c_str());
      if (!loss_csv.empty()) {
        std::ofstream f(loss_csv);
        if (!f) throw Error(ErrorKind::io, "cannot write " + loss_csv);
        f << "checkpoint,loss\n";
        for (std::size_t i = 0; i < r.loss_trace.size(); ++i) f << i << ',' << r.loss_trace[i] << '\n';
      }
    } else if (oracle->parsed()) {
      MetricHyperParams hp = hyper(c);
      hp.alpha = 0.0;
      const auto rows = run_oracle_check(dim, instances, c.seed, hp, steps, step_size);
      std::ostringstream os;
      os.precision(6);
      os << "instance,frobenius_gap,objective_gap,gradient_norm,converged,repaired\n";
      bool ok = true;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << i << ',' << r.frobenius_gap << ',' << r.objective_gap << ',' << r.closed_form_gradient_norm << ','
           << r.oracle_converged << ',' << r.repaired << '\n';
        ok = ok && r.frobenius_gap < 1e-3 && r.objective_gap < 1e-6;
      }
      emit(c, os.str());
      std::fprintf(stderr, "oracle-check %s\n", ok ? "agree" : "DISAGREE");
      if (!ok) return 3;
    } else if (sparsity->parsed()) {
      const Dataset data = load(c);
      const EvalOptions o = eval_options(c);
      const auto reports = sparsity_over_episodes(data, o, n_episodes);
      std::ostringstream os;
      os.precision(8);
      os << "episode,diag_mean,offdiag_mean,gap_ratio\n";
      std::vector<double> ratios;
      for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        os << i << ',' << r.diag_mean << ',' << r.offdiag_mean << ',';
        if (r.gap_ratio) {
          os << *r.gap_ratio;
          ratios.push_back(*r.gap_ratio);
        } else {
          os << "undefined";
        }
        os << '\n';
      }
      emit(c, os.str());
      if (!ratios.empty()) std::fputs(median_line(ratios, "median_gap_ratio").c_str(), stderr);
      if (!dump.empty()) {
        Episode ep = trial_episode(data, o, 0);
        if (o.model) ep = embed_episode(*o.model, ep);
        save_matrix_block(adapt_metric(ep, o.bank, o.hp).metric.matrix(), dump);
      }
    } else if (synth->parsed()) {
      if (c.out.empty()) throw Error(ErrorKind::parameter, "synth needs --out");
      sc.noise_aniso.assign(static_cast<std::size_t>(std::max(0, sc.dim - sc.nuisance_dims)), signal_std);
      sc.noise_aniso.insert(sc.noise_aniso.end(), static_cast<std::size_t>(std::max(0, sc.nuisance_dims)),
                            nuisance_std);
      const Dataset data = generate(sc);
      save_embeddings(data, c.out, file_format(c, c.out));
      std::printf("rows=%zu\ndim=%zu\nout=%s\n", data.size(), data.dim(), c.out.c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
