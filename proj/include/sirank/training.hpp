/* Copyright 2026 The sirank Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sirank/data.hpp"
#include "sirank/losses.hpp"
#include "sirank/metrics.hpp"
#include "sirank/rng.hpp"
#include "sirank/scorer.hpp"

namespace sirank {

enum class LossKind { listnet, listmle };

inline const char* to_string(LossKind k) {
  return k == LossKind::listnet ? "listnet" : "listmle";
}

/// Initialization of the wide weights w: small uniform noise, or all ones so
/// the Kronecker interaction starts as a pass-through.
enum class WideInit { uniform, pass_through };

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates, sized on first use.
struct AdamState {
  Vec m;
  Vec v;
};

/// Textbook Adam with bias correction. t is the 1-based step count.
inline void adam_step(Vec& params, const Vec& grads, AdamState& state, std::size_t t,
                      const AdamConfig& cfg) {
  if (t < 1) {
    throw InvalidConfig("adam_step: t must be >= 1");
  }
  if (params.size() != grads.size()) {
    throw ShapeMismatch("adam_step: params and grads differ in length");
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeMismatch("adam_step: state does not match parameter count");
  }
  const double b1 = cfg.beta1;
  const double b2 = cfg.beta2;
  const double m_corr = 1.0 - std::pow(b1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double m_hat = state.m[i] / m_corr;
    const double v_hat = state.v[i] / v_corr;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

struct TrainConfig {
  LossKind loss = LossKind::listnet;
  std::size_t epochs = 50;
  AdamConfig adam;  // learning rate and moment decay
  std::size_t batch_queries = 32;
  std::uint64_t seed = 7;
  std::vector<std::size_t> hidden_sizes = {32, 32};
  std::size_t wide_projection = 2;  // L, must be < M for the SIR variant
  bool baseline_mode = false;       // all columns through the deep path, no wide path
  WideInit wide_init = WideInit::uniform;
  std::size_t ndcg_k = 10;
  bool skip_zero_label_queries = false;  // drop all-zero-label queries from NDCG means
  std::size_t early_stop_patience = 10;

  /// Optional progress hook (epoch, mean train loss, validation ndcg).
  std::function<void(std::size_t, double, double)> on_epoch;

  void validate(const FeaturePartition& partition) const {
    if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
    if (!(adam.learning_rate >= 0.0)) throw InvalidConfig("learning_rate must be >= 0");
    if (batch_queries < 1) throw InvalidConfig("batch_queries must be >= 1");
    if (early_stop_patience < 1) throw InvalidConfig("early_stop_patience must be >= 1");
    if (!baseline_mode) {
      if (wide_projection < 1 || wide_projection >= partition.query_dims()) {
        throw InvalidConfig("wide_projection must satisfy 1 <= L < M (M = " +
                            std::to_string(partition.query_dims()) + ")");
      }
    }
  }
};

/// Fresh scorer with seeded Glorot-uniform weights, zero biases, and an
/// identity standardizer (train() replaces it with train-split statistics).
/// Draw order is fixed: deep layers in sequence, then the wide projection,
/// then w.
inline Scorer init_scorer(const FeaturePartition& partition, const TrainConfig& cfg,
                          std::mt19937_64& rng) {
  partition.validate(partition.feature_count());
  Scorer s;
  s.variant = cfg.baseline_mode ? ScorerVariant::deep_baseline
                                : ScorerVariant::scale_invariant;
  s.partition = partition;

  auto glorot = [&rng](Mat& m) {
    const double r = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
    std::uniform_real_distribution<double> u(-r, r);
    for (double& v : m.data) v = u(rng);
  };

  std::size_t in = s.deep_input_columns().size();
  for (std::size_t h : cfg.hidden_sizes) {
    DenseLayer l{Mat(h, in), Vec(h, 0.0)};
    glorot(l.weight);
    s.deep.layers.push_back(std::move(l));
    in = h;
  }
  DenseLayer out{Mat(1, in), Vec(1, 0.0)};
  glorot(out.weight);
  s.deep.layers.push_back(std::move(out));

  if (s.has_wide_path()) {
    const std::size_t m = partition.query_dims();
    const std::size_t k2 = partition.scaled_dims();
    s.wide.proj_weight = Mat(cfg.wide_projection, m);
    glorot(s.wide.proj_weight);
    s.wide.proj_bias.assign(cfg.wide_projection, 0.0);
    if (cfg.wide_init == WideInit::pass_through) {
      s.wide.w.assign(cfg.wide_projection * k2, 1.0);
    } else {
      std::uniform_real_distribution<double> u(-0.1, 0.1);
      s.wide.w.resize(cfg.wide_projection * k2);
      for (double& v : s.wide.w) v = u(rng);
    }
  }
  s.deep_standardizer = Standardizer::identity(s.deep_input_columns().size());
  s.validate();
  return s;
}

struct TrainReport {
  std::vector<double> train_loss;  // per epoch actually run
  std::vector<double> valid_ndcg;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based epoch of the retained model
  double best_valid_ndcg = 0.0;
  Scorer model;  // parameters from the best epoch
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline LossResult query_loss(LossKind kind, const Vec& scores, const Vec& labels,
                             std::uint64_t tie_seed) {
  LabeledList list{scores, labels};
  return kind == LossKind::listnet ? listnet_loss(list)
                                   : listmle_loss(list, tie_seed);
}

}  // namespace detail

/// Seeded end-to-end training: Adam over mean per-query gradients, one
/// optimizer step per batch of queries, per-epoch validation NDCG, early
/// stopping, best-validation model retained. Single-threaded and
/// deterministic given the config and seed.
inline TrainReport train(const Dataset& train_data, const Dataset& valid_data,
                         const TrainConfig& cfg) {
  train_data.validate();
  valid_data.validate();
  if (train_data.feature_count != valid_data.feature_count ||
      !(train_data.partition == valid_data.partition)) {
    throw PartitionMismatch("train/valid datasets disagree on features or partition");
  }
  cfg.validate(train_data.partition);

  const auto t_start = std::chrono::steady_clock::now();

  std::mt19937_64 rng(cfg.seed);
  Scorer scorer = init_scorer(train_data.partition, cfg, rng);
  scorer.deep_standardizer = fit_standardizer(train_data, scorer.deep_input_columns());

  Vec params = flatten_parameters(scorer);
  AdamState adam_state;
  std::size_t adam_t = 0;

  TrainReport report;
  report.seed = cfg.seed;
  report.model = scorer;
  report.best_valid_ndcg = -1.0;

  const std::size_t n_queries = train_data.query_count();
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = iota_indices(n_queries);
    fisher_yates_shuffle(order, rng);

    Vec epoch_losses(n_queries, 0.0);
    Vec batch_grad(params.size());
    for (std::size_t start = 0; start < n_queries; start += cfg.batch_queries) {
      const std::size_t stop = std::min(n_queries, start + cfg.batch_queries);
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);

      for (std::size_t b = start; b < stop; ++b) {
        const Query& q = train_data.queries[order[b]];
        const std::vector<Vec> rows = q.feature_rows();
        const Vec scores = score_query(scorer, rows);
        const std::uint64_t tie_seed = mix_seed(cfg.seed, epoch, order[b]);
        const LossResult lr = detail::query_loss(cfg.loss, scores, q.labels(), tie_seed);
        if (!std::isfinite(lr.loss)) {
          throw NonFiniteLoss("non-finite " + std::string(to_string(cfg.loss)) +
                              " loss at epoch " + std::to_string(epoch) +
                              ", query " + q.qid);
        }
        epoch_losses[order[b]] = lr.loss;
        const ScorerGradients g = backward(scorer, rows, lr.grad);
        const Vec flat_g = flatten_parameters(g);
        for (std::size_t i = 0; i < batch_grad.size(); ++i) batch_grad[i] += flat_g[i];
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (double& g : batch_grad) g *= inv;

      ++adam_t;
      adam_step(params, batch_grad, adam_state, adam_t, cfg.adam);
      ensure_finite(params, "parameters after adam step");
      unflatten_parameters(scorer, params);
    }

    const double mean_loss = compensated_mean(epoch_losses);
    const double vndcg =
        mean_ndcg(valid_data, scorer, cfg.ndcg_k, !cfg.skip_zero_label_queries);
    report.train_loss.push_back(mean_loss);
    report.valid_ndcg.push_back(vndcg);
    report.epochs_run = epoch;
    if (cfg.on_epoch) cfg.on_epoch(epoch, mean_loss, vndcg);

    if (vndcg > report.best_valid_ndcg) {
      report.best_valid_ndcg = vndcg;
      report.best_epoch = epoch;
      report.model = scorer;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.early_stop_patience) break;
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

// --- gradient audit ---------------------------------------------------------

struct GradAuditBlock {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool pass = true;
};

struct GradAuditReport {
  std::vector<GradAuditBlock> blocks;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = true;

  std::vector<std::string> failed_blocks() const {
    std::vector<std::string> out;
    for (const GradAuditBlock& b : blocks) {
      if (!b.pass) out.push_back(b.name);
    }
    return out;
  }
};

struct GradAuditOptions {
  double h = 1e-5;
  double tolerance = 1e-5;
  /// Test hook: multiply the analytic wide-w gradient block by 2 so the
  /// audit must flag exactly that block.
  bool corrupt_wide_w = false;
};

/// Compares analytic gradients of the mean per-query loss against central
/// finite differences, parameter by parameter. Relative error uses a unit
/// floor: |a - n| / max(1, |a|, |n|).
inline GradAuditReport grad_audit(const Scorer& model, LossKind loss,
                                  const Dataset& sample, const GradAuditOptions& opt) {
  sample.validate();
  if (!(opt.h >= 1e-7 && opt.h <= 1e-3)) {
    throw InvalidConfig("grad_audit: h must lie in [1e-7, 1e-3]");
  }
  Scorer scorer = model;  // local copy; parameters are nudged in place
  const double inv_n = 1.0 / static_cast<double>(sample.query_count());

  auto total_loss = [&]() {
    double acc = 0.0;
    for (std::size_t qi = 0; qi < sample.queries.size(); ++qi) {
      const Query& q = sample.queries[qi];
      acc += detail::query_loss(loss, score_query(scorer, q.feature_rows()), q.labels(),
                                mix_seed(0, qi))
                 .loss;
    }
    return acc * inv_n;
  };

  // Analytic gradient of the same mean loss.
  Vec analytic_flat(parameter_count(scorer), 0.0);
  for (std::size_t qi = 0; qi < sample.queries.size(); ++qi) {
    const Query& q = sample.queries[qi];
    const std::vector<Vec> rows = q.feature_rows();
    const LossResult lr =
        detail::query_loss(loss, score_query(scorer, rows), q.labels(), mix_seed(0, qi));
    const Vec g = flatten_parameters(backward(scorer, rows, lr.grad));
    for (std::size_t i = 0; i < analytic_flat.size(); ++i) {
      analytic_flat[i] += g[i] * inv_n;
    }
  }

  // Block layout for reporting.
  struct BlockSpan {
    std::string name;
    std::size_t begin, end;
  };
  std::vector<BlockSpan> spans;
  {
    std::size_t off = 0;
    for_each_param_block(static_cast<const Scorer&>(scorer),
                         [&](const std::string& name, const Vec& v) {
                           spans.push_back({name, off, off + v.size()});
                           off += v.size();
                         });
  }
  if (opt.corrupt_wide_w) {
    for (const BlockSpan& b : spans) {
      if (b.name == "wide.w") {
        for (std::size_t i = b.begin; i < b.end; ++i) analytic_flat[i] *= 2.0;
      }
    }
  }

  Vec params = flatten_parameters(scorer);
  GradAuditReport report;
  report.tolerance = opt.tolerance;
  for (const BlockSpan& b : spans) {
    GradAuditBlock out{b.name, 0.0, b.begin, true};
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const double saved = params[i];
      params[i] = saved + opt.h;
      unflatten_parameters(scorer, params);
      const double up = total_loss();
      params[i] = saved - opt.h;
      unflatten_parameters(scorer, params);
      const double down = total_loss();
      params[i] = saved;
      unflatten_parameters(scorer, params);

      const double numeric = (up - down) / (2.0 * opt.h);
      const double a = analytic_flat[i];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_index = i - b.begin;
      }
    }
    out.pass = out.max_rel_error <= opt.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, out.max_rel_error);
    report.blocks.push_back(std::move(out));
  }
  report.pass = report.max_rel_error <= opt.tolerance;
  return report;
}

}  // namespace sirank
