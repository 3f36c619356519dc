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

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sirank/errors.hpp"
#include "sirank/features.hpp"
#include "sirank/numerics.hpp"

namespace sirank {

// Scale-invariant scoring network.
//
// An item's score is the sum of two paths:
//
//   deep path   - feed-forward ReLU network over standardized query and
//                 stable item features;
//   wide path   - <w, compress_query(xq) (x) log(xs)>, a linear form over the
//                 Kronecker product of the compressed query features and the
//                 log of the scale-sensitive item features.
//
// Multiplying the scale-sensitive columns of every item in a query by any
// c > 0 adds the same constant <w, compress_query(xq) (x) log(c)*1> to every
// score in that query, so pairwise score differences, and therefore the
// ranking, never change. The deep baseline variant routes all columns
// through the deep path instead (no wide path) and enjoys no such guarantee;
// it exists as the comparator.

/// Items whose declared query columns differ by more than this are rejected.
inline constexpr double kQueryFeatureTolerance = 1e-9;

enum class ScorerVariant {
  scale_invariant,  // deep(query+stable) + wide(query, scaled)
  deep_baseline,    // deep(all columns), no wide path
};

inline const char* to_string(ScorerVariant v) {
  return v == ScorerVariant::scale_invariant ? "sir" : "deep_baseline";
}

/// One affine layer, weight is out x in.
struct DenseLayer {
  Mat weight;
  Vec bias;
};

/// Hidden ReLU layers plus a final identity layer with a single output.
struct DeepPathParams {
  std::vector<DenseLayer> layers;
};

/// Query compression (affine + tanh, M -> L with L < M) and the wide
/// weights over the L*K2 Kronecker interaction.
struct WidePathParams {
  Mat proj_weight;  // L x M
  Vec proj_bias;    // L
  Vec w;            // L * K2

  std::size_t projection_dims() const { return proj_bias.size(); }
};

struct Scorer {
  ScorerVariant variant = ScorerVariant::scale_invariant;
  FeaturePartition partition;
  DeepPathParams deep;
  WidePathParams wide;  // empty for deep_baseline
  Standardizer deep_standardizer;  // over deep_input_columns(), in that order

  bool has_wide_path() const { return variant == ScorerVariant::scale_invariant; }

  /// Raw columns feeding the deep path, in gather order: query, stable,
  /// and (deep_baseline only) scaled. The standardizer statistics and the
  /// first deep layer use this order.
  std::vector<std::size_t> deep_input_columns() const {
    std::vector<std::size_t> cols = partition.query_idx;
    cols.insert(cols.end(), partition.stable_idx.begin(), partition.stable_idx.end());
    if (variant == ScorerVariant::deep_baseline) {
      cols.insert(cols.end(), partition.scaled_idx.begin(), partition.scaled_idx.end());
    }
    return cols;
  }

  std::size_t feature_count() const { return partition.feature_count(); }

  void validate() const {
    partition.validate(partition.feature_count());
    if (deep.layers.empty()) {
      throw ShapeMismatch("scorer: deep path needs at least the output layer");
    }
    std::size_t in = deep_input_columns().size();
    for (std::size_t l = 0; l < deep.layers.size(); ++l) {
      const DenseLayer& layer = deep.layers[l];
      if (layer.weight.cols != in || layer.weight.rows != layer.bias.size()) {
        throw ShapeMismatch("scorer: deep layer " + std::to_string(l) +
                            " dimensions do not chain");
      }
      in = layer.weight.rows;
    }
    if (in != 1) {
      throw ShapeMismatch("scorer: final deep layer must have one output");
    }
    deep_standardizer.validate();
    if (deep_standardizer.size() != deep_input_columns().size()) {
      throw ShapeMismatch("scorer: standardizer does not cover the deep inputs");
    }
    if (has_wide_path()) {
      const std::size_t m = partition.query_dims();
      const std::size_t k2 = partition.scaled_dims();
      const std::size_t l = wide.projection_dims();
      if (l < 1 || l >= m) {
        throw ShapeMismatch("scorer: wide projection must satisfy 1 <= L < M");
      }
      if (wide.proj_weight.rows != l || wide.proj_weight.cols != m) {
        throw ShapeMismatch("scorer: wide projection weight must be L x M");
      }
      if (wide.w.size() != l * k2) {
        throw ShapeMismatch("scorer: wide weight length must be L * K2");
      }
    }
  }
};

/// Gradients with respect to every scorer parameter; shapes mirror the
/// scorer's DeepPathParams and WidePathParams.
struct ScorerGradients {
  DeepPathParams deep;
  WidePathParams wide;
};

inline ScorerGradients zero_gradients(const Scorer& s) {
  ScorerGradients g;
  g.deep.layers.reserve(s.deep.layers.size());
  for (const DenseLayer& l : s.deep.layers) {
    g.deep.layers.push_back({Mat(l.weight.rows, l.weight.cols), Vec(l.bias.size(), 0.0)});
  }
  if (s.has_wide_path()) {
    g.wide.proj_weight = Mat(s.wide.proj_weight.rows, s.wide.proj_weight.cols);
    g.wide.proj_bias.assign(s.wide.proj_bias.size(), 0.0);
    g.wide.w.assign(s.wide.w.size(), 0.0);
  }
  return g;
}

// --- parameter block traversal -------------------------------------------
//
// Fixed flattening order: deep layers in sequence (weight row-major, then
// bias), then wide proj_weight, proj_bias, w. Adam state, serialization and
// the gradient audit all rely on this order.

template <typename Params, typename Fn>
void for_each_param_block(Params& p, Fn&& fn) {
  for (std::size_t l = 0; l < p.deep.layers.size(); ++l) {
    const std::string prefix = "deep.layer" + std::to_string(l);
    fn(prefix + ".weight", p.deep.layers[l].weight.data);
    fn(prefix + ".bias", p.deep.layers[l].bias);
  }
  if (!p.wide.proj_bias.empty() || !p.wide.w.empty()) {
    fn("wide.proj_weight", p.wide.proj_weight.data);
    fn("wide.proj_bias", p.wide.proj_bias);
    fn("wide.w", p.wide.w);
  }
}

template <typename Fn>
void for_each_param_block(const Scorer& s, Fn&& fn) {
  for (std::size_t l = 0; l < s.deep.layers.size(); ++l) {
    const std::string prefix = "deep.layer" + std::to_string(l);
    fn(prefix + ".weight", s.deep.layers[l].weight.data);
    fn(prefix + ".bias", s.deep.layers[l].bias);
  }
  if (s.has_wide_path()) {
    fn("wide.proj_weight", s.wide.proj_weight.data);
    fn("wide.proj_bias", s.wide.proj_bias);
    fn("wide.w", s.wide.w);
  }
}

template <typename Fn>
void for_each_param_block(Scorer& s, Fn&& fn) {
  for (std::size_t l = 0; l < s.deep.layers.size(); ++l) {
    const std::string prefix = "deep.layer" + std::to_string(l);
    fn(prefix + ".weight", s.deep.layers[l].weight.data);
    fn(prefix + ".bias", s.deep.layers[l].bias);
  }
  if (s.has_wide_path()) {
    fn("wide.proj_weight", s.wide.proj_weight.data);
    fn("wide.proj_bias", s.wide.proj_bias);
    fn("wide.w", s.wide.w);
  }
}

template <typename Params>
std::size_t parameter_count(const Params& p) {
  std::size_t n = 0;
  for_each_param_block(p, [&](const std::string&, const Vec& v) { n += v.size(); });
  return n;
}

template <typename Params>
Vec flatten_parameters(const Params& p) {
  Vec flat;
  flat.reserve(parameter_count(p));
  for_each_param_block(p, [&](const std::string&, const Vec& v) {
    flat.insert(flat.end(), v.begin(), v.end());
  });
  return flat;
}

template <typename Params>
void unflatten_parameters(Params& p, const Vec& flat) {
  std::size_t off = 0;
  for_each_param_block(p, [&](const std::string&, Vec& v) {
    if (off + v.size() > flat.size()) {
      throw ShapeMismatch("unflatten_parameters: flat vector too short");
    }
    std::copy(flat.begin() + off, flat.begin() + off + v.size(), v.begin());
    off += v.size();
  });
  if (off != flat.size()) {
    throw ShapeMismatch("unflatten_parameters: flat vector too long");
  }
}

// --- forward pass ----------------------------------------------------------

/// f_s: compress the query features, tanh(proj_weight * xq + proj_bias).
inline Vec compress_query(const Scorer& s, const Vec& query_feats) {
  if (query_feats.size() != s.partition.query_dims()) {
    throw DimensionMismatch("compress_query: expected " +
                            std::to_string(s.partition.query_dims()) +
                            " query features, got " +
                            std::to_string(query_feats.size()));
  }
  Vec t = matvec(s.wide.proj_weight, query_feats);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = std::tanh(t[i] + s.wide.proj_bias[i]);
  }
  return t;
}

/// f_w: <w, f_s(xq) (x) log(xs)>. Zero whenever xs is all ones, exactly.
inline double wide_score(const Scorer& s, const Vec& query_feats, const Vec& scaled_feats) {
  if (scaled_feats.size() != s.partition.scaled_dims()) {
    throw DimensionMismatch("wide_score: expected " +
                            std::to_string(s.partition.scaled_dims()) +
                            " scaled features, got " +
                            std::to_string(scaled_feats.size()));
  }
  return dot(s.wide.w, kron(compress_query(s, query_feats), log_elementwise(scaled_feats)));
}

namespace detail {

/// Activations kept from a deep forward pass for backprop.
/// act[0] is the standardized input, act[l+1] the output of layer l.
struct DeepTrace {
  std::vector<Vec> act;
  std::vector<Vec> pre;  // pre-activation of each layer
};

/// MLP over already-gathered raw deep inputs. ReLU on hidden layers,
/// identity output.
inline double deep_forward(const Scorer& s, Vec deep_inputs, DeepTrace* trace) {
  s.deep_standardizer.apply_inplace(deep_inputs);
  if (trace) {
    trace->act.clear();
    trace->pre.clear();
    trace->act.push_back(deep_inputs);
  }
  Vec a = std::move(deep_inputs);
  for (std::size_t l = 0; l < s.deep.layers.size(); ++l) {
    const DenseLayer& layer = s.deep.layers[l];
    Vec z = matvec(layer.weight, a);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.bias[i];
    if (trace) trace->pre.push_back(z);
    const bool hidden = l + 1 < s.deep.layers.size();
    if (hidden) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    if (trace) trace->act.push_back(z);
    a = std::move(z);
  }
  return a[0];
}

inline void check_query_consistency(const std::vector<Vec>& items,
                                    const std::vector<std::size_t>& query_idx) {
  for (std::size_t i = 1; i < items.size(); ++i) {
    for (std::size_t c : query_idx) {
      if (std::abs(items[i][c] - items[0][c]) > kQueryFeatureTolerance) {
        throw InconsistentQueryFeatures(
            "query column " + std::to_string(c) + " differs across items (" +
            std::to_string(items[0][c]) + " vs " + std::to_string(items[i][c]) + ")");
      }
    }
  }
}

}  // namespace detail

/// f_d: deep-path score over (query, stable) features. The standardizer is
/// applied to the concatenated inputs before the first layer.
inline double deep_score(const Scorer& s, const Vec& query_feats, const Vec& stable_feats) {
  if (s.variant != ScorerVariant::scale_invariant) {
    throw ShapeMismatch("deep_score(query, stable) applies to the scale-invariant variant");
  }
  if (query_feats.size() != s.partition.query_dims() ||
      stable_feats.size() != s.partition.stable_dims()) {
    throw DimensionMismatch("deep_score: feature slice sizes do not match the partition");
  }
  Vec in = query_feats;
  in.insert(in.end(), stable_feats.begin(), stable_feats.end());
  return detail::deep_forward(s, std::move(in), nullptr);
}

/// f_n over one raw feature row: deep + wide per the partition's routing.
inline double score_item(const Scorer& s, const Vec& features) {
  if (features.size() != s.feature_count()) {
    throw DimensionMismatch("score_item: expected " +
                            std::to_string(s.feature_count()) +
                            " features, got " + std::to_string(features.size()));
  }
  double score = detail::deep_forward(s, gather(features, s.deep_input_columns()), nullptr);
  if (s.has_wide_path()) {
    score += wide_score(s, gather(features, s.partition.query_idx),
                        gather(features, s.partition.scaled_idx));
  }
  return score;
}

/// Scores for all items of one query, order-aligned with the input.
/// The declared query columns must agree across items within
/// kQueryFeatureTolerance.
inline Vec score_query(const Scorer& s, const std::vector<Vec>& items) {
  if (items.empty()) {
    throw DimensionMismatch("score_query: a query needs at least one item");
  }
  for (const Vec& it : items) {
    if (it.size() != s.feature_count()) {
      throw DimensionMismatch("score_query: item feature length mismatch");
    }
  }
  detail::check_query_consistency(items, s.partition.query_idx);
  Vec scores(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    scores[i] = score_item(s, items[i]);
  }
  ensure_finite(scores, "query scores");
  return scores;
}

/// Analytic gradients of sum_i upstream[i] * score(items[i]) with respect to
/// every parameter. upstream is d(loss)/d(score) per item. ReLU subgradient
/// at exactly 0 is taken as 0. The standardizer is fixed preprocessing and
/// receives no gradient.
inline ScorerGradients backward(const Scorer& s, const std::vector<Vec>& items,
                                const Vec& upstream) {
  if (upstream.size() != items.size()) {
    throw DimensionMismatch("backward: upstream length must match item count");
  }
  if (items.empty()) {
    throw DimensionMismatch("backward: a query needs at least one item");
  }
  detail::check_query_consistency(items, s.partition.query_idx);

  ScorerGradients g = zero_gradients(s);
  const std::vector<std::size_t> deep_cols = s.deep_input_columns();
  const std::size_t n_layers = s.deep.layers.size();

  detail::DeepTrace trace;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double up = upstream[i];
    detail::deep_forward(s, gather(items[i], deep_cols), &trace);

    // Deep path: standard backprop from the scalar output.
    Vec delta{up};
    for (std::size_t l = n_layers; l-- > 0;) {
      const DenseLayer& layer = s.deep.layers[l];
      DenseLayer& grad = g.deep.layers[l];
      const Vec& input_act = trace.act[l];
      for (std::size_t r = 0; r < layer.weight.rows; ++r) {
        const double d = delta[r];
        grad.bias[r] += d;
        double* grow = grad.weight.data.data() + r * layer.weight.cols;
        for (std::size_t c = 0; c < layer.weight.cols; ++c) {
          grow[c] += d * input_act[c];
        }
      }
      if (l == 0) break;
      Vec prev(layer.weight.cols, 0.0);
      for (std::size_t r = 0; r < layer.weight.rows; ++r) {
        const double d = delta[r];
        const double* row = layer.weight.data.data() + r * layer.weight.cols;
        for (std::size_t c = 0; c < layer.weight.cols; ++c) {
          prev[c] += d * row[c];
        }
      }
      // ReLU mask of the previous hidden layer; strict > keeps d/dz = 0 at z = 0.
      const Vec& pre = trace.pre[l - 1];
      for (std::size_t c = 0; c < prev.size(); ++c) {
        if (!(pre[c] > 0.0)) prev[c] = 0.0;
      }
      delta = std::move(prev);
    }

    if (!s.has_wide_path()) continue;

    // Wide path: f_w = <w, u (x) v> with u = tanh(P xq + pb), v = log(xs).
    const Vec xq = gather(items[i], s.partition.query_idx);
    const Vec v = log_elementwise(gather(items[i], s.partition.scaled_idx));
    const Vec u = compress_query(s, xq);
    const std::size_t l_dims = u.size();
    const std::size_t k2 = v.size();

    // d f_w / d w = u (x) v
    for (std::size_t a = 0; a < l_dims; ++a) {
      for (std::size_t b = 0; b < k2; ++b) {
        g.wide.w[a * k2 + b] += up * u[a] * v[b];
      }
    }
    // d f_w / d u_a = sum_b w[a*K2+b] * v[b]; chain through tanh.
    for (std::size_t a = 0; a < l_dims; ++a) {
      double gu = 0.0;
      for (std::size_t b = 0; b < k2; ++b) {
        gu += s.wide.w[a * k2 + b] * v[b];
      }
      const double gt = up * gu * (1.0 - u[a] * u[a]);
      g.wide.proj_bias[a] += gt;
      double* prow = g.wide.proj_weight.data.data() + a * g.wide.proj_weight.cols;
      for (std::size_t c = 0; c < xq.size(); ++c) {
        prow[c] += gt * xq[c];
      }
    }
  }
  return g;
}

}  // namespace sirank
