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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sirank/errors.hpp"
#include "sirank/numerics.hpp"
#include "sirank/rng.hpp"

namespace sirank {

// Listwise losses over one query's scores and relevance labels. Both are
// invariant under a constant shift of all scores in the list, which combined
// with the scorer's per-query constant-shift property keeps training and
// evaluation unaffected by test-time feature scaling.

/// Scores and relevance grades for the items of one query.
struct LabeledList {
  Vec scores;
  Vec labels;  // y >= 0

  void validate() const {
    if (scores.empty() || scores.size() != labels.size()) {
      throw DimensionMismatch("labeled list: scores and labels must be non-empty and equal length");
    }
    for (double y : labels) {
      if (!(y >= 0.0)) {
        throw DataError("labeled list: labels must be >= 0");
      }
    }
  }
};

struct LossResult {
  double loss = 0.0;
  Vec grad;  // d(loss)/d(score) per item
};

/// ListNet with the top-one target distribution: cross-entropy between the
/// label-derived distribution p = y / sum(y) and q = softmax(scores).
/// For binary labels p is uniform over the relevant items.
/// grad = q - p. Requires at least one positive label.
inline LossResult listnet_loss(const LabeledList& l) {
  l.validate();
  const double label_sum = compensated_sum(l.labels);
  if (!(label_sum > 0.0)) {
    throw AllZeroLabels("listnet_loss: all labels are zero");
  }
  const std::size_t n = l.scores.size();
  const double lse = logsumexp(l.scores);
  const Vec q = softmax(l.scores);

  LossResult out;
  out.grad.resize(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = l.labels[i] / label_sum;
    // -p * log q = -p * (s - lse); never forms log(0)
    loss += p * (lse - l.scores[i]);
    out.grad[i] = q[i] - p;
  }
  out.loss = loss;
  return out;
}

namespace detail {

/// Items ordered by label descending; ties broken by a deterministic
/// shuffle drawn from tie_seed, so the tie order can be redrawn per epoch.
inline std::vector<std::size_t> label_descending_order(const Vec& labels,
                                                       std::uint64_t tie_seed) {
  std::vector<std::size_t> idx = iota_indices(labels.size());
  std::mt19937_64 rng(tie_seed);
  fisher_yates_shuffle(idx, rng);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return labels[a] > labels[b];
  });
  return idx;
}

}  // namespace detail

/// ListMLE: negative Plackett-Luce log-likelihood of the label-ideal
/// ordering,
///   loss = -sum_r [ s_sigma(r) - logsumexp(s_sigma(r), ..., s_sigma(D)) ].
/// Suffix logsumexps use max subtraction; the gradient is computed suffix by
/// suffix (O(D^2)) so it stays stable for scores of any magnitude.
inline LossResult listmle_loss(const LabeledList& l, std::uint64_t tie_seed) {
  l.validate();
  const std::size_t n = l.scores.size();
  const std::vector<std::size_t> order = detail::label_descending_order(l.labels, tie_seed);

  Vec sorted(n);
  for (std::size_t r = 0; r < n; ++r) sorted[r] = l.scores[order[r]];

  LossResult out;
  out.grad.assign(n, 0.0);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::span<const double> suffix(sorted.data() + r, n - r);
    const double lse = logsumexp(suffix);
    loss += lse - sorted[r];
    for (std::size_t m = r; m < n; ++m) {
      out.grad[order[m]] += std::exp(sorted[m] - lse);
    }
    out.grad[order[r]] -= 1.0;
  }
  out.loss = loss;
  ensure_finite(out.grad, "listmle gradient");
  return out;
}

}  // namespace sirank
