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
#include <cstddef>
#include <limits>
#include <vector>

#include "sirank/data.hpp"
#include "sirank/numerics.hpp"
#include "sirank/scorer.hpp"

namespace sirank {

/// Truncation depth meaning "no truncation".
inline constexpr std::size_t kFullDepth = std::numeric_limits<std::size_t>::max();

/// Item indices in descending score order. A bijection on {0..D-1};
/// equal scores keep ascending original-index order, so evaluation is
/// deterministic across runs and platforms.
struct RankPermutation {
  std::vector<std::size_t> order;

  std::size_t size() const { return order.size(); }
};

inline RankPermutation rank(const Vec& scores) {
  if (scores.empty()) {
    throw DimensionMismatch("rank: scores must be non-empty");
  }
  RankPermutation p{iota_indices(scores.size())};
  std::stable_sort(p.order.begin(), p.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return p;
}

namespace detail {

/// DCG@k with gain 2^y - 1 and discount log2(rank + 1).
inline double dcg_at(const Vec& labels, const std::vector<std::size_t>& order,
                     std::size_t k) {
  const std::size_t depth = std::min<std::size_t>(k, order.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    const double gain = std::exp2(labels[order[r]]) - 1.0;
    dcg += gain / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg;
}

}  // namespace detail

/// NDCG@k in [0, 1]. The ideal permutation sorts labels descending; queries
/// whose labels are all zero score 1 by convention.
inline double ndcg(const Vec& labels, const RankPermutation& perm, std::size_t k) {
  if (labels.size() != perm.size()) {
    throw DimensionMismatch("ndcg: labels and permutation sizes differ");
  }
  if (k == 0) {
    throw InvalidConfig("ndcg: depth k must be >= 1");
  }
  const RankPermutation ideal = rank(labels);
  const double idcg = detail::dcg_at(labels, ideal.order, k);
  if (idcg == 0.0) return 1.0;
  return detail::dcg_at(labels, perm.order, k) / idcg;
}

/// Unweighted mean of per-query NDCG@k under the scorer, compensated
/// summation so the result does not depend on accumulation noise.
/// All-zero-label queries count as 1 by default; pass
/// include_zero_label_queries = false to drop them from the mean instead.
inline double mean_ndcg(const Dataset& d, const Scorer& scorer, std::size_t k,
                        bool include_zero_label_queries = true) {
  if (d.queries.empty()) {
    throw EmptyDataset("mean_ndcg: empty dataset");
  }
  Vec per_query;
  per_query.reserve(d.queries.size());
  for (const Query& q : d.queries) {
    const Vec labels = q.labels();
    if (!include_zero_label_queries) {
      bool all_zero = true;
      for (double y : labels) all_zero = all_zero && y == 0.0;
      if (all_zero) continue;
    }
    const Vec scores = score_query(scorer, q.feature_rows());
    per_query.push_back(ndcg(labels, rank(scores), k));
  }
  if (per_query.empty()) {
    throw EmptyDataset("mean_ndcg: every query was all-zero-labeled and skipped");
  }
  return compensated_mean(per_query);
}

}  // namespace sirank
