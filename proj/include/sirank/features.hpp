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

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "sirank/errors.hpp"
#include "sirank/numerics.hpp"

namespace sirank {

/// Declared split of the raw feature columns into query-level columns,
/// stable item columns, and scale-sensitive item columns. Which columns are
/// scale-sensitive is user-declared configuration; the model does not try to
/// detect scaling issues on its own.
struct FeaturePartition {
  std::vector<std::size_t> query_idx;   // M columns, shared across a query's items
  std::vector<std::size_t> stable_idx;  // K1 columns, consistent scale
  std::vector<std::size_t> scaled_idx;  // K2 columns, scale may drift; must stay > 0

  std::size_t query_dims() const { return query_idx.size(); }
  std::size_t stable_dims() const { return stable_idx.size(); }
  std::size_t scaled_dims() const { return scaled_idx.size(); }
  std::size_t feature_count() const {
    return query_idx.size() + stable_idx.size() + scaled_idx.size();
  }

  /// Columns [0, m) query, [m, m+k1) stable, [m+k1, m+k1+k2) scaled.
  static FeaturePartition contiguous(std::size_t m, std::size_t k1, std::size_t k2) {
    FeaturePartition p;
    for (std::size_t c = 0; c < m; ++c) p.query_idx.push_back(c);
    for (std::size_t c = 0; c < k1; ++c) p.stable_idx.push_back(m + c);
    for (std::size_t c = 0; c < k2; ++c) p.scaled_idx.push_back(m + k1 + c);
    return p;
  }

  /// The three sets must be pairwise disjoint and cover exactly
  /// [0, total_columns); M >= 1 and K2 >= 1.
  void validate(std::size_t total_columns) const {
    if (query_idx.empty()) {
      throw InvalidConfig("partition: at least one query column is required");
    }
    if (scaled_idx.empty()) {
      throw InvalidConfig("partition: at least one scale-sensitive column is required");
    }
    std::set<std::size_t> seen;
    auto add_all = [&](const std::vector<std::size_t>& v, const char* name) {
      for (std::size_t c : v) {
        if (c >= total_columns) {
          throw InvalidConfig("partition: " + std::string(name) + " column " +
                              std::to_string(c) + " out of range for " +
                              std::to_string(total_columns) + " features");
        }
        if (!seen.insert(c).second) {
          throw InvalidConfig("partition: column " + std::to_string(c) +
                              " appears in more than one set");
        }
      }
    };
    add_all(query_idx, "query");
    add_all(stable_idx, "stable");
    add_all(scaled_idx, "scaled");
    if (seen.size() != total_columns) {
      throw InvalidConfig("partition: covers " + std::to_string(seen.size()) +
                          " of " + std::to_string(total_columns) + " columns");
    }
  }

  bool operator==(const FeaturePartition&) const = default;
};

/// Per-column (mean, stddev) statistics, fit on the train split only and
/// applied to deep-path inputs. Columns with stddev below 1e-12 are clamped
/// to stddev 1 so constant columns standardize to zero.
struct Standardizer {
  Vec mean;
  Vec stddev;

  std::size_t size() const { return mean.size(); }

  static Standardizer identity(std::size_t n) {
    Standardizer s;
    s.mean.assign(n, 0.0);
    s.stddev.assign(n, 1.0);
    return s;
  }

  void validate() const {
    if (mean.size() != stddev.size()) {
      throw ShapeMismatch("standardizer: mean/stddev lengths differ");
    }
    for (double sd : stddev) {
      if (!(sd > 0.0)) {
        throw InvalidConfig("standardizer: stddev entries must be > 0");
      }
    }
  }

  void apply_inplace(Vec& x) const {
    if (x.size() != mean.size()) {
      throw DimensionMismatch("standardizer: expected " +
                              std::to_string(mean.size()) + " values, got " +
                              std::to_string(x.size()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = (x[i] - mean[i]) / stddev[i];
    }
  }

  Vec apply(Vec x) const {
    apply_inplace(x);
    return x;
  }

  bool operator==(const Standardizer&) const = default;
};

}  // namespace sirank
