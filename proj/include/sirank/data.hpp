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

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sirank/errors.hpp"
#include "sirank/features.hpp"
#include "sirank/numerics.hpp"
#include "sirank/rng.hpp"

namespace sirank {

struct Item {
  Vec features;  // raw column order, length J
  double label = 0.0;
};

struct Query {
  std::string qid;
  std::vector<Item> items;

  Vec labels() const {
    Vec out(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) out[i] = items[i].label;
    return out;
  }

  std::vector<Vec> feature_rows() const {
    std::vector<Vec> rows;
    rows.reserve(items.size());
    for (const Item& it : items) rows.push_back(it.features);
    return rows;
  }
};

struct Dataset {
  std::vector<Query> queries;
  std::size_t feature_count = 0;
  FeaturePartition partition;

  std::size_t query_count() const { return queries.size(); }

  void validate() const {
    if (queries.empty()) {
      throw EmptyDataset("dataset has no queries");
    }
    partition.validate(feature_count);
    for (const Query& q : queries) {
      if (q.items.empty()) {
        throw EmptyDataset("query " + q.qid + " has no items");
      }
      for (const Item& it : q.items) {
        if (it.features.size() != feature_count) {
          throw DimensionMismatch("query " + q.qid + ": item feature length " +
                                  std::to_string(it.features.size()) +
                                  " != " + std::to_string(feature_count));
        }
        if (!(it.label >= 0.0)) {
          throw DataError("query " + q.qid + ": labels must be >= 0");
        }
        if (!all_finite(it.features)) {
          throw DataError("query " + q.qid + ": non-finite feature");
        }
      }
    }
  }
};

/// Test-time scale drift: multiply the given columns by their factors.
struct PerturbationEntry {
  std::size_t column = 0;
  double factor = 1.0;
};

struct PerturbationSpec {
  std::vector<PerturbationEntry> entries;

  bool empty() const { return entries.empty(); }

  void validate(const FeaturePartition& partition) const {
    for (const PerturbationEntry& e : entries) {
      if (!(e.factor > 0.0)) {
        throw InvalidConfig("perturbation factor for column " +
                            std::to_string(e.column) + " must be > 0");
      }
      bool in_scaled = false;
      for (std::size_t c : partition.scaled_idx) in_scaled |= (c == e.column);
      if (!in_scaled) {
        throw InvalidConfig("perturbation column " + std::to_string(e.column) +
                            " is not a declared scale-sensitive column");
      }
    }
  }
};

namespace detail {

inline double parse_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(where + ": cannot parse number from '" + std::string(tok) + "'");
  }
  return v;
}

/// Groups items by qid in first-appearance order while streaming.
class QueryGrouper {
 public:
  void add(const std::string& qid, Item item) {
    auto [it, inserted] = index_.try_emplace(qid, queries_.size());
    if (inserted) {
      queries_.push_back(Query{qid, {}});
    }
    queries_[it->second].items.push_back(std::move(item));
  }

  std::vector<Query> take() { return std::move(queries_); }
  bool empty() const { return queries_.empty(); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Query> queries_;
};

}  // namespace detail

/// Reads a LETOR/SVMLight-style ranking file: lines of
///   <label> qid:<id> <fid>:<value> ...  [# comment]
/// Feature ids are 1-based; ids absent from a line default to 0. The total
/// feature count is the maximum feature id seen anywhere in the file.
inline Dataset load_letor(const std::string& path, const FeaturePartition& partition) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open dataset file: " + path);
  }
  detail::QueryGrouper grouper;
  std::size_t max_fid = 0;
  std::string line;
  std::size_t line_no = 0;
  // (qid, sparse features, label) per line; densified once max_fid is known
  struct Row {
    std::string qid;
    double label;
    std::vector<std::pair<std::size_t, double>> feats;
  };
  std::vector<Row> rows;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    std::string_view sv(line);
    if (const auto hash = sv.find('#'); hash != std::string_view::npos) {
      sv = sv.substr(0, hash);
    }
    // tokenize on whitespace
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < sv.size()) {
      while (i < sv.size() && std::isspace(static_cast<unsigned char>(sv[i]))) ++i;
      std::size_t j = i;
      while (j < sv.size() && !std::isspace(static_cast<unsigned char>(sv[j]))) ++j;
      if (j > i) toks.push_back(sv.substr(i, j - i));
      i = j;
    }
    if (toks.empty()) continue;  // blank or comment-only line
    if (toks.size() < 2) {
      throw ParseError(where + ": expected '<label> qid:<id> ...'");
    }
    Row row;
    row.label = detail::parse_double(toks[0], where + " label");
    if (toks[1].substr(0, 4) != "qid:" || toks[1].size() == 4) {
      throw ParseError(where + ": second token must be qid:<id>, got '" +
                       std::string(toks[1]) + "'");
    }
    row.qid = std::string(toks[1].substr(4));
    for (std::size_t t = 2; t < toks.size(); ++t) {
      const auto colon = toks[t].find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(where + ": expected <fid>:<value>, got '" +
                         std::string(toks[t]) + "'");
      }
      std::size_t fid = 0;
      const auto fid_sv = toks[t].substr(0, colon);
      auto [p, ec] = std::from_chars(fid_sv.data(), fid_sv.data() + fid_sv.size(), fid);
      if (ec != std::errc{} || p != fid_sv.data() + fid_sv.size() || fid == 0) {
        throw ParseError(where + ": feature ids are positive integers, got '" +
                         std::string(fid_sv) + "'");
      }
      const double val = detail::parse_double(toks[t].substr(colon + 1),
                                              where + " feature " + std::to_string(fid));
      row.feats.emplace_back(fid - 1, val);
      max_fid = std::max(max_fid, fid);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw EmptyDataset("no data rows in " + path);
  }

  for (Row& row : rows) {
    Item item;
    item.label = row.label;
    item.features.assign(max_fid, 0.0);
    for (auto& [fid0, val] : row.feats) item.features[fid0] = val;
    grouper.add(row.qid, std::move(item));
  }

  Dataset d;
  d.queries = grouper.take();
  d.feature_count = max_fid;
  d.partition = partition;
  try {
    d.partition.validate(d.feature_count);
  } catch (const InvalidConfig& e) {
    throw PartitionMismatch("partition does not match " + path + " (" +
                            std::to_string(max_fid) + " features): " + e.what());
  }
  d.validate();
  return d;
}

/// Writes the LETOR form of a dataset with round-trip-exact values.
inline void save_letor(const Dataset& d, std::ostream& out) {
  char buf[64];
  for (const Query& q : d.queries) {
    for (const Item& item : q.items) {
      std::snprintf(buf, sizeof buf, "%.17g", item.label);
      out << buf << " qid:" << q.qid;
      for (std::size_t c = 0; c < item.features.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", item.features[c]);
        out << ' ' << (c + 1) << ':' << buf;
      }
      out << '\n';
    }
  }
}

inline void save_letor(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write dataset file: " + path);
  }
  save_letor(d, out);
  if (!out.good()) {
    throw DataError("error while writing " + path);
  }
}

/// The canonical byte form of a dataset (its LETOR text); fingerprints and
/// round-trip tests are defined over these bytes.
inline std::string canonical_bytes(const Dataset& d) {
  std::ostringstream os;
  save_letor(d, os);
  return os.str();
}

/// Column roles for a CSV file with a header row.
struct CsvSchema {
  std::string qid_column;
  std::string label_column;
  std::vector<std::string> feature_columns;  // J columns, in partition order
};

/// Plain comma-separated values, header row required, no quoting support.
inline Dataset load_csv(const std::string& path, const CsvSchema& schema,
                        const FeaturePartition& partition) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open dataset file: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw EmptyDataset("empty file: " + path);
  }
  auto split_cells = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur.push_back(ch);
      }
    }
    cells.push_back(cur);
    return cells;
  };
  const std::vector<std::string> header = split_cells(line);
  auto column_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw MissingColumn("column '" + name + "' not found in " + path);
  };
  const std::size_t qid_col = column_of(schema.qid_column);
  const std::size_t label_col = column_of(schema.label_column);
  std::vector<std::size_t> feat_cols;
  for (const std::string& name : schema.feature_columns) {
    feat_cols.push_back(column_of(name));
  }

  detail::QueryGrouper grouper;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_cells(line);
    if (cells.size() != header.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    Item item;
    item.label = detail::parse_double(
        cells[label_col],
        path + ":" + std::to_string(line_no) + " column '" + schema.label_column + "'");
    item.features.reserve(feat_cols.size());
    for (std::size_t f = 0; f < feat_cols.size(); ++f) {
      item.features.push_back(detail::parse_double(
          cells[feat_cols[f]], path + ":" + std::to_string(line_no) + " column '" +
                                   schema.feature_columns[f] + "'"));
    }
    grouper.add(cells[qid_col], std::move(item));
  }
  if (grouper.empty()) {
    throw EmptyDataset("no data rows in " + path);
  }
  Dataset d;
  d.queries = grouper.take();
  d.feature_count = feat_cols.size();
  d.partition = partition;
  d.validate();
  return d;
}

/// Query-level random split: |train| = round(fraction * N), clamped so both
/// sides stay non-empty. Lists are never split across the two sides.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction,
                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidConfig("train_fraction must be in (0, 1)");
  }
  const std::size_t n = d.query_count();
  if (n < 2) {
    throw TooFewQueries("need at least 2 queries to split, have " + std::to_string(n));
  }
  std::vector<std::size_t> order = iota_indices(n);
  std::mt19937_64 rng(seed);
  fisher_yates_shuffle(order, rng);

  auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::max<std::size_t>(1, std::min(n - 1, n_train));

  Dataset train{ {}, d.feature_count, d.partition };
  Dataset test{ {}, d.feature_count, d.partition };
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? train : test).queries.push_back(d.queries[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

/// Fresh dataset with each specified column multiplied by its factor in
/// every item; everything else is copied bit-identically.
inline Dataset perturb(const Dataset& d, const PerturbationSpec& spec) {
  spec.validate(d.partition);
  Dataset out = d;
  for (const PerturbationEntry& e : spec.entries) {
    if (e.column >= d.feature_count) {
      throw InvalidConfig("perturbation column " + std::to_string(e.column) +
                          " out of range");
    }
    for (Query& q : out.queries) {
      for (Item& item : q.items) {
        double& v = item.features[e.column];
        if (!(v > 0.0)) {
          throw NonPositiveFeature("query " + q.qid + ": column " +
                                   std::to_string(e.column) + " is " +
                                   std::to_string(v) + "; scale-sensitive values must be > 0");
        }
        v *= e.factor;
      }
    }
  }
  return out;
}

/// Desk-scale stand-in for the proprietary ranking datasets.
struct SyntheticConfig {
  std::size_t n_queries = 200;
  std::size_t items_per_query = 10;
  std::size_t query_dims = 3;   // M
  std::size_t stable_dims = 2;  // K1
  std::size_t scaled_dims = 1;  // K2
  double noise = 0.1;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_queries < 1 || items_per_query < 1) {
      throw InvalidConfig("synthetic: need at least one query and one item per query");
    }
    if (query_dims < 1 || scaled_dims < 1) {
      throw InvalidConfig("synthetic: query_dims and scaled_dims must be >= 1");
    }
    if (!(noise >= 0.0)) {
      throw InvalidConfig("synthetic: noise must be >= 0");
    }
  }
};

/// Generates query features ~ N(0,1), stable item features ~ N(0,1) and
/// log-normal scale-sensitive features (strictly positive, price-like). The
/// planted utility combines the stable features with a query-modulated log of
/// the scaled features, plus noise; the top item per query is labeled 1.
/// Fully reproducible from the seed. If planted_utilities is given it
/// receives the per-query utility vectors (test hook for recoverability).
inline Dataset gen_synthetic(const SyntheticConfig& cfg,
                             std::vector<Vec>* planted_utilities = nullptr) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Planted coefficients. The scaled columns carry a fixed dominant weight
  // so they stay the primary ranking signal for any seed (mirroring price- or
  // URL-depth-like features); the query interaction modulates them the same
  // way the wide path can.
  Vec stable_coef(cfg.stable_dims);
  for (double& c : stable_coef) c = 0.3 * gauss(rng);
  Vec query_coef(cfg.query_dims);
  for (double& c : query_coef) c = gauss(rng);
  const double scaled_weight = 2.4;

  Dataset d;
  d.feature_count = cfg.query_dims + cfg.stable_dims + cfg.scaled_dims;
  d.partition = FeaturePartition::contiguous(cfg.query_dims, cfg.stable_dims,
                                             cfg.scaled_dims);
  if (planted_utilities) planted_utilities->clear();

  for (std::size_t qi = 0; qi < cfg.n_queries; ++qi) {
    Query q;
    q.qid = std::to_string(qi + 1);
    Vec xq(cfg.query_dims);
    for (double& v : xq) v = gauss(rng);
    const double modulation = 1.0 + 0.5 * std::tanh(dot(query_coef, xq));

    Vec utilities(cfg.items_per_query);
    for (std::size_t j = 0; j < cfg.items_per_query; ++j) {
      Item item;
      item.features.reserve(d.feature_count);
      item.features.insert(item.features.end(), xq.begin(), xq.end());
      double utility = 0.0;
      for (std::size_t k = 0; k < cfg.stable_dims; ++k) {
        const double v = gauss(rng);
        item.features.push_back(v);
        utility += stable_coef[k] * v;
      }
      for (std::size_t k = 0; k < cfg.scaled_dims; ++k) {
        const double v = std::exp(0.5 * gauss(rng));  // log-normal, > 0
        item.features.push_back(v);
        utility += scaled_weight * modulation * std::log(v);
      }
      utility += cfg.noise * gauss(rng);
      utilities[j] = utility;
      q.items.push_back(std::move(item));
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < cfg.items_per_query; ++j) {
      if (utilities[j] > utilities[best]) best = j;
    }
    for (std::size_t j = 0; j < cfg.items_per_query; ++j) {
      q.items[j].label = (j == best) ? 1.0 : 0.0;
    }
    if (planted_utilities) planted_utilities->push_back(utilities);
    d.queries.push_back(std::move(q));
  }
  return d;
}

/// Per-column mean and population stddev over every item of every query,
/// restricted to the given columns (gather order). Columns with stddev
/// below 1e-12 get stddev 1.
inline Standardizer fit_standardizer(const Dataset& d,
                                     const std::vector<std::size_t>& columns) {
  if (d.queries.empty()) {
    throw EmptyDataset("fit_standardizer: empty dataset");
  }
  Standardizer s;
  s.mean.assign(columns.size(), 0.0);
  s.stddev.assign(columns.size(), 1.0);

  std::size_t n_items = 0;
  for (const Query& q : d.queries) n_items += q.items.size();

  Vec col_values(n_items);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const std::size_t col = columns[c];
    if (col >= d.feature_count) {
      throw DimensionMismatch("fit_standardizer: column " + std::to_string(col) +
                              " out of range");
    }
    std::size_t i = 0;
    for (const Query& q : d.queries) {
      for (const Item& item : q.items) col_values[i++] = item.features[col];
    }
    const double mean = compensated_mean(col_values);
    Vec sq(n_items);
    for (std::size_t k = 0; k < n_items; ++k) {
      const double dx = col_values[k] - mean;
      sq[k] = dx * dx;
    }
    double sd = std::sqrt(compensated_mean(sq));  // population convention
    if (sd < 1e-12) sd = 1.0;
    s.mean[c] = mean;
    s.stddev[c] = sd;
  }
  return s;
}

}  // namespace sirank
