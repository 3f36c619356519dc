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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "sirank/data.hpp"
#include "sirank/metrics.hpp"
#include "sirank/model_io.hpp"
#include "sirank/training.hpp"

namespace sirank {

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

/// Provenance hash over the dataset's canonical (LETOR text) bytes.
inline std::string dataset_fingerprint(const Dataset& d) {
  return "sha256:" + sha256_hex(canonical_bytes(d));
}

// --- experiment configuration ----------------------------------------------

enum class ReportFormat { table, machine };

struct DatasetSource {
  enum class Kind { letor, csv, synthetic };
  Kind kind = Kind::synthetic;
  std::string path;          // letor, csv
  CsvSchema csv_schema;      // csv
  SyntheticConfig synthetic; // synthetic
};

struct ExperimentConfig {
  DatasetSource source;
  std::optional<FeaturePartition> partition;  // derived for synthetic sources
  TrainConfig train;
  double train_fraction = 0.7;
  PerturbationSpec perturbation;
  std::string output_dir = "sirank-out";
  ReportFormat report_format = ReportFormat::table;
};

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<std::string_view> allowed,
                       const std::string& context) {
  if (!j.is_object()) {
    throw InvalidConfig(context + " must be a JSON object");
  }
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok |= (key == a);
    if (!ok) {
      throw InvalidConfig("unknown key '" + key + "' in " + context);
    }
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig("bad value for '" + std::string(key) + "': " + e.what());
  }
}

}  // namespace detail

inline FeaturePartition partition_from_json(const nlohmann::json& j) {
  detail::check_keys(j, {"query_idx", "stable_idx", "scaled_idx"}, "partition");
  FeaturePartition p;
  p.query_idx = detail::get_or<std::vector<std::size_t>>(j, "query_idx", {});
  p.stable_idx = detail::get_or<std::vector<std::size_t>>(j, "stable_idx", {});
  p.scaled_idx = detail::get_or<std::vector<std::size_t>>(j, "scaled_idx", {});
  return p;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  detail::check_keys(j,
                     {"loss", "epochs", "learning_rate", "beta1", "beta2", "epsilon",
                      "batch_queries", "seed", "hidden_sizes", "wide_projection",
                      "baseline_mode", "wide_init", "ndcg_k", "skip_zero_label_queries",
                      "early_stop_patience"},
                     "train");
  TrainConfig cfg;
  const std::string loss = detail::get_or<std::string>(j, "loss", "listnet");
  if (loss == "listnet") {
    cfg.loss = LossKind::listnet;
  } else if (loss == "listmle") {
    cfg.loss = LossKind::listmle;
  } else {
    throw InvalidConfig("train.loss must be 'listnet' or 'listmle', got '" + loss + "'");
  }
  cfg.epochs = detail::get_or<std::size_t>(j, "epochs", cfg.epochs);
  cfg.adam.learning_rate = detail::get_or<double>(j, "learning_rate", cfg.adam.learning_rate);
  cfg.adam.beta1 = detail::get_or<double>(j, "beta1", cfg.adam.beta1);
  cfg.adam.beta2 = detail::get_or<double>(j, "beta2", cfg.adam.beta2);
  cfg.adam.epsilon = detail::get_or<double>(j, "epsilon", cfg.adam.epsilon);
  cfg.batch_queries = detail::get_or<std::size_t>(j, "batch_queries", cfg.batch_queries);
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.hidden_sizes = detail::get_or<std::vector<std::size_t>>(j, "hidden_sizes", cfg.hidden_sizes);
  cfg.wide_projection = detail::get_or<std::size_t>(j, "wide_projection", cfg.wide_projection);
  cfg.baseline_mode = detail::get_or<bool>(j, "baseline_mode", cfg.baseline_mode);
  const std::string wide_init = detail::get_or<std::string>(j, "wide_init", "uniform");
  if (wide_init == "uniform") {
    cfg.wide_init = WideInit::uniform;
  } else if (wide_init == "pass_through") {
    cfg.wide_init = WideInit::pass_through;
  } else {
    throw InvalidConfig("train.wide_init must be 'uniform' or 'pass_through'");
  }
  cfg.ndcg_k = detail::get_or<std::size_t>(j, "ndcg_k", cfg.ndcg_k);
  cfg.skip_zero_label_queries =
      detail::get_or<bool>(j, "skip_zero_label_queries", cfg.skip_zero_label_queries);
  cfg.early_stop_patience =
      detail::get_or<std::size_t>(j, "early_stop_patience", cfg.early_stop_patience);
  return cfg;
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {
      {"loss", to_string(cfg.loss)},
      {"epochs", cfg.epochs},
      {"learning_rate", cfg.adam.learning_rate},
      {"beta1", cfg.adam.beta1},
      {"beta2", cfg.adam.beta2},
      {"epsilon", cfg.adam.epsilon},
      {"batch_queries", cfg.batch_queries},
      {"seed", cfg.seed},
      {"hidden_sizes", cfg.hidden_sizes},
      {"wide_projection", cfg.wide_projection},
      {"baseline_mode", cfg.baseline_mode},
      {"wide_init", cfg.wide_init == WideInit::uniform ? "uniform" : "pass_through"},
      {"ndcg_k", cfg.ndcg_k},
      {"skip_zero_label_queries", cfg.skip_zero_label_queries},
      {"early_stop_patience", cfg.early_stop_patience},
  };
}

inline PerturbationSpec perturbation_from_json(const nlohmann::json& j) {
  PerturbationSpec spec;
  if (!j.is_array()) {
    throw InvalidConfig("perturbation must be an array of {column, factor} objects");
  }
  for (const auto& e : j) {
    detail::check_keys(e, {"column", "factor"}, "perturbation entry");
    PerturbationEntry entry;
    entry.column = detail::get_or<std::size_t>(e, "column", 0);
    entry.factor = detail::get_or<double>(e, "factor", 1.0);
    spec.entries.push_back(entry);
  }
  return spec;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  detail::check_keys(j,
                     {"dataset", "partition", "train", "train_fraction", "perturbation",
                      "output_dir", "report_format"},
                     "config");
  ExperimentConfig cfg;
  if (!j.contains("dataset")) {
    throw InvalidConfig("config needs a 'dataset' section");
  }
  const auto& ds = j.at("dataset");
  detail::check_keys(ds, {"letor", "csv", "synthetic"}, "dataset");
  if (ds.size() != 1) {
    throw InvalidConfig("dataset must name exactly one source (letor | csv | synthetic)");
  }
  if (ds.contains("letor")) {
    detail::check_keys(ds.at("letor"), {"path"}, "dataset.letor");
    cfg.source.kind = DatasetSource::Kind::letor;
    cfg.source.path = detail::get_or<std::string>(ds.at("letor"), "path", "");
    if (cfg.source.path.empty()) {
      throw InvalidConfig("dataset.letor.path is required");
    }
  } else if (ds.contains("csv")) {
    const auto& c = ds.at("csv");
    detail::check_keys(c, {"path", "qid_column", "label_column", "feature_columns"},
                       "dataset.csv");
    cfg.source.kind = DatasetSource::Kind::csv;
    cfg.source.path = detail::get_or<std::string>(c, "path", "");
    cfg.source.csv_schema.qid_column = detail::get_or<std::string>(c, "qid_column", "");
    cfg.source.csv_schema.label_column = detail::get_or<std::string>(c, "label_column", "");
    cfg.source.csv_schema.feature_columns =
        detail::get_or<std::vector<std::string>>(c, "feature_columns", {});
    if (cfg.source.path.empty() || cfg.source.csv_schema.qid_column.empty() ||
        cfg.source.csv_schema.label_column.empty() ||
        cfg.source.csv_schema.feature_columns.empty()) {
      throw InvalidConfig("dataset.csv needs path, qid_column, label_column, feature_columns");
    }
  } else {
    const auto& sy = ds.at("synthetic");
    detail::check_keys(sy,
                       {"n_queries", "items_per_query", "query_dims", "stable_dims",
                        "scaled_dims", "noise", "seed"},
                       "dataset.synthetic");
    cfg.source.kind = DatasetSource::Kind::synthetic;
    SyntheticConfig& s = cfg.source.synthetic;
    s.n_queries = detail::get_or<std::size_t>(sy, "n_queries", s.n_queries);
    s.items_per_query = detail::get_or<std::size_t>(sy, "items_per_query", s.items_per_query);
    s.query_dims = detail::get_or<std::size_t>(sy, "query_dims", s.query_dims);
    s.stable_dims = detail::get_or<std::size_t>(sy, "stable_dims", s.stable_dims);
    s.scaled_dims = detail::get_or<std::size_t>(sy, "scaled_dims", s.scaled_dims);
    s.noise = detail::get_or<double>(sy, "noise", s.noise);
    s.seed = detail::get_or<std::uint64_t>(sy, "seed", s.seed);
  }

  if (j.contains("partition")) {
    if (cfg.source.kind == DatasetSource::Kind::synthetic) {
      throw InvalidConfig("synthetic datasets derive their partition; drop the 'partition' section");
    }
    cfg.partition = partition_from_json(j.at("partition"));
  } else if (cfg.source.kind != DatasetSource::Kind::synthetic) {
    throw InvalidConfig("file-backed datasets need a 'partition' section");
  }

  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  cfg.train_fraction = detail::get_or<double>(j, "train_fraction", cfg.train_fraction);
  if (j.contains("perturbation")) {
    cfg.perturbation = perturbation_from_json(j.at("perturbation"));
  }
  cfg.output_dir = detail::get_or<std::string>(j, "output_dir", cfg.output_dir);
  const std::string fmt = detail::get_or<std::string>(j, "report_format", "table");
  if (fmt == "table") {
    cfg.report_format = ReportFormat::table;
  } else if (fmt == "machine" || fmt == "machine-readable") {
    cfg.report_format = ReportFormat::machine;
  } else {
    throw InvalidConfig("report_format must be 'table' or 'machine'");
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidConfig("cannot open config file: " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig("malformed config file " + path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

inline Dataset load_dataset(const ExperimentConfig& cfg) {
  switch (cfg.source.kind) {
    case DatasetSource::Kind::letor:
      return load_letor(cfg.source.path, *cfg.partition);
    case DatasetSource::Kind::csv:
      return load_csv(cfg.source.path, cfg.source.csv_schema, *cfg.partition);
    case DatasetSource::Kind::synthetic:
    default:
      return gen_synthetic(cfg.source.synthetic);
  }
}

// --- evaluation reports ------------------------------------------------------

struct EvalRow {
  std::string model;
  double unperturbed_ndcg_k = 0.0;
  double unperturbed_ndcg_full = 0.0;
  std::optional<double> perturbed_ndcg_k;
  std::optional<double> perturbed_ndcg_full;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::uint64_t seed = 0;
  std::size_t ndcg_k = 10;
  std::string dataset_fingerprint;
  PerturbationSpec perturbation;
  std::size_t n_train_queries = 0;  // 0 when evaluation-only
  std::size_t n_eval_queries = 0;
  nlohmann::json train_budget;  // config echo; variants share it
};

/// One report row: mean NDCG at depth k and at full depth, on the dataset
/// as-is and (when a perturbation is given) on the perturbed copy.
inline EvalRow evaluate_model(const Scorer& model, const Dataset& eval_data,
                              const PerturbationSpec& spec, std::size_t k,
                              std::string row_name,
                              bool include_zero_label_queries = true) {
  EvalRow row;
  row.model = std::move(row_name);
  row.unperturbed_ndcg_k = mean_ndcg(eval_data, model, k, include_zero_label_queries);
  row.unperturbed_ndcg_full =
      mean_ndcg(eval_data, model, kFullDepth, include_zero_label_queries);
  if (!spec.empty()) {
    const Dataset perturbed = perturb(eval_data, spec);
    row.perturbed_ndcg_k = mean_ndcg(perturbed, model, k, include_zero_label_queries);
    row.perturbed_ndcg_full =
        mean_ndcg(perturbed, model, kFullDepth, include_zero_label_queries);
  }
  return row;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& row : r.rows) {
    nlohmann::json jr = {
        {"model", row.model},
        {"unperturbed_ndcg_k", row.unperturbed_ndcg_k},
        {"unperturbed_ndcg_full", row.unperturbed_ndcg_full},
    };
    if (row.perturbed_ndcg_k) {
      jr["perturbed_ndcg_k"] = *row.perturbed_ndcg_k;
      jr["perturbed_ndcg_full"] = *row.perturbed_ndcg_full;
    }
    rows.push_back(jr);
  }
  nlohmann::json pert = nlohmann::json::array();
  for (const PerturbationEntry& e : r.perturbation.entries) {
    pert.push_back({{"column", e.column}, {"factor", e.factor}});
  }
  return {
      {"report", "sirank-eval"},
      {"rows", rows},
      {"metadata",
       {
           {"seed", r.seed},
           {"ndcg_k", r.ndcg_k},
           {"dataset_fingerprint", r.dataset_fingerprint},
           {"perturbation", pert},
           {"n_train_queries", r.n_train_queries},
           {"n_eval_queries", r.n_eval_queries},
           {"train_budget", r.train_budget},
           {"tuning", "equal-budget, equal-seed training for all variants"},
       }},
  };
}

/// Human table mirroring the four-row layout of the reference experiments;
/// values printed to 3 decimals, identical underlying numbers to the JSON.
inline std::string render_table(const EvalReport& r) {
  const bool perturbed = !r.perturbation.entries.empty();
  std::size_t name_w = 14;
  for (const EvalRow& row : r.rows) name_w = std::max(name_w, row.model.size() + 2);

  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-*s %12s", static_cast<int>(name_w), "Model",
                "Unperturbed");
  out += buf;
  if (perturbed) {
    std::snprintf(buf, sizeof buf, " %12s", "Perturbed");
    out += buf;
  }
  out += '\n';
  out += std::string(name_w + 13 + (perturbed ? 13 : 0), '-');
  out += '\n';
  for (const EvalRow& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-*s %12.3f", static_cast<int>(name_w),
                  row.model.c_str(), row.unperturbed_ndcg_k);
    out += buf;
    if (perturbed) {
      std::snprintf(buf, sizeof buf, " %12.3f", row.perturbed_ndcg_k.value_or(0.0));
      out += buf;
    }
    out += '\n';
  }
  std::snprintf(buf, sizeof buf, "NDCG@%zu on %zu held-out queries; fingerprint %s\n",
                r.ndcg_k, r.n_eval_queries, r.dataset_fingerprint.c_str());
  out += buf;
  return out;
}

inline void write_report_files(const EvalReport& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/report.json");
    if (!out) throw DataError("cannot write " + dir + "/report.json");
    out << report_to_json(r).dump(2) << '\n';
  }
  {
    std::ofstream out(dir + "/report.txt");
    if (!out) throw DataError("cannot write " + dir + "/report.txt");
    out << render_table(r);
  }
}

/// Trains the four comparison variants (ListNet, ListNet+SIR, ListMLE,
/// ListMLE+SIR) on an identical split, seed and budget, then evaluates each
/// on the held-out queries with and without the configured perturbation.
/// Variants train concurrently; each is internally deterministic, so
/// concurrency cannot change any reported number.
inline EvalReport run_experiment(const ExperimentConfig& cfg,
                                 std::vector<TrainReport>* train_reports = nullptr,
                                 std::function<void(const std::string&)> on_variant = {}) {
  const Dataset full = load_dataset(cfg);
  const std::string fingerprint = dataset_fingerprint(full);
  auto [train_split, test_split] = split(full, cfg.train_fraction, cfg.train.seed);

  struct VariantSpec {
    const char* name;
    LossKind loss;
    bool baseline;
  };
  const VariantSpec variants[] = {
      {"ListNet", LossKind::listnet, true},
      {"ListNet (SIR)", LossKind::listnet, false},
      {"ListMLE", LossKind::listmle, true},
      {"ListMLE (SIR)", LossKind::listmle, false},
  };

  std::vector<std::future<TrainReport>> futures;
  for (const VariantSpec& v : variants) {
    TrainConfig tc = cfg.train;
    tc.loss = v.loss;
    tc.baseline_mode = v.baseline;
    tc.on_epoch = nullptr;  // variants run concurrently
    futures.push_back(std::async(std::launch::async, [tc, &train_split, &test_split]() {
      return train(train_split, test_split, tc);
    }));
  }

  EvalReport report;
  report.seed = cfg.train.seed;
  report.ndcg_k = cfg.train.ndcg_k;
  report.dataset_fingerprint = fingerprint;
  report.perturbation = cfg.perturbation;
  report.n_train_queries = train_split.query_count();
  report.n_eval_queries = test_split.query_count();
  {
    TrainConfig budget = cfg.train;
    nlohmann::json echo = train_config_to_json(budget);
    echo.erase("loss");           // varies per row
    echo.erase("baseline_mode");  // varies per row
    report.train_budget = echo;
  }

  if (train_reports) train_reports->clear();
  for (std::size_t i = 0; i < futures.size(); ++i) {
    TrainReport tr = futures[i].get();
    report.rows.push_back(evaluate_model(tr.model, test_split, cfg.perturbation,
                                         cfg.train.ndcg_k, variants[i].name,
                                         !cfg.train.skip_zero_label_queries));
    if (on_variant) on_variant(variants[i].name);
    if (train_reports) train_reports->push_back(std::move(tr));
  }
  return report;
}

}  // namespace sirank
