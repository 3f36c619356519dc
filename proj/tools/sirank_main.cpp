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

// sirank command line: generate data, train, evaluate, run the four-variant
// comparison experiment, and audit gradients.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 numeric failure,
// 4 unexpected error.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sirank/sirank.hpp"

namespace {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SIRANK_LOG");
    if (!env) return LogLevel::info;
    if (std::strcmp(env, "quiet") == 0) return LogLevel::quiet;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::fprintf(stderr, "[sirank] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::fprintf(stderr, "[sirank] %s\n", msg.c_str());
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> loss;
  std::optional<std::string> variant;
  std::optional<std::size_t> ndcg_k;
  std::optional<std::string> out;
  std::optional<std::string> perturb;
};

sirank::PerturbationSpec parse_perturb_flag(const std::string& flag) {
  sirank::PerturbationSpec spec;
  std::size_t pos = 0;
  while (pos < flag.size()) {
    std::size_t comma = flag.find(',', pos);
    if (comma == std::string::npos) comma = flag.size();
    const std::string entry = flag.substr(pos, comma - pos);
    const std::size_t colon = entry.find(':');
    if (colon == std::string::npos) {
      throw sirank::InvalidConfig("--perturb entries look like <column>:<factor>, got '" +
                                  entry + "'");
    }
    try {
      sirank::PerturbationEntry e;
      e.column = std::stoull(entry.substr(0, colon));
      e.factor = std::stod(entry.substr(colon + 1));
      spec.entries.push_back(e);
    } catch (const std::exception&) {
      throw sirank::InvalidConfig("cannot parse --perturb entry '" + entry + "'");
    }
    pos = comma + 1;
  }
  return spec;
}

// Precedence: flags > config file > defaults.
void apply_overrides(sirank::ExperimentConfig& cfg, const Overrides& ov) {
  if (ov.seed) cfg.train.seed = *ov.seed;
  if (ov.ndcg_k) cfg.train.ndcg_k = *ov.ndcg_k;
  if (ov.out) cfg.output_dir = *ov.out;
  if (ov.perturb) cfg.perturbation = parse_perturb_flag(*ov.perturb);
  if (ov.loss) {
    if (*ov.loss == "listnet") {
      cfg.train.loss = sirank::LossKind::listnet;
    } else if (*ov.loss == "listmle") {
      cfg.train.loss = sirank::LossKind::listmle;
    } else {
      throw sirank::InvalidConfig("--loss must be listnet or listmle");
    }
  }
  if (ov.variant) {
    if (*ov.variant == "baseline") {
      cfg.train.baseline_mode = true;
    } else if (*ov.variant == "sir") {
      cfg.train.baseline_mode = false;
    } else {
      throw sirank::InvalidConfig("--variant must be baseline or sir");
    }
  }
}

std::string variant_label(const sirank::TrainConfig& cfg) {
  const std::string base =
      cfg.loss == sirank::LossKind::listnet ? "ListNet" : "ListMLE";
  return cfg.baseline_mode ? base : base + " (SIR)";
}

int cmd_gen_synthetic(const std::optional<std::string>& config_path,
                      sirank::SyntheticConfig synth, const std::string& out_path) {
  if (config_path) {
    const sirank::ExperimentConfig cfg = sirank::load_experiment_config(*config_path);
    if (cfg.source.kind != sirank::DatasetSource::Kind::synthetic) {
      throw sirank::InvalidConfig("gen-synthetic needs a synthetic dataset section");
    }
    synth = cfg.source.synthetic;
  }
  const sirank::Dataset d = sirank::gen_synthetic(synth);
  sirank::save_letor(d, out_path);
  log_info("wrote " + std::to_string(d.query_count()) + " queries x " +
           std::to_string(synth.items_per_query) + " items to " + out_path);
  log_info("fingerprint " + sirank::dataset_fingerprint(d));
  log_info("partition: query [0," + std::to_string(synth.query_dims) + "), stable [" +
           std::to_string(synth.query_dims) + "," +
           std::to_string(synth.query_dims + synth.stable_dims) + "), scaled [" +
           std::to_string(synth.query_dims + synth.stable_dims) + "," +
           std::to_string(d.feature_count) + ")");
  return 0;
}

int cmd_train(const std::string& config_path, const Overrides& ov) {
  sirank::ExperimentConfig cfg = sirank::load_experiment_config(config_path);
  apply_overrides(cfg, ov);

  const sirank::Dataset full = sirank::load_dataset(cfg);
  const std::string fingerprint = sirank::dataset_fingerprint(full);
  auto [train_split, valid_split] = sirank::split(full, cfg.train_fraction, cfg.train.seed);
  log_info("training " + variant_label(cfg.train) + " on " +
           std::to_string(train_split.query_count()) + " queries (" +
           std::to_string(valid_split.query_count()) + " validation)");

  sirank::TrainConfig tc = cfg.train;
  tc.on_epoch = [](std::size_t epoch, double loss, double ndcg) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %zu: train loss %.6f, valid ndcg %.4f", epoch,
                  loss, ndcg);
    log_debug(buf);
  };
  const sirank::TrainReport report = sirank::train(train_split, valid_split, tc);

  std::filesystem::create_directories(cfg.output_dir);
  const std::string model_path = cfg.output_dir + "/model.json";
  {
    nlohmann::json j = sirank::model_to_json(report.model);
    j["training"] = {
        {"loss", sirank::to_string(cfg.train.loss)},
        {"seed", report.seed},
        {"epochs_run", report.epochs_run},
        {"best_epoch", report.best_epoch},
        {"dataset_fingerprint", fingerprint},
    };
    std::ofstream out(model_path);
    if (!out) throw sirank::DataError("cannot write " + model_path);
    out << j.dump(2) << '\n';
  }
  {
    nlohmann::json j = {
        {"report", "sirank-train"},
        {"variant", variant_label(cfg.train)},
        {"seed", report.seed},
        {"epochs_run", report.epochs_run},
        {"best_epoch", report.best_epoch},
        {"best_valid_ndcg", report.best_valid_ndcg},
        {"train_loss", report.train_loss},
        {"valid_ndcg", report.valid_ndcg},
        {"wall_seconds", report.wall_seconds},
        {"dataset_fingerprint", fingerprint},
        {"config", sirank::train_config_to_json(cfg.train)},
    };
    std::ofstream out(cfg.output_dir + "/train_report.json");
    if (!out) throw sirank::DataError("cannot write train_report.json");
    out << j.dump(2) << '\n';
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "best valid ndcg@%zu %.4f at epoch %zu; model -> %s",
                tc.ndcg_k, report.best_valid_ndcg, report.best_epoch, model_path.c_str());
  log_info(buf);
  return 0;
}

int cmd_eval(const std::string& model_path, const std::optional<std::string>& config_path,
             const std::optional<std::string>& data_path, const Overrides& ov) {
  const sirank::Scorer model = sirank::load_model(model_path);

  sirank::Dataset data;
  sirank::PerturbationSpec spec;
  std::size_t k = 10;
  bool include_zero_label = true;
  sirank::ReportFormat format = sirank::ReportFormat::table;
  std::optional<std::string> out_dir;

  if (config_path) {
    sirank::ExperimentConfig cfg = sirank::load_experiment_config(*config_path);
    apply_overrides(cfg, ov);
    data = sirank::load_dataset(cfg);
    spec = cfg.perturbation;
    k = cfg.train.ndcg_k;
    include_zero_label = !cfg.train.skip_zero_label_queries;
    format = cfg.report_format;
    out_dir = cfg.output_dir;
  } else if (data_path) {
    data = sirank::load_letor(*data_path, model.partition);
    if (ov.perturb) spec = parse_perturb_flag(*ov.perturb);
    if (ov.ndcg_k) k = *ov.ndcg_k;
    if (ov.out) out_dir = *ov.out;
  } else {
    throw sirank::InvalidConfig("eval needs --config or --data");
  }

  if (data.feature_count != model.feature_count() ||
      !(data.partition == model.partition)) {
    throw sirank::PartitionMismatch(
        "model and dataset disagree on feature count or partition (model: " +
        std::to_string(model.feature_count()) + " features, dataset: " +
        std::to_string(data.feature_count) + ")");
  }

  sirank::EvalReport report;
  report.ndcg_k = k;
  report.dataset_fingerprint = sirank::dataset_fingerprint(data);
  report.perturbation = spec;
  report.n_eval_queries = data.query_count();
  report.rows.push_back(sirank::evaluate_model(model, data, spec, k,
                                               sirank::to_string(model.variant),
                                               include_zero_label));

  if (out_dir) sirank::write_report_files(report, *out_dir);
  if (format == sirank::ReportFormat::machine) {
    std::cout << sirank::report_to_json(report).dump(2) << '\n';
  } else {
    std::cout << sirank::render_table(report);
  }
  return 0;
}

int cmd_experiment(const std::string& config_path, const Overrides& ov) {
  sirank::ExperimentConfig cfg = sirank::load_experiment_config(config_path);
  apply_overrides(cfg, ov);

  std::vector<sirank::TrainReport> train_reports;
  const sirank::EvalReport report = sirank::run_experiment(
      cfg, &train_reports, [](const std::string& name) { log_info("trained " + name); });

  sirank::write_report_files(report, cfg.output_dir);
  for (std::size_t i = 0; i < train_reports.size(); ++i) {
    const sirank::TrainReport& tr = train_reports[i];
    const std::string& name = report.rows[i].model;
    // Variant name doubles as the file suffix: "ListNet (SIR)" -> listnet_sir.
    std::string suffix;
    for (char c : name) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        suffix.push_back(static_cast<char>(std::tolower(c)));
      } else if (!suffix.empty() && suffix.back() != '_') {
        suffix.push_back('_');
      }
    }
    while (!suffix.empty() && suffix.back() == '_') suffix.pop_back();
    nlohmann::json j = {
        {"report", "sirank-train"},
        {"variant", name},
        {"seed", tr.seed},
        {"epochs_run", tr.epochs_run},
        {"best_epoch", tr.best_epoch},
        {"best_valid_ndcg", tr.best_valid_ndcg},
        {"train_loss", tr.train_loss},
        {"valid_ndcg", tr.valid_ndcg},
        {"wall_seconds", tr.wall_seconds},
    };
    std::ofstream out(cfg.output_dir + "/train_report_" + suffix + ".json");
    if (out) out << j.dump(2) << '\n';
  }

  if (cfg.report_format == sirank::ReportFormat::machine) {
    std::cout << sirank::report_to_json(report).dump(2) << '\n';
  } else {
    std::cout << sirank::render_table(report);
  }
  log_info("report written to " + cfg.output_dir + "/report.json");
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double h, double tol, bool inject_fault) {
  sirank::TrainConfig tc;
  tc.hidden_sizes = {4};
  tc.wide_projection = 1;
  tc.seed = seed;

  const sirank::FeaturePartition partition = sirank::FeaturePartition::contiguous(2, 1, 1);
  std::mt19937_64 rng(seed);
  const sirank::Scorer model = sirank::init_scorer(partition, tc, rng);

  sirank::SyntheticConfig synth;
  synth.n_queries = 3;
  synth.items_per_query = 6;
  synth.query_dims = 2;
  synth.stable_dims = 1;
  synth.scaled_dims = 1;
  synth.noise = 0.3;
  synth.seed = seed + 1;
  const sirank::Dataset sample = sirank::gen_synthetic(synth);

  sirank::GradAuditOptions opt;
  opt.h = h;
  opt.tolerance = tol;
  opt.corrupt_wide_w = inject_fault;

  bool ok = true;
  for (const sirank::LossKind loss :
       {sirank::LossKind::listnet, sirank::LossKind::listmle}) {
    const sirank::GradAuditReport report = sirank::grad_audit(model, loss, sample, opt);
    std::printf("%s: max relative error %.3e (tolerance %.1e)\n",
                sirank::to_string(loss), report.max_rel_error, report.tolerance);
    for (const sirank::GradAuditBlock& b : report.blocks) {
      std::printf("  %-22s %.3e %s\n", b.name.c_str(), b.max_rel_error,
                  b.pass ? "ok" : "FAIL");
    }
    ok = ok && report.pass;
  }
  if (!ok) {
    std::printf("gradient audit FAILED\n");
    return 3;
  }
  std::printf("gradient audit passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sirank: scale-invariant learning-to-rank toolkit"};
  app.require_subcommand(1);

  Overrides ov;
  std::optional<std::string> config_path;

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic ranking dataset");
  sirank::SyntheticConfig synth;
  std::string gen_out = "synthetic.letor";
  std::optional<std::string> gen_config;
  gen->add_option("--config", gen_config, "config file with a synthetic dataset section");
  gen->add_option("--queries", synth.n_queries, "number of queries");
  gen->add_option("--items", synth.items_per_query, "items per query");
  gen->add_option("--query-dims", synth.query_dims, "query feature count (M)");
  gen->add_option("--stable-dims", synth.stable_dims, "stable item feature count (K1)");
  gen->add_option("--scaled-dims", synth.scaled_dims, "scale-sensitive feature count (K2)");
  gen->add_option("--noise", synth.noise, "utility noise level");
  gen->add_option("--seed", synth.seed, "generator seed");
  gen->add_option("--out", gen_out, "output LETOR file");

  // shared flags helper
  auto add_common = [&ov](CLI::App* cmd) {
    cmd->add_option("--seed", ov.seed, "override train.seed");
    cmd->add_option("--loss", ov.loss, "listnet | listmle");
    cmd->add_option("--variant", ov.variant, "baseline | sir");
    cmd->add_option("--ndcg-k", ov.ndcg_k, "NDCG truncation depth");
    cmd->add_option("--out", ov.out, "output directory");
    cmd->add_option("--perturb", ov.perturb,
                    "test-time scaling, <column>:<factor>[,<column>:<factor>...] "
                    "(0-based raw column index)");
  };

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model from a config");
  train_cmd->add_option("--config", config_path, "experiment config file")->required();
  add_common(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model");
  std::string model_path;
  std::optional<std::string> data_path;
  eval_cmd->add_option("--model", model_path, "model file")->required();
  eval_cmd->add_option("--config", config_path, "experiment config file (dataset source)");
  eval_cmd->add_option("--data", data_path, "LETOR dataset (partition taken from the model)");
  add_common(eval_cmd);

  // experiment
  auto* exp_cmd = app.add_subcommand(
      "experiment", "train and compare ListNet/ListMLE with and without SIR");
  exp_cmd->add_option("--config", config_path, "experiment config file")->required();
  add_common(exp_cmd);

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "audit analytic gradients");
  std::uint64_t grad_seed = 17;
  double grad_h = 1e-5;
  double grad_tol = 1e-5;
  bool inject_fault = false;
  grad_cmd->add_option("--seed", grad_seed, "model/data seed");
  grad_cmd->add_option("--step", grad_h, "finite-difference step");
  grad_cmd->add_option("--tol", grad_tol, "max relative error tolerance");
  grad_cmd->add_flag("--inject-fault", inject_fault,
                     "test hook: corrupt the wide-w gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_synthetic(gen_config, synth, gen_out);
    if (train_cmd->parsed()) return cmd_train(*config_path, ov);
    if (eval_cmd->parsed()) return cmd_eval(model_path, config_path, data_path, ov);
    if (exp_cmd->parsed()) return cmd_experiment(*config_path, ov);
    if (grad_cmd->parsed()) return cmd_gradcheck(grad_seed, grad_h, grad_tol, inject_fault);
  } catch (const sirank::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const sirank::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const sirank::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
