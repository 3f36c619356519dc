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

// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// required criterion fails. Every tolerance is pinned here in code.
//
//   C1  pairwise score-difference invariance, 1000 random scorers
//   C2  the same with independent per-column factors
//   C3  exact ranking invariance on gap-separated queries
//   C4  loss invariance under constant score shifts
//   C5  analytic gradients vs central finite differences, 20 small models
//   C6  NDCG against an exhaustive-permutation oracle
//   C7  synthetic end-to-end four-variant experiment
//   C8  byte-identical experiment reports across reruns
//   C9  (optional) MSLR directional check, skipped when the data is absent
//
// C9 looks for an MSLR fold directory (train.txt inside) at $SIRANK_MSLR_DIR,
// falling back to data/MSLR/Fold1.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sirank/sirank.hpp"
#include "test_support.hpp"

#ifndef SIRANK_CLI_PATH
#error "SIRANK_CLI_PATH must point at the sirank binary"
#endif

namespace {

using sirank::Vec;

int g_failures = 0;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report(const std::string& id, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  if (!pass) ++g_failures;
}

void report_skip(const std::string& id, const std::string& detail) {
  std::printf("[SKIP] %s: %s\n", id.c_str(), detail.c_str());
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

// C1/C2: 1000 random (scorer, query, item pair, factor) trials.
void criterion_invariance(bool per_column) {
  Timer timer;
  std::mt19937_64 rng(per_column ? 1002 : 1001);
  std::uniform_real_distribution<double> logc(std::log(1e-3), std::log(1e3));
  double worst = 0.0;
  bool pass = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const sirank::Scorer s =
        sirank::testing::random_scorer(rng, sirank::testing::random_dims(rng));
    const std::vector<Vec> items =
        sirank::testing::random_query_items(rng, s.partition, 2);

    std::vector<Vec> scaled;
    if (per_column) {
      Vec factors(s.partition.scaled_dims());
      for (double& f : factors) f = std::exp(logc(rng));
      scaled = sirank::testing::scale_items(items, s.partition, factors);
    } else {
      scaled = sirank::testing::scale_items(items, s.partition, std::exp(logc(rng)));
    }

    const double delta = sirank::score_item(s, items[0]) - sirank::score_item(s, items[1]);
    const double delta_scaled =
        sirank::score_item(s, scaled[0]) - sirank::score_item(s, scaled[1]);
    const double residual =
        std::abs(delta_scaled - delta) / std::max(1.0, std::abs(delta));
    worst = std::max(worst, residual);
    pass = pass && residual <= 1e-8;
  }
  const double elapsed = timer.seconds();
  pass = pass && elapsed < 10.0;
  report(per_column ? "C2" : "C1",
         pass,
         fmt("%s, 1000 trials, max residual %.2e (tol 1e-8), %.1fs (budget 10s)",
             per_column ? "per-column heterogeneous scaling" : "pairwise score-difference invariance",
             worst, elapsed));
}

// C3: rank() identical before and after scaling, on queries with no near-ties.
void criterion_ranking_invariance() {
  Timer timer;
  std::mt19937_64 rng(1003);
  const double factors[] = {0.01, 0.5, 10.0, 1000.0};
  int accepted = 0;
  bool pass = true;
  while (accepted < 200) {
    const sirank::Scorer s =
        sirank::testing::random_scorer(rng, sirank::testing::random_dims(rng));
    const std::vector<Vec> items =
        sirank::testing::random_query_items(rng, s.partition, 20);
    const Vec scores = sirank::score_query(s, items);

    double min_gap = 1e300;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      for (std::size_t j = i + 1; j < scores.size(); ++j) {
        min_gap = std::min(min_gap, std::abs(scores[i] - scores[j]));
      }
    }
    if (min_gap <= 1e-6) continue;
    ++accepted;

    const sirank::RankPermutation before = sirank::rank(scores);
    for (double c : factors) {
      const Vec after =
          sirank::score_query(s, sirank::testing::scale_items(items, s.partition, c));
      pass = pass && sirank::rank(after).order == before.order;
    }
  }
  report("C3", pass,
         fmt("ranking invariance, 200 queries x 20 items, c in {0.01, 0.5, 10, 1000}, "
             "exact permutation match, %.1fs",
             timer.seconds()));
}

// C4: both losses under constant score shifts, 500 random lists.
void criterion_loss_shift_invariance() {
  Timer timer;
  std::mt19937_64 rng(1004);
  std::uniform_real_distribution<double> score_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> shift(-100.0, 100.0);
  double worst = 0.0;
  bool pass = true;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    sirank::LabeledList list;
    list.scores.resize(n);
    list.labels.resize(n);
    for (double& s : list.scores) s = score_dist(rng);
    for (double& y : list.labels) y = static_cast<double>(rng() % 3);
    list.labels[rng() % n] = 1.0;

    sirank::LabeledList shifted = list;
    const double k = shift(rng);
    for (double& s : shifted.scores) s += k;

    const std::uint64_t tie_seed = rng();
    const double d_net =
        std::abs(sirank::listnet_loss(list).loss - sirank::listnet_loss(shifted).loss);
    const double d_mle = std::abs(sirank::listmle_loss(list, tie_seed).loss -
                                  sirank::listmle_loss(shifted, tie_seed).loss);
    worst = std::max({worst, d_net, d_mle});
    pass = pass && d_net <= 1e-9 && d_mle <= 1e-9;
  }
  report("C4", pass,
         fmt("loss shift invariance, 500 lists, k in [-100, 100], max deviation %.2e "
             "(tol 1e-9), %.1fs",
             worst, timer.seconds()));
}

// C5: grad_audit over 20 random small models, both losses.
void criterion_gradient_audit() {
  Timer timer;
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  bool pass = true;
  int models = 0;
  while (models < 20) {
    const sirank::testing::ScorerDims dims = sirank::testing::random_dims(rng);
    sirank::Scorer model = sirank::testing::random_scorer(rng, dims);
    if (sirank::parameter_count(model) > 200) continue;
    ++models;

    sirank::Dataset sample;
    sample.feature_count = model.feature_count();
    sample.partition = model.partition;
    for (int qi = 0; qi < 2; ++qi) {
      sirank::Query q;
      q.qid = std::to_string(qi);
      const std::vector<Vec> rows =
          sirank::testing::random_query_items(rng, model.partition, 5);
      for (const Vec& row : rows) q.items.push_back({row, 0.0});
      q.items[rng() % q.items.size()].label = 1.0;
      sample.queries.push_back(std::move(q));
    }

    sirank::GradAuditOptions opt;  // h = 1e-5, tolerance 1e-5
    for (const sirank::LossKind loss : {sirank::LossKind::listnet, sirank::LossKind::listmle}) {
      const sirank::GradAuditReport audit = sirank::grad_audit(model, loss, sample, opt);
      worst = std::max(worst, audit.max_rel_error);
      pass = pass && audit.pass;
    }
  }
  const double elapsed = timer.seconds();
  pass = pass && elapsed < 30.0;
  report("C5", pass,
         fmt("gradient audit, 20 models x 2 losses, h=1e-5, max rel error %.2e "
             "(tol 1e-5), %.1fs (budget 30s)",
             worst, elapsed));
}

double oracle_ideal_dcg(const Vec& labels, std::size_t k) {
  std::vector<std::size_t> idx = sirank::iota_indices(labels.size());
  std::sort(idx.begin(), idx.end());
  double best = 0.0;
  do {
    const std::size_t depth = std::min(k, idx.size());
    double dcg = 0.0;
    for (std::size_t r = 0; r < depth; ++r) {
      dcg += (std::exp2(labels[idx[r]]) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
    }
    best = std::max(best, dcg);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

// C6: implementation NDCG against the exhaustive-permutation oracle.
void criterion_ndcg_oracle() {
  Timer timer;
  std::mt19937_64 rng(1006);
  std::uniform_real_distribution<double> score_dist(-5.0, 5.0);
  double worst = 0.0;
  bool pass = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    Vec labels(n), scores(n);
    for (double& y : labels) y = static_cast<double>(rng() % 4);
    for (double& s : scores) s = score_dist(rng);
    const std::size_t k = 1 + rng() % 10;

    const sirank::RankPermutation perm = sirank::rank(scores);
    const double ideal = oracle_ideal_dcg(labels, k);
    double oracle;
    if (ideal == 0.0) {
      oracle = 1.0;
    } else {
      double dcg = 0.0;
      const std::size_t depth = std::min(k, n);
      for (std::size_t r = 0; r < depth; ++r) {
        dcg += (std::exp2(labels[perm.order[r]]) - 1.0) /
               std::log2(static_cast<double>(r) + 2.0);
      }
      oracle = dcg / ideal;
    }
    const double diff = std::abs(sirank::ndcg(labels, perm, k) - oracle);
    worst = std::max(worst, diff);
    pass = pass && diff <= 1e-12;
  }

  // hand case: labels [0, 1] ranked worst-first at k = 2
  const double hand = sirank::ndcg({0.0, 1.0}, sirank::rank({1.0, 0.0}), 2);
  pass = pass && std::abs(hand - 0.630930) <= 1e-6;

  report("C6", pass,
         fmt("NDCG oracle, 1000 lists <= 8 items, max diff %.2e (tol 1e-12); "
             "hand case %.6f vs 0.630930, %.1fs",
             worst, hand, timer.seconds()));
}

sirank::ExperimentConfig acceptance_experiment_config(const std::string& out_dir) {
  sirank::ExperimentConfig cfg;
  cfg.source.kind = sirank::DatasetSource::Kind::synthetic;
  cfg.source.synthetic.n_queries = 2600;
  cfg.source.synthetic.items_per_query = 10;
  cfg.source.synthetic.query_dims = 3;
  cfg.source.synthetic.stable_dims = 2;
  cfg.source.synthetic.scaled_dims = 1;
  cfg.source.synthetic.noise = 0.25;
  cfg.source.synthetic.seed = 7;
  cfg.train_fraction = 2000.0 / 2600.0;  // 2000 train / 600 test queries
  cfg.train.loss = sirank::LossKind::listnet;
  cfg.train.epochs = 80;
  cfg.train.adam.learning_rate = 3e-3;
  cfg.train.batch_queries = 32;
  cfg.train.seed = 7;
  cfg.train.hidden_sizes = {32, 32};
  cfg.train.wide_projection = 2;
  cfg.train.wide_init = sirank::WideInit::pass_through;
  cfg.train.ndcg_k = 10;
  cfg.train.early_stop_patience = 20;
  cfg.perturbation.entries = {{5, 100.0}};
  cfg.output_dir = out_dir;
  return cfg;
}

// C7: the end-to-end four-variant experiment on synthetic data.
void criterion_end_to_end() {
  Timer timer;
  const sirank::ExperimentConfig cfg = acceptance_experiment_config("");
  const sirank::EvalReport rep = sirank::run_experiment(cfg);

  auto row = [&](const std::string& name) -> const sirank::EvalRow& {
    for (const sirank::EvalRow& r : rep.rows) {
      if (r.model == name) return r;
    }
    throw std::runtime_error("missing report row " + name);
  };

  bool pass = true;
  std::string detail;
  for (const char* loss : {"ListNet", "ListMLE"}) {
    const sirank::EvalRow& base = row(loss);
    const sirank::EvalRow& sir = row(std::string(loss) + " (SIR)");
    const double sir_gap = std::abs(sir.unperturbed_ndcg_k - *sir.perturbed_ndcg_k);
    const double base_drop = base.unperturbed_ndcg_k - *base.perturbed_ndcg_k;
    const double harm = base.unperturbed_ndcg_k - sir.unperturbed_ndcg_k;
    pass = pass && sir_gap <= 0.005;   // (a) SIR unchanged under perturbation
    pass = pass && base_drop >= 0.02;  // (b) baseline visibly degrades
    pass = pass && harm <= 0.02;       // (c) do-no-harm on clean data
    detail += fmt("%s base %.3f->%.3f sir %.3f->%.3f; ", loss, base.unperturbed_ndcg_k,
                  *base.perturbed_ndcg_k, sir.unperturbed_ndcg_k, *sir.perturbed_ndcg_k);
  }
  const double elapsed = timer.seconds();
  pass = pass && elapsed < 120.0;
  report("C7", pass,
         detail + fmt("(a) gap<=0.005 (b) drop>=0.02 (c) harm<=0.02, %.0fs (budget 120s)",
                      elapsed));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// C8: the experiment command is a pure function of config bytes and seed.
void criterion_determinism() {
  Timer timer;
  namespace fs = std::filesystem;
  const std::string base = fs::temp_directory_path() / "sirank_acceptance_c8";
  fs::remove_all(base);
  fs::create_directories(base);

  nlohmann::json cfg = {
      {"dataset",
       {{"synthetic",
         {{"n_queries", 120}, {"items_per_query", 6}, {"query_dims", 3},
          {"stable_dims", 2}, {"scaled_dims", 1}, {"noise", 0.25}, {"seed", 7}}}}},
      {"train",
       {{"loss", "listnet"}, {"epochs", 6}, {"learning_rate", 0.003},
        {"batch_queries", 16}, {"seed", 7}, {"hidden_sizes", {8}},
        {"wide_projection", 2}, {"ndcg_k", 5}}},
      {"train_fraction", 0.7},
      {"perturbation", {{{"column", 5}, {"factor", 100.0}}}},
  };

  bool pass = true;
  std::string bytes_json, bytes_txt;
  for (int run = 0; run < 2; ++run) {
    const std::string out_dir = base + "/out" + std::to_string(run);
    cfg["output_dir"] = out_dir;
    const std::string cfg_path = base + "/cfg" + std::to_string(run) + ".json";
    std::ofstream(cfg_path) << cfg.dump(2);
    const std::string cmd = std::string(SIRANK_CLI_PATH) + " experiment --config " +
                            cfg_path + " > /dev/null 2>&1";
    pass = pass && std::system(cmd.c_str()) == 0;
    if (run == 0) {
      bytes_json = slurp(out_dir + "/report.json");
      bytes_txt = slurp(out_dir + "/report.txt");
      pass = pass && !bytes_json.empty();
    } else {
      pass = pass && bytes_json == slurp(out_dir + "/report.json");
      pass = pass && bytes_txt == slurp(out_dir + "/report.txt");
    }
  }
  fs::remove_all(base);
  report("C8", pass,
         fmt("experiment reports byte-identical across reruns, %.1fs", timer.seconds()));
}

// C9 (optional): MSLR fold, URL-slash-count feature (id 126) x100.
void criterion_mslr() {
  const char* env = std::getenv("SIRANK_MSLR_DIR");
  const std::string dir = env ? env : "data/MSLR/Fold1";
  const std::string path = dir + "/train.txt";
  if (!std::filesystem::exists(path)) {
    report_skip("C9", "MSLR fold not found at " + dir +
                          " (set SIRANK_MSLR_DIR to enable)");
    return;
  }
  Timer timer;

  // IDF columns (feature ids 16-20) are constant within a query; the
  // URL-slash count is feature id 126 (0-based column 125).
  sirank::FeaturePartition partition;
  partition.query_idx = {15, 16, 17, 18, 19};
  partition.scaled_idx = {125};
  for (std::size_t c = 0; c < 136; ++c) {
    if (c == 125 || (c >= 15 && c <= 19)) continue;
    partition.stable_idx.push_back(c);
  }

  sirank::Dataset full = sirank::load_letor(path, partition);

  // Subsample 1000 usable queries: every label row present, at least one
  // relevant item (ListNet needs it) and strictly positive slash counts.
  std::vector<std::size_t> order = sirank::iota_indices(full.query_count());
  std::mt19937_64 rng(7);
  sirank::fisher_yates_shuffle(order, rng);
  sirank::Dataset sub;
  sub.feature_count = full.feature_count;
  sub.partition = full.partition;
  std::size_t rejected = 0;
  for (std::size_t idx : order) {
    if (sub.queries.size() == 1000) break;
    const sirank::Query& q = full.queries[idx];
    bool usable = q.items.size() >= 2;
    double label_sum = 0.0;
    for (const sirank::Item& item : q.items) {
      label_sum += item.label;
      usable = usable && item.features[125] > 0.0;
    }
    if (!usable || label_sum <= 0.0) {
      ++rejected;
      continue;
    }
    sub.queries.push_back(q);
  }
  if (sub.queries.size() < 100) {
    report_skip("C9", "too few usable MSLR queries after filtering");
    return;
  }

  const auto [train_split, test_split] = sirank::split(sub, 0.7, 7);
  sirank::TrainConfig tc;
  tc.loss = sirank::LossKind::listnet;
  tc.epochs = 15;
  tc.early_stop_patience = 5;
  tc.adam.learning_rate = 1e-3;
  tc.seed = 7;
  tc.ndcg_k = 10;

  tc.baseline_mode = true;
  const sirank::TrainReport base = sirank::train(train_split, test_split, tc);
  tc.baseline_mode = false;
  const sirank::TrainReport sir = sirank::train(train_split, test_split, tc);

  const sirank::PerturbationSpec spec{{{125, 100.0}}};
  const sirank::Dataset perturbed = sirank::perturb(test_split, spec);
  const double base_pert = sirank::mean_ndcg(perturbed, base.model, 10);
  const double sir_pert = sirank::mean_ndcg(perturbed, sir.model, 10);
  const double base_clean = sirank::mean_ndcg(test_split, base.model, 10);
  const double sir_clean = sirank::mean_ndcg(test_split, sir.model, 10);

  report("C9", sir_pert > base_pert,
         fmt("MSLR x100 slash-count: ListNet %.3f->%.3f, ListNet(SIR) %.3f->%.3f "
             "(%zu queries filtered), %.0fs",
             base_clean, base_pert, sir_clean, sir_pert, rejected, timer.seconds()));
}

}  // namespace

int main() {
  std::printf("sirank acceptance suite\n");
  try {
    criterion_invariance(/*per_column=*/false);  // C1
    criterion_invariance(/*per_column=*/true);   // C2
    criterion_ranking_invariance();              // C3
    criterion_loss_shift_invariance();           // C4
    criterion_gradient_audit();                  // C5
    criterion_ndcg_oracle();                     // C6
    criterion_end_to_end();                      // C7
    criterion_determinism();                     // C8
    criterion_mslr();                            // C9 (optional)
  } catch (const std::exception& e) {
    std::printf("[FAIL] suite aborted: %s\n", e.what());
    return 1;
  }
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
