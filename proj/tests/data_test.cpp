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

#include "sirank/data.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "sirank/metrics.hpp"

namespace sirank {
namespace {

std::string write_temp(const std::string& name, const std::string& contents) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream out(path);
  out << contents;
  return path;
}

TEST(LoadLetor, MapsFieldsAndFillsMissingFeatures) {
  const std::string path =
      write_temp("letor_basic.txt", "1 qid:5 1:0.5 3:2.0\n");
  const Dataset d = load_letor(path, FeaturePartition::contiguous(1, 1, 1));
  ASSERT_EQ(d.query_count(), 1u);
  EXPECT_EQ(d.queries[0].qid, "5");
  ASSERT_EQ(d.queries[0].items.size(), 1u);
  EXPECT_EQ(d.queries[0].items[0].label, 1.0);
  EXPECT_EQ(d.queries[0].items[0].features, Vec({0.5, 0.0, 2.0}));
  std::filesystem::remove(path);
}

TEST(LoadLetor, StripsComments) {
  const std::string path = write_temp(
      "letor_comment.txt", "0 qid:5 2:1.0 3:4.0 # doc=7 9:9.9\n");
  const Dataset d = load_letor(path, FeaturePartition::contiguous(1, 1, 1));
  EXPECT_EQ(d.queries[0].items[0].features, Vec({0.0, 1.0, 4.0}));
  std::filesystem::remove(path);
}

TEST(LoadLetor, GroupsLinesByQid) {
  const std::string path = write_temp("letor_group.txt",
                                      "1 qid:5 1:1.0 3:1.5\n"
                                      "0 qid:5 1:2.0 3:2.5\n"
                                      "0 qid:6 1:3.0 3:3.5\n");
  const Dataset d = load_letor(path, FeaturePartition::contiguous(1, 1, 1));
  ASSERT_EQ(d.query_count(), 2u);
  EXPECT_EQ(d.queries[0].qid, "5");
  EXPECT_EQ(d.queries[0].items.size(), 2u);
  EXPECT_EQ(d.queries[1].qid, "6");
  std::filesystem::remove(path);
}

TEST(LoadLetor, ParseErrorNamesTheLine) {
  const std::string path = write_temp("letor_bad.txt",
                                      "1 qid:5 1:1.0 2:1 3:2\n"
                                      "1 qid:5 1:abc 2:1 3:2\n");
  try {
    load_letor(path, FeaturePartition::contiguous(1, 1, 1));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(LoadLetor, EmptyFileRejected) {
  const std::string path = write_temp("letor_empty.txt", "# only a comment\n\n");
  EXPECT_THROW(load_letor(path, FeaturePartition::contiguous(1, 1, 1)), EmptyDataset);
  std::filesystem::remove(path);
}

TEST(LoadLetor, MissingFileNamesThePath) {
  try {
    load_letor("/no/such/file.letor", FeaturePartition::contiguous(1, 1, 1));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("/no/such/file.letor"), std::string::npos);
  }
}

TEST(LoadLetor, PartitionMustCoverInferredColumns) {
  const std::string path = write_temp("letor_cols.txt", "1 qid:1 1:1.0 4:2.0\n");
  EXPECT_THROW(load_letor(path, FeaturePartition::contiguous(1, 1, 1)),
               PartitionMismatch);
  std::filesystem::remove(path);
}

TEST(LetorRoundTrip, ValueExact) {
  SyntheticConfig cfg;
  cfg.n_queries = 20;
  cfg.seed = 99;
  const Dataset d = gen_synthetic(cfg);
  const std::string path = ::testing::TempDir() + "letor_roundtrip.txt";
  save_letor(d, path);
  const Dataset back = load_letor(path, d.partition);
  EXPECT_EQ(canonical_bytes(back), canonical_bytes(d));
  std::filesystem::remove(path);
}

TEST(LoadCsv, GroupsRowsByQidColumn) {
  const std::string path = write_temp("data.csv",
                                      "qid,price,stars,click\n"
                                      "q1,10.5,4.0,1\n"
                                      "q1,20.0,3.0,0\n"
                                      "q2,15.0,5.0,1\n");
  CsvSchema schema{"qid", "click", {"stars", "price"}};
  const Dataset d = load_csv(path, schema, FeaturePartition::contiguous(1, 0, 1));
  ASSERT_EQ(d.query_count(), 2u);
  EXPECT_EQ(d.feature_count, 2u);
  // feature order follows the schema, not the file
  EXPECT_EQ(d.queries[0].items[0].features, Vec({4.0, 10.5}));
  EXPECT_EQ(d.queries[0].items[0].label, 1.0);
  std::filesystem::remove(path);
}

TEST(LoadCsv, HeaderOnlyFileRejected) {
  const std::string path = write_temp("header_only.csv", "qid,price,click\n");
  CsvSchema schema{"qid", "click", {"price"}};
  EXPECT_THROW(load_csv(path, schema, FeaturePartition::contiguous(1, 0, 0)),
               EmptyDataset);
  std::filesystem::remove(path);
}

TEST(LoadCsv, NonNumericCellNamesRowAndColumn) {
  const std::string path = write_temp("bad_cell.csv",
                                      "qid,price,click\n"
                                      "q1,10.0,1\n"
                                      "q1,abc,0\n");
  CsvSchema schema{"qid", "click", {"price"}};
  try {
    load_csv(path, schema, FeaturePartition::contiguous(1, 0, 0));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("price"), std::string::npos) << msg;
  }
  std::filesystem::remove(path);
}

TEST(LoadCsv, MissingSchemaColumnRejected) {
  const std::string path = write_temp("missing_col.csv",
                                      "qid,price,click\nq1,10.0,1\n");
  CsvSchema schema{"qid", "click", {"rating"}};
  EXPECT_THROW(load_csv(path, schema, FeaturePartition::contiguous(1, 0, 0)),
               MissingColumn);
  std::filesystem::remove(path);
}

Dataset small_synthetic(std::size_t n_queries, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_queries = n_queries;
  cfg.seed = seed;
  return gen_synthetic(cfg);
}

TEST(Split, SeventyThirty) {
  const Dataset d = small_synthetic(10, 3);
  const auto [train, test] = split(d, 0.7, 11);
  EXPECT_EQ(train.query_count(), 7u);
  EXPECT_EQ(test.query_count(), 3u);

  std::set<std::string> train_qids, test_qids;
  for (const Query& q : train.queries) train_qids.insert(q.qid);
  for (const Query& q : test.queries) test_qids.insert(q.qid);
  for (const std::string& qid : test_qids) {
    EXPECT_EQ(train_qids.count(qid), 0u);  // disjoint
  }
  EXPECT_EQ(train_qids.size() + test_qids.size(), 10u);  // exhaustive
}

TEST(Split, DeterministicUnderSeed) {
  const Dataset d = small_synthetic(25, 4);
  const auto [a_train, a_test] = split(d, 0.7, 42);
  const auto [b_train, b_test] = split(d, 0.7, 42);
  EXPECT_EQ(canonical_bytes(a_train), canonical_bytes(b_train));
  EXPECT_EQ(canonical_bytes(a_test), canonical_bytes(b_test));
}

TEST(Split, UnionRecoversQuerySet) {
  const Dataset d = small_synthetic(13, 5);
  const auto [train, test] = split(d, 0.4, 8);
  std::multiset<std::string> seen, expected;
  for (const Query& q : d.queries) expected.insert(q.qid);
  for (const Query& q : train.queries) seen.insert(q.qid);
  for (const Query& q : test.queries) seen.insert(q.qid);
  EXPECT_EQ(seen, expected);
}

TEST(Split, RejectsDegenerateInputs) {
  const Dataset d = small_synthetic(2, 6);
  EXPECT_THROW(split(d, 0.0, 1), InvalidConfig);
  EXPECT_THROW(split(d, 1.0, 1), InvalidConfig);
  Dataset one = d;
  one.queries.resize(1);
  EXPECT_THROW(split(one, 0.5, 1), TooFewQueries);
}

Dataset two_item_dataset(double scaled_value) {
  Dataset d;
  d.feature_count = 3;
  d.partition = FeaturePartition::contiguous(1, 1, 1);
  Query q;
  q.qid = "1";
  q.items.push_back({{0.1, 0.2, scaled_value}, 1.0});
  q.items.push_back({{0.1, -0.4, 2.0}, 0.0});
  d.queries.push_back(q);
  return d;
}

TEST(Perturb, RatingTimesTen) {
  const Dataset d = two_item_dataset(4.5);
  PerturbationSpec spec{{{2, 10.0}}};
  const Dataset out = perturb(d, spec);
  EXPECT_EQ(out.queries[0].items[0].features[2], 45.0);
  // untouched columns are bit-identical
  EXPECT_EQ(out.queries[0].items[0].features[1], 0.2);
}

TEST(Perturb, SlashCountTimesHundred) {
  const Dataset d = two_item_dataset(3.0);
  PerturbationSpec spec{{{2, 100.0}}};
  const Dataset out = perturb(d, spec);
  EXPECT_EQ(out.queries[0].items[0].features[2], 300.0);
}

TEST(Perturb, FactorOneIsBitIdentical) {
  const Dataset d = small_synthetic(8, 7);
  PerturbationSpec spec{{{d.partition.scaled_idx[0], 1.0}}};
  EXPECT_EQ(canonical_bytes(perturb(d, spec)), canonical_bytes(d));
}

TEST(Perturb, ComposesAsPositiveRealAction) {
  const Dataset d = small_synthetic(6, 8);
  const std::size_t col = d.partition.scaled_idx[0];
  const Dataset once = perturb(perturb(d, {{{col, 3.0}}}), {{{col, 7.0}}});
  const Dataset direct = perturb(d, {{{col, 21.0}}});
  for (std::size_t qi = 0; qi < d.query_count(); ++qi) {
    for (std::size_t j = 0; j < d.queries[qi].items.size(); ++j) {
      const double a = once.queries[qi].items[j].features[col];
      const double b = direct.queries[qi].items[j].features[col];
      EXPECT_NEAR(a, b, 1e-12 * std::abs(b));
    }
  }
}

TEST(Perturb, NonPositiveTargetRejected) {
  const Dataset d = two_item_dataset(0.0);
  EXPECT_THROW(perturb(d, {{{2, 10.0}}}), NonPositiveFeature);
}

TEST(Perturb, ColumnOutsideScaledSetRejected) {
  const Dataset d = two_item_dataset(1.0);
  EXPECT_THROW(perturb(d, {{{1, 10.0}}}), InvalidConfig);
  EXPECT_THROW(perturb(d, {{{2, -1.0}}}), InvalidConfig);
}

TEST(GenSynthetic, ByteIdenticalUnderFixedSeed) {
  SyntheticConfig cfg;
  cfg.n_queries = 50;
  cfg.seed = 1234;
  EXPECT_EQ(canonical_bytes(gen_synthetic(cfg)), canonical_bytes(gen_synthetic(cfg)));
}

TEST(GenSynthetic, NoiselessUtilityRecoversPerfectRanking) {
  SyntheticConfig cfg;
  cfg.n_queries = 200;
  cfg.items_per_query = 2;
  cfg.noise = 0.0;
  cfg.seed = 5;
  std::vector<Vec> utilities;
  const Dataset d = gen_synthetic(cfg, &utilities);
  ASSERT_EQ(utilities.size(), d.query_count());
  Vec per_query(d.query_count());
  for (std::size_t i = 0; i < d.query_count(); ++i) {
    per_query[i] = ndcg(d.queries[i].labels(), rank(utilities[i]), 10);
  }
  EXPECT_DOUBLE_EQ(compensated_mean(per_query), 1.0);
}

TEST(GenSynthetic, ScaledColumnsStayPositiveAtScale) {
  SyntheticConfig cfg;
  cfg.n_queries = 50000;
  cfg.items_per_query = 10;
  cfg.scaled_dims = 2;
  cfg.seed = 6;
  const Dataset d = gen_synthetic(cfg);  // one million scaled values
  std::size_t checked = 0;
  for (const Query& q : d.queries) {
    for (const Item& item : q.items) {
      for (std::size_t c : d.partition.scaled_idx) {
        ASSERT_GT(item.features[c], 0.0);
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 1000000u);
}

TEST(GenSynthetic, InvalidConfigRejected) {
  SyntheticConfig cfg;
  cfg.n_queries = 0;
  EXPECT_THROW(gen_synthetic(cfg), InvalidConfig);
  cfg.n_queries = 5;
  cfg.noise = -1.0;
  EXPECT_THROW(gen_synthetic(cfg), InvalidConfig);
}

TEST(FitStandardizer, ConstantColumnClampsToUnitStddev) {
  Dataset d = two_item_dataset(1.0);
  // column 0 (query) is constant 0.1 across both items
  const Standardizer s = fit_standardizer(d, {0});
  EXPECT_EQ(s.stddev[0], 1.0);
  EXPECT_NEAR(s.mean[0], 0.1, 1e-15);
  Vec x{0.1};
  s.apply_inplace(x);
  EXPECT_NEAR(x[0], 0.0, 1e-15);
}

TEST(FitStandardizer, PopulationConvention) {
  Dataset d;
  d.feature_count = 3;
  d.partition = FeaturePartition::contiguous(1, 1, 1);
  Query q;
  q.qid = "1";
  q.items.push_back({{0.0, 0.0, 1.0}, 1.0});
  q.items.push_back({{0.0, 2.0, 1.0}, 0.0});
  d.queries.push_back(q);
  const Standardizer s = fit_standardizer(d, {1});
  EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(s.stddev[0], 1.0);  // population, not sample
}

TEST(FitStandardizer, CentersTheTrainingSplit) {
  const Dataset d = small_synthetic(40, 9);
  const std::vector<std::size_t> cols{0, 1, 2, 3, 4};
  const Standardizer s = fit_standardizer(d, cols);
  Vec sums(cols.size(), 0.0);
  std::size_t n = 0;
  for (const Query& q : d.queries) {
    for (const Item& item : q.items) {
      Vec x = gather(item.features, cols);
      s.apply_inplace(x);
      for (std::size_t c = 0; c < cols.size(); ++c) sums[c] += x[c];
      ++n;
    }
  }
  for (double sum : sums) {
    EXPECT_NEAR(sum / static_cast<double>(n), 0.0, 1e-12);
  }
}

TEST(FitStandardizer, IgnoresTestData) {
  const Dataset d = small_synthetic(20, 10);
  auto [train, test] = split(d, 0.7, 3);
  const Standardizer before = fit_standardizer(train, {0, 1, 2});
  // mutate the test split arbitrarily
  for (Query& q : test.queries) {
    for (Item& item : q.items) {
      for (double& v : item.features) v *= 1000.0;
    }
  }
  const Standardizer after = fit_standardizer(train, {0, 1, 2});
  EXPECT_EQ(before, after);
}

TEST(FitStandardizer, EmptyDatasetRejected) {
  Dataset d;
  d.feature_count = 3;
  EXPECT_THROW(fit_standardizer(d, {0}), EmptyDataset);
}

}  // namespace
}  // namespace sirank
