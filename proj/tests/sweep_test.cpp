/*
 * Copyright 2026 The pufr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pufr/sweep.hpp"

#include <sstream>

#include "gtest/gtest.h"
#include "pufr/synthetic.hpp"

namespace pufr {
namespace {

SyntheticData Fixture(int queries = 40) {
  SyntheticConfig cfg;
  cfg.n_queries = queries;
  cfg.n_candidates = 30;
  cfg.bias_strength = 1.0;
  cfg.sigma_bias_coupling = 0.5;
  cfg.seed = 9;
  return generate_synthetic(cfg);
}

TEST(MethodTest, NamesRoundTrip) {
  for (Method m : {Method::kUnfair, Method::kPufr, Method::kUniform,
                   Method::kFastar, Method::kConstrained}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_THROW(parse_method("adv"), Error);
}

TEST(SweepTest, UnfairIsOneRecordMatchingDirectMetrics) {
  const auto data = Fixture();
  SweepConfig cfg;
  cfg.method = Method::kUnfair;
  cfg.alpha_grid = {0.0, 1.0, 2.0};
  const auto records = run_sweep(data.corpus, data.judgments, cfg);
  ASSERT_EQ(records.size(), 1u);
  double sum = 0.0;
  for (const auto& q : data.corpus) {
    sum += ndcg_at_k(unfair_rank(q), data.judgments, 10);
  }
  EXPECT_NEAR(records[0].ndcg[0].mean, sum / data.corpus.size(), 1e-12);
  for (const auto& q : data.corpus) {
    EXPECT_EQ(records[0].nfairr[0].per_query.at(q.query_id),
              nfairr_at_k(unfair_rank(q), q, 10));
  }
}

TEST(SweepTest, PufrAtZeroEqualsUnfair) {
  const auto data = Fixture();
  SweepConfig cfg;
  cfg.alpha_grid = {0.0};
  const auto pufr = run_sweep(data.corpus, data.judgments, cfg);
  cfg.method = Method::kUnfair;
  const auto unfair = run_sweep(data.corpus, data.judgments, cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(pufr[0].ndcg[i].per_query, unfair[0].ndcg[i].per_query);
    EXPECT_EQ(pufr[0].nfairr[i].per_query, unfair[0].nfairr[i].per_query);
  }
  EXPECT_EQ(pufr[0].nfairr_tests[0].p_value, 1.0);
}

TEST(SweepTest, PufrFairnessNonDecreasingAcrossRows) {
  const auto data = Fixture();
  SweepConfig cfg;
  cfg.alpha_grid = {0.0, 1.0, 2.0, 4.0};
  const auto records = run_sweep(data.corpus, data.judgments, cfg);
  ASSERT_EQ(records.size(), 4u);
  for (std::size_t i = 1; i < records.size(); ++i) {
    EXPECT_GE(records[i].nfairr[0].mean, records[i - 1].nfairr[0].mean);
  }
  EXPECT_GT(records.back().nfairr[0].mean, records.front().nfairr[0].mean);
}

TEST(SweepTest, ThreadsDoNotChangeMetrics) {
  const auto data = Fixture();
  for (Method m : {Method::kPufr, Method::kFastar, Method::kConstrained}) {
    SweepConfig cfg;
    cfg.method = m;
    cfg.alpha_grid = {0.2, 0.6};
    cfg.depth = 10;
    const auto serial = run_sweep(data.corpus, data.judgments, cfg);
    cfg.threads = 4;
    const auto parallel = run_sweep(data.corpus, data.judgments, cfg);
    for (std::size_t i = 0; i < serial.size(); ++i) {
      for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_EQ(serial[i].ndcg[c].per_query, parallel[i].ndcg[c].per_query);
        EXPECT_EQ(serial[i].nfairr[c].per_query,
                  parallel[i].nfairr[c].per_query);
      }
      EXPECT_GE(serial[i].mean_rerank_seconds, 0.0);
    }
  }
}

TEST(SweepTest, UniformDefaultsToPufrReference) {
  const auto data = Fixture(10);
  SweepConfig cfg;
  cfg.method = Method::kUniform;
  cfg.alpha_grid = {1.0};
  const auto records = run_sweep(data.corpus, data.judgments, cfg);
  EXPECT_EQ(records[0].reference, Method::kPufr);
  cfg.reference = Method::kUnfair;
  EXPECT_EQ(run_sweep(data.corpus, data.judgments, cfg)[0].reference,
            Method::kUnfair);
}

TEST(SweepTest, MissingSigmaFailsBeforeWork) {
  auto data = Fixture(5);
  data.corpus[3].candidates[2].sigma.reset();
  SweepConfig cfg;
  cfg.alpha_grid = {1.0};
  EXPECT_THROW(run_sweep(data.corpus, data.judgments, cfg), Error);
  cfg.method = Method::kFastar;
  cfg.alpha_grid = {0.3};
  EXPECT_NO_THROW(run_sweep(data.corpus, data.judgments, cfg));
}

TEST(SweepTest, ConfigValidation) {
  const auto data = Fixture(5);
  SweepConfig cfg;
  cfg.alpha_grid = {1.0, 1.0};
  EXPECT_THROW(run_sweep(data.corpus, data.judgments, cfg), Error);
  cfg.alpha_grid = {};
  EXPECT_THROW(run_sweep(data.corpus, data.judgments, cfg), Error);
  cfg.alpha_grid = {1.0};
  cfg.cutoffs_fairness = {0};
  EXPECT_THROW(run_sweep(data.corpus, data.judgments, cfg), Error);
}

TEST(SweepTest, CsvLayout) {
  const auto data = Fixture(8);
  SweepConfig cfg;
  cfg.alpha_grid = {0.5, 1.0};
  cfg.cutoffs_utility = {100, 10, 5};
  const auto records = run_sweep(data.corpus, data.judgments, cfg);
  std::ostringstream out;
  write_sweep_csv(out, cfg, records);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header,
            "method,alpha,ndcg_cut_5,ndcg_cut_10,ndcg_cut_100,nfairr10,"
            "nfairr50,rerank_time_s,t_stat,p_value");
  int rows = 0;
  while (std::getline(in, row)) {
    ++rows;
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 9);
    EXPECT_EQ(row.rfind("pufr,", 0), 0u);
  }
  EXPECT_EQ(rows, 2);
}

TEST(SweepTest, BestUnderFloor) {
  auto record = [](double ndcg, double nfairr) {
    TradeoffRecord r;
    r.ndcg = {MetricReport{{}, 0.0}, MetricReport{{}, ndcg}};
    r.nfairr = {MetricReport{{}, 0.0}, MetricReport{{}, nfairr}};
    return r;
  };
  const std::vector<TradeoffRecord> records = {
      record(0.80, 0.50), record(0.79, 0.60), record(0.75, 0.90)};
  EXPECT_EQ(best_under_ndcg_floor(records, 0.79), 1u);
  EXPECT_EQ(best_under_ndcg_floor(records, 0.70), 2u);
  EXPECT_FALSE(best_under_ndcg_floor(records, 0.9).has_value());
}

TEST(IntervalReportTest, Examples) {
  QueryCandidates q{"q", {}};
  for (int i = 0; i < 3; ++i) {
    ScoredCandidate c;
    c.doc_id = "d" + std::to_string(i);
    c.mu = 10.0 * i;
    c.sigma = 1.0;
    q.candidates.push_back(c);
  }
  assign_original_ranks(q);
  std::ostringstream out;
  report_interval_analysis(out, {q}, {1.0, 2.0});
  EXPECT_EQ(out.str(), "rank,alpha_1,alpha_2\n1,0,0\n2,0,0\n3,0,0\n");
  EXPECT_THROW(report_interval_analysis(out, {q}, {}), Error);
  EXPECT_THROW(report_interval_analysis(out, {q}, {0.0}), Error);

  const auto data = Fixture(10);
  std::ostringstream wide;
  report_interval_analysis(wide, data.corpus, {1.0, 2.0});
  std::istringstream in(wide.str());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    EXPECT_GE(std::stod(line.substr(b + 1)),
              std::stod(line.substr(a + 1, b - a - 1)));
  }
}

TEST(PerQueryCsvTest, RoundTrip) {
  const auto report = MetricReport::FromValues({{"q1", 0.25}, {"q2", 1.0 / 3}});
  std::ostringstream out;
  write_per_query_csv(out, report);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_per_query_csv(in), report.per_query);
  std::istringstream bad("query_id,value\nq1\n");
  EXPECT_THROW(parse_per_query_csv(bad), ParseError);
}

}  // namespace
}  // namespace pufr
