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

#include "pufr/metrics.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace pufr {
namespace {

Ranking RankingOf(std::vector<std::string> ids) {
  Ranking r{"q", {}};
  double s = static_cast<double>(ids.size());
  for (auto& id : ids) r.entries.push_back({std::move(id), s--});
  return r;
}

QueryCandidates WithNeutrality(std::vector<double> ns) {
  QueryCandidates q{"q", {}};
  for (std::size_t i = 0; i < ns.size(); ++i) {
    ScoredCandidate c;
    c.doc_id = "d" + std::to_string(i);
    c.mu = -static_cast<double>(i);
    c.neutrality = Neutrality(ns[i]);
    q.candidates.push_back(c);
  }
  assign_original_ranks(q);
  return q;
}

TEST(NdcgTest, Examples) {
  RelevanceJudgments j;
  j.set("q", "a", 1);
  EXPECT_NEAR(ndcg_at_k(RankingOf({"a", "b"}), j, 2), 1.0, 1e-12);
  EXPECT_NEAR(ndcg_at_k(RankingOf({"b", "a"}), j, 2), 1.0 / std::log2(3.0),
              1e-12);
  EXPECT_NEAR(ndcg_at_k(RankingOf({"b", "a"}), j, 2), 0.6309297535714574,
              1e-12);
  RelevanceJudgments zero;
  zero.set("q", "a", 0);
  EXPECT_EQ(ndcg_at_k(RankingOf({"a", "b"}), zero, 2), 0.0);
  EXPECT_EQ(ndcg_at_k(RankingOf({"a", "b"}), RelevanceJudgments{}, 2), 0.0);
  EXPECT_THROW(ndcg_at_k(RankingOf({"a"}), j, 0), Error);
}

TEST(NdcgTest, MatchesHighPrecisionOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> grade(0, 3);
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + t % 12;
    RelevanceJudgments j;
    std::vector<std::string> ids;
    std::vector<int> ranked, pool;
    for (int i = 0; i < n; ++i) {
      ids.push_back("d" + std::to_string(i));
      const int g = grade(rng);
      ranked.push_back(g);
      pool.push_back(g);
      j.set("q", ids.back(), g);
    }
    // Some judged documents never get retrieved.
    const int extra = t % 3;
    for (int i = 0; i < extra; ++i) {
      const int g = 1 + grade(rng);
      pool.push_back(g);
      j.set("q", "x" + std::to_string(i), g);
    }
    for (int k : {1, 3, 5, 10, 100}) {
      EXPECT_NEAR(ndcg_at_k(RankingOf(ids), j, k),
                  testing::ndcg_oracle(ranked, pool, k), 1e-12);
    }
  }
}

TEST(FairrTest, Examples) {
  const NeutralityMap n{{"a", 1.0}, {"b", 0.5}, {"c", 0.0}};
  EXPECT_NEAR(fairr_at_k(RankingOf({"a", "b", "c"}), n, 3), 1.25, 1e-12);
  const NeutralityMap zeros{{"a", 0.0}, {"b", 0.0}};
  EXPECT_EQ(fairr_at_k(RankingOf({"a", "b"}), zeros, 2), 0.0);
  const NeutralityMap one{{"a", 0.7}, {"b", 1.0}};
  EXPECT_NEAR(fairr_at_k(RankingOf({"a", "b"}), one, 1), 0.7, 1e-12);
}

TEST(FairrTest, MissingNeutralityNamesTheDocument) {
  try {
    fairr_at_k(RankingOf({"a", "zz"}), {{"a", 1.0}}, 2);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
  }
}

TEST(FairrTest, DocumentsBeyondCutoffDoNotMatter) {
  NeutralityMap n{{"a", 0.3}, {"b", 0.9}, {"c", 0.1}, {"d", 1.0}};
  const double f = fairr_at_k(RankingOf({"a", "b"}), n, 2);
  EXPECT_EQ(fairr_at_k(RankingOf({"a", "b", "c", "d"}), n, 2), f);
  EXPECT_EQ(fairr_at_k(RankingOf({"a", "b", "d", "c"}), n, 2), f);
}

TEST(IdealFairrTest, Examples) {
  EXPECT_NEAR(ideal_fairr_at_k(WithNeutrality({0.0, 1.0, 0.5}), 3), 1.25,
              1e-12);
  EXPECT_NEAR(ideal_fairr_at_k(WithNeutrality({0.4, 0.4, 0.4, 0.4}), 4),
              0.4 * (1.0 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4), 1e-12);
  EXPECT_NEAR(ideal_fairr_at_k(WithNeutrality({0.3}), 10), 0.3, 1e-12);
}

TEST(NfairrTest, Examples) {
  const auto q = WithNeutrality({0.0, 0.5, 1.0});
  EXPECT_NEAR(nfairr_at_k(RankingOf({"d2", "d1", "d0"}), q, 3), 1.0, 1e-12);
  EXPECT_NEAR(nfairr_at_k(RankingOf({"d0", "d1", "d2"}), q, 3),
              (0.0 + 0.25 + 1.0 / 3.0) / 1.25, 1e-12);
  EXPECT_NEAR(nfairr_at_k(RankingOf({"d0", "d1", "d2"}), q, 3),
              0.4666666666666667, 1e-12);
  EXPECT_EQ(nfairr_at_k(RankingOf({"d0", "d1"}), WithNeutrality({0, 0}), 2),
            1.0);
}

TEST(NfairrTest, BoundsAndNeutralityOrderIsIdeal) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 30;
    std::vector<double> ns;
    for (int i = 0; i < n; ++i) ns.push_back(u(rng) < 0.3 ? 1.0 : u(rng));
    const auto q = WithNeutrality(ns);
    std::vector<std::string> ids;
    for (const auto& c : q.candidates) ids.push_back(c.doc_id);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<std::string> by_neutrality = ids;
    std::stable_sort(by_neutrality.begin(), by_neutrality.end(),
                     [&](const auto& a, const auto& b) {
                       return ns[std::stoi(a.substr(1))] >
                              ns[std::stoi(b.substr(1))];
                     });
    for (int k : {1, 5, 10, 50}) {
      const double v = nfairr_at_k(RankingOf(ids), q, k);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
      EXPECT_NEAR(nfairr_at_k(RankingOf(by_neutrality), q, k), 1.0, 1e-12);
    }
  }
}

std::map<std::string, double> PerQuery(std::vector<double> v) {
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < v.size(); ++i) m["q" + std::to_string(i)] = v[i];
  return m;
}

TEST(TTestTest, Examples) {
  const auto r = paired_t_test(PerQuery({1, 2, 3}), PerQuery({0, 0, 0}));
  EXPECT_NEAR(r.t_statistic, 2.0 / (1.0 / std::sqrt(3.0)), 1e-12);
  EXPECT_EQ(r.degrees_of_freedom, 2);
  EXPECT_NEAR(r.p_value, 0.0742, 1e-3);
  // Closed form for two degrees of freedom: p = 1 - t / sqrt(t^2 + 2).
  const double t = r.t_statistic;
  EXPECT_NEAR(r.p_value, 1.0 - t / std::sqrt(t * t + 2.0), 1e-12);

  const auto same = paired_t_test(PerQuery({0.3, 0.5}), PerQuery({0.3, 0.5}));
  EXPECT_EQ(same.t_statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);

  const auto shift =
      paired_t_test(PerQuery({0.4, 0.6, 0.9}), PerQuery({0.3, 0.5, 0.8}));
  EXPECT_EQ(shift.p_value, 0.0);
}

TEST(TTestTest, SymmetryAndErrors) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a, b;
    for (int i = 0; i < 2 + t; ++i) {
      a.push_back(z(rng));
      b.push_back(z(rng));
    }
    const auto ab = paired_t_test(PerQuery(a), PerQuery(b));
    const auto ba = paired_t_test(PerQuery(b), PerQuery(a));
    EXPECT_DOUBLE_EQ(ab.t_statistic, -ba.t_statistic);
    EXPECT_DOUBLE_EQ(ab.p_value, ba.p_value);
    EXPECT_GE(ab.p_value, 0.0);
    EXPECT_LE(ab.p_value, 1.0);
  }
  EXPECT_THROW(paired_t_test(PerQuery({1, 2}), PerQuery({1, 2, 3})), Error);
  EXPECT_THROW(paired_t_test({{"a", 1}, {"b", 2}}, {{"a", 1}, {"c", 2}}),
               Error);
  EXPECT_THROW(paired_t_test(PerQuery({1}), PerQuery({2})), Error);
}

TEST(MetricReportTest, MeanOfPerQueryValues) {
  const auto r = MetricReport::FromValues(PerQuery({0.5, 1.0, 0.0}));
  EXPECT_DOUBLE_EQ(r.mean, 0.5);
  EXPECT_EQ(r.per_query.size(), 3u);
}

QueryCandidates Intervals(std::vector<double> mu, std::vector<double> sigma) {
  QueryCandidates q{"q", {}};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    ScoredCandidate c;
    c.doc_id = "d" + std::to_string(i);
    c.mu = mu[i];
    c.sigma = sigma[i];
    q.candidates.push_back(c);
  }
  assign_original_ranks(q);
  return q;
}

TEST(IntersectionTest, Examples) {
  EXPECT_EQ(intersection_counts(Intervals({0, 10}, {1, 1}), 1.0),
            (std::vector<int>{0, 0}));
  EXPECT_EQ(intersection_counts(Intervals({0, 1}, {1, 1}), 1.0),
            (std::vector<int>{1, 1}));
  EXPECT_EQ(intersection_counts(Intervals({2, 2}, {0, 1}), 1.0),
            (std::vector<int>{1, 1}));
  // Touching endpoints overlap.
  EXPECT_EQ(intersection_counts(Intervals({0, 2}, {1, 1}), 1.0),
            (std::vector<int>{1, 1}));
}

TEST(IntersectionTest, MatchesPairwiseScanByRank) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    auto q = testing::random_query(rng, 1 + t % 25);
    const auto counts = intersection_counts(q, 1.5);
    for (const auto& a : q.candidates) {
      int expected = 0;
      for (const auto& b : q.candidates) {
        if (&a == &b) continue;
        const double lo = std::max(a.mu - 1.5 * *a.sigma, b.mu - 1.5 * *b.sigma);
        const double hi = std::min(a.mu + 1.5 * *a.sigma, b.mu + 1.5 * *b.sigma);
        expected += lo <= hi;
      }
      EXPECT_EQ(counts[a.original_rank - 1], expected);
    }
    const auto wider = intersection_counts(q, 3.0);
    for (std::size_t r = 0; r < counts.size(); ++r) {
      EXPECT_GE(wider[r], counts[r]);
    }
  }
}

TEST(MedianIntersectionsTest, Examples) {
  const auto single = Intervals({0, 1, 5}, {1, 1, 0.1});
  EXPECT_EQ(median_intersections({single}, 1.0),
            (std::vector<double>{0, 1, 1}));

  // Rank-1 counts 0, 2 and 4 across three queries.
  const Corpus odd = {Intervals({9, 0, 1, 2, 3}, {0.1, 0, 0, 0, 0}),
                      Intervals({9, 8.5, 8, 1, 0}, {1, 0, 0, 0, 0}),
                      Intervals({9, 8.9, 8.8, 8.7, 8.6}, {1, 0, 0, 0, 0})};
  EXPECT_EQ(median_intersections(odd, 1.0)[0], 2.0);

  // Rank-1 counts 1 and 3.
  const Corpus even = {Intervals({9, 8.5, 0}, {1, 0, 0}),
                       Intervals({9, 8.9, 8.8, 8.7}, {1, 0, 0, 0})};
  const auto medians = median_intersections(even, 1.0);
  EXPECT_EQ(medians[0], 1.0);
  EXPECT_EQ(medians.size(), 4u);
  EXPECT_THROW(median_intersections(Corpus{}, 1.0), Error);
}

}  // namespace
}  // namespace pufr
