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

// Utility and fairness metrics, paired significance tests and the
// uncertainty-interval overlap analysis.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "pufr/core.hpp"

namespace pufr {

// Graded relevance labels. Pairs that were never judged have grade 0.
class RelevanceJudgments {
 public:
  void set(const std::string& query_id, const std::string& doc_id,
           int grade) {
    if (grade < 0) {
      throw Error("negative relevance grade for " + query_id + "/" + doc_id);
    }
    grades_[query_id][doc_id] = grade;
  }

  int grade(const std::string& query_id, const std::string& doc_id) const {
    auto q = grades_.find(query_id);
    if (q == grades_.end()) return 0;
    auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
  }

  // Every judged grade of the query, in no particular order.
  std::vector<int> grades_for(const std::string& query_id) const {
    std::vector<int> out;
    auto q = grades_.find(query_id);
    if (q == grades_.end()) return out;
    out.reserve(q->second.size());
    for (const auto& [doc, g] : q->second) out.push_back(g);
    return out;
  }

  bool empty() const { return grades_.empty(); }
  const std::map<std::string, std::map<std::string, int>>& all() const {
    return grades_;
  }
  bool operator==(const RelevanceJudgments&) const = default;

 private:
  std::map<std::string, std::map<std::string, int>> grades_;
};

using NeutralityMap = std::unordered_map<std::string, double>;

inline NeutralityMap neutrality_map(const QueryCandidates& query) {
  NeutralityMap m;
  for (const auto& c : query.candidates) m[c.doc_id] = neutrality_of(c);
  return m;
}

inline double rank_discount(std::size_t rank) {
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

inline double ndcg_at_k(const Ranking& ranking,
                        const RelevanceJudgments& judgments, int k) {
  if (k < 1) throw Error("cutoff must be >= 1");
  const std::size_t depth = std::min<std::size_t>(k, ranking.entries.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    dcg += judgments.grade(ranking.query_id, ranking.entries[i].doc_id) *
           rank_discount(i + 1);
  }
  auto ideal_grades = judgments.grades_for(ranking.query_id);
  std::sort(ideal_grades.begin(), ideal_grades.end(), std::greater<>());
  double ideal = 0.0;
  for (std::size_t i = 0;
       i < std::min<std::size_t>(k, ideal_grades.size()); ++i) {
    ideal += ideal_grades[i] * rank_discount(i + 1);
  }
  return ideal > 0.0 ? dcg / ideal : 0.0;
}

inline double fairr_at_k(const Ranking& ranking,
                         const NeutralityMap& neutrality, int k) {
  if (k < 1) throw Error("cutoff must be >= 1");
  const std::size_t depth = std::min<std::size_t>(k, ranking.entries.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    const auto& doc = ranking.entries[i].doc_id;
    auto it = neutrality.find(doc);
    if (it == neutrality.end()) {
      throw Error("missing neutrality for document " + doc);
    }
    sum += it->second / static_cast<double>(i + 1);
  }
  return sum;
}

// FaiRR of neutralities placed in the given order.
inline double fairr_of_sequence(std::span<const double> neutralities, int k) {
  const std::size_t depth = std::min<std::size_t>(k, neutralities.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    sum += neutralities[i] / static_cast<double>(i + 1);
  }
  return sum;
}

// Highest attainable FaiRR: neutralities sorted descending.
inline double ideal_fairr_at_k(const QueryCandidates& query, int k) {
  if (k < 1) throw Error("cutoff must be >= 1");
  std::vector<double> n;
  n.reserve(query.size());
  for (const auto& c : query.candidates) n.push_back(neutrality_of(c));
  std::sort(n.begin(), n.end(), std::greater<>());
  return fairr_of_sequence(n, k);
}

// FaiRR normalised by the ideal; 1 when the ideal is 0.
inline double nfairr_at_k(const Ranking& ranking, const QueryCandidates& query,
                          int k) {
  const double ideal = ideal_fairr_at_k(query, k);
  if (ideal <= 0.0) return 1.0;
  return fairr_at_k(ranking, neutrality_map(query), k) / ideal;
}

struct MetricReport {
  std::map<std::string, double> per_query;
  double mean = 0.0;

  static MetricReport FromValues(std::map<std::string, double> values) {
    MetricReport r{std::move(values), 0.0};
    if (!r.per_query.empty()) {
      double s = 0.0;
      for (const auto& [q, v] : r.per_query) s += v;
      r.mean = s / static_cast<double>(r.per_query.size());
    }
    return r;
  }
};

struct TTestResult {
  double t_statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
};

// Two-tailed paired t-test on per-query values of two systems.
inline TTestResult paired_t_test(const std::map<std::string, double>& a,
                                 const std::map<std::string, double>& b) {
  if (a.size() != b.size()) throw Error("t-test: query sets differ");
  std::vector<double> d;
  d.reserve(a.size());
  for (const auto& [q, va] : a) {
    auto it = b.find(q);
    if (it == b.end()) throw Error("t-test: query " + q + " missing in b");
    d.push_back(va - it->second);
  }
  if (d.size() < 2) throw Error("t-test needs at least two queries");
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));

  TTestResult r;
  r.degrees_of_freedom = static_cast<int>(d.size()) - 1;
  // Differences that are constant up to rounding count as zero variance.
  if (sd <= 1e-14 * std::fabs(mean) || sd == 0.0) {
    if (mean == 0.0) {
      r.t_statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.t_statistic = mean > 0 ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  r.t_statistic = mean / (sd / std::sqrt(n));
  boost::math::students_t dist(static_cast<double>(r.degrees_of_freedom));
  r.p_value = std::min(
      1.0, 2.0 * boost::math::cdf(boost::math::complement(
                     dist, std::fabs(r.t_statistic))));
  return r;
}

// For the document at each mu-rank, the number of other documents whose
// interval [mu - alpha sigma, mu + alpha sigma] overlaps its own.
inline std::vector<int> intersection_counts(const QueryCandidates& query,
                                            double alpha) {
  const auto& cs = query.candidates;
  const std::size_t n = cs.size();
  std::vector<std::size_t> by_rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = cs[i].original_rank;
    if (r < 1 || static_cast<std::size_t>(r) > n) {
      throw Error("invalid original rank in query " + query.query_id);
    }
    by_rank[r - 1] = i;
  }
  std::vector<double> lo(n), hi(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& c = cs[by_rank[r]];
    lo[r] = c.mu - alpha * sigma_of(c);
    hi[r] = c.mu + alpha * sigma_of(c);
  }
  std::vector<int> counts(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (std::max(lo[a], lo[b]) <= std::min(hi[a], hi[b])) {
        ++counts[a];
        ++counts[b];
      }
    }
  }
  return counts;
}

// Per rank, the median intersection count over the queries that have that
// rank. Even-sized samples take the lower middle element.
inline std::vector<double> median_intersections(const Corpus& corpus,
                                                double alpha) {
  if (corpus.empty()) throw Error("median intersections of empty corpus");
  std::vector<std::vector<int>> per_rank;
  for (const auto& q : corpus) {
    const auto counts = intersection_counts(q, alpha);
    if (counts.size() > per_rank.size()) per_rank.resize(counts.size());
    for (std::size_t r = 0; r < counts.size(); ++r) {
      per_rank[r].push_back(counts[r]);
    }
  }
  std::vector<double> medians;
  medians.reserve(per_rank.size());
  for (auto& v : per_rank) {
    const std::size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    medians.push_back(v[mid]);
  }
  return medians;
}

}  // namespace pufr
