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

// Post-processing comparison methods: the score-sorted ranking, FA*IR
// prefix-constrained merging, and a utility maximizer under a FaiRR floor.

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "pufr/assignment.hpp"
#include "pufr/core.hpp"
#include "pufr/metrics.hpp"

namespace pufr {

inline Ranking unfair_rank(const QueryCandidates& query) {
  const auto mu = mu_scores(query);
  return rank_by_score(query, std::span<const double>(mu));
}

// ---------------------------------------------------------------------------
// FA*IR

inline constexpr double kDefaultFairSignificance = 0.1;

// Minimum number of protected documents required in every top-k prefix.
struct MTable {
  double p = 0.0;
  double significance = kDefaultFairSignificance;
  // required[k] for k = 0..k_max; required[0] == 0.
  std::vector<int> required;

  int k_max() const { return static_cast<int>(required.size()) - 1; }
};

namespace internal {

// P(X <= m) for X ~ Binomial(k, p), 0 < p < 1.
inline double binomial_cdf(int m, int k, double p) {
  if (m < 0) return 0.0;
  if (m >= k) return 1.0;
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_k_fact = std::lgamma(k + 1.0);
  double cdf = 0.0;
  for (int i = 0; i <= m; ++i) {
    cdf += std::exp(log_k_fact - std::lgamma(i + 1.0) -
                    std::lgamma(k - i + 1.0) + i * log_p + (k - i) * log_q);
  }
  return std::min(cdf, 1.0);
}

}  // namespace internal

// required[k] is the smallest m with BinomialCDF(m; k, p) >= significance.
inline MTable compute_m_table(int k_max, double p,
                              double significance = kDefaultFairSignificance) {
  if (k_max < 1) throw Error("m-table needs k_max >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("p must lie in [0,1]");
  if (!(significance > 0.0 && significance < 1.0)) {
    throw Error("significance must lie in (0,1)");
  }
  MTable table{p, significance, std::vector<int>(k_max + 1, 0)};
  if (p == 0.0) return table;
  for (int k = 1; k <= k_max; ++k) {
    if (p == 1.0) {
      table.required[k] = k;
      continue;
    }
    // The quantile never decreases with k, so resume from the previous one.
    int m = table.required[k - 1];
    while (m < k && internal::binomial_cdf(m, k, p) < significance) ++m;
    table.required[k] = m;
  }
  return table;
}

// Greedy merge of the protected and non-protected queues, each in canonical
// mu order. A protected document is emitted when the prefix would otherwise
// fall short of the table or when it precedes the non-protected head in
// canonical order.
inline Ranking fastar_rerank(const QueryCandidates& query,
                             const MTable& table) {
  const std::size_t n = query.size();
  if (table.k_max() < static_cast<int>(n)) {
    throw Error("m-table shorter than the candidate list of query " +
                query.query_id);
  }
  const auto& cs = query.candidates;
  const auto mu = mu_scores(query);
  std::deque<std::size_t> prot, nonprot;
  for (std::size_t i : canonical_order(query, mu)) {
    switch (cs[i].group) {
      case Group::kProtected: prot.push_back(i); break;
      case Group::kNonProtected: nonprot.push_back(i); break;
      default: throw Error("document " + cs[i].doc_id + " has no group label");
    }
  }
  auto precedes = [&](std::size_t a, std::size_t b) {
    if (cs[a].mu != cs[b].mu) return cs[a].mu > cs[b].mu;
    return cs[a].original_rank < cs[b].original_rank;
  };

  Ranking ranking{query.query_id, {}};
  ranking.entries.reserve(n);
  int protected_count = 0;
  for (std::size_t pos = 1; pos <= n; ++pos) {
    bool take_protected;
    if (prot.empty()) {
      take_protected = false;
    } else if (nonprot.empty()) {
      take_protected = true;
    } else {
      take_protected = protected_count < table.required[pos] ||
                       precedes(prot.front(), nonprot.front());
    }
    auto& queue = take_protected ? prot : nonprot;
    const std::size_t i = queue.front();
    queue.pop_front();
    if (take_protected) ++protected_count;
    ranking.entries.push_back(
        {cs[i].doc_id, static_cast<double>(n - pos + 1)});
  }
  return ranking;
}

// ---------------------------------------------------------------------------
// Utility maximization under a FaiRR floor.
//
// Over the top `depth` documents by mu, find the order maximizing
//   U = sum_pos gain(doc) / log2(pos + 1)
// subject to
//   FaiRR@depth >= alpha_fairness * IdealFaiRR@depth.
// Both terms are sums over (doc, position) pairs, so the Lagrangian
// U + lambda * FaiRR is a linear assignment problem. lambda is found by
// bisection; on small windows the remaining duality gap is closed exactly by
// enumerating assignments in Lagrangian order until the bound
// U(x) <= L(x, lambda) rules out any better feasible order.

struct ConstraintConfig {
  double alpha_fairness = 0.0;
  int depth = 50;
  int bisection_steps = 64;
  double feasibility_tolerance = 1e-9;
  // lambda_max = factor * max gain (or factor when every gain is 0).
  double lambda_max_factor = 1e6;
  // Windows up to this size get exact gap closing.
  int exact_window_limit = 12;
  int max_gap_solutions = 20000;

  void validate() const {
    if (!(alpha_fairness >= 0.0 && alpha_fairness <= 1.0)) {
      throw Error("alpha_fairness must lie in [0,1]");
    }
    if (depth < 1) throw Error("depth must be >= 1");
    if (bisection_steps < 1) throw Error("bisection_steps must be >= 1");
    if (!(feasibility_tolerance >= 0.0)) {
      throw Error("feasibility tolerance must be >= 0");
    }
  }
};

struct LagrangeIterate {
  double lambda = 0.0;
  double utility = 0.0;
  double fairr = 0.0;
};

struct ConstrainedResult {
  Ranking ranking;
  bool feasible = true;
  // True when the returned order is provably the best feasible one.
  bool optimal = true;
  double lambda = 0.0;
  double utility = 0.0;
  double fairr = 0.0;
  double fairr_floor = 0.0;
  std::vector<LagrangeIterate> trace;
};

using GainMap = std::unordered_map<std::string, double>;

// Predicted mu shifted so that the smallest value inside the top-`depth`
// window becomes 0.
inline GainMap mu_gain_proxy(const QueryCandidates& query, int depth) {
  const auto unfair = unfair_rank(query);
  const std::size_t w =
      std::min<std::size_t>(static_cast<std::size_t>(depth), query.size());
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w; ++i) {
    lo = std::min(lo, unfair.entries[i].score);
  }
  GainMap gains;
  for (std::size_t i = 0; i < w; ++i) {
    gains[unfair.entries[i].doc_id] = unfair.entries[i].score - lo;
  }
  return gains;
}

namespace internal {

struct WindowProblem {
  std::vector<double> gain;
  std::vector<double> neutrality;
  std::vector<double> utility_discount;
  std::vector<double> fairness_discount;

  std::size_t size() const { return gain.size(); }

  double utility(const Assignment& a) const {
    double u = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
      u += gain[d] * utility_discount[a[d]];
    }
    return u;
  }
  double fairr(const Assignment& a) const {
    double f = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
      f += neutrality[d] * fairness_discount[a[d]];
    }
    return f;
  }
  Matrix lagrangian(double lambda) const {
    const std::size_t n = size();
    Matrix b(n, n);
    for (std::size_t d = 0; d < n; ++d) {
      for (std::size_t p = 0; p < n; ++p) {
        b(d, p) = gain[d] * utility_discount[p] +
                  lambda * neutrality[d] * fairness_discount[p];
      }
    }
    return b;
  }
};

}  // namespace internal

inline ConstrainedResult constrained_rerank(const QueryCandidates& query,
                                            const ConstraintConfig& cfg,
                                            const GainMap& gains) {
  cfg.validate();
  const auto unfair = unfair_rank(query);
  const std::size_t n = query.size();
  const std::size_t w = std::min<std::size_t>(cfg.depth, n);

  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[query.candidates[i].doc_id] = i;

  // Window documents in unfair order.
  std::vector<std::size_t> window(w);
  internal::WindowProblem prob;
  for (std::size_t r = 0; r < w; ++r) {
    window[r] = index.at(unfair.entries[r].doc_id);
    const auto& c = query.candidates[window[r]];
    auto g = gains.find(c.doc_id);
    if (g == gains.end()) throw Error("no gain for document " + c.doc_id);
    if (!std::isfinite(g->second)) {
      throw Error("non-finite gain for document " + c.doc_id);
    }
    prob.gain.push_back(g->second);
    prob.neutrality.push_back(neutrality_of(c));
    prob.utility_discount.push_back(rank_discount(r + 1));
    prob.fairness_discount.push_back(1.0 / static_cast<double>(r + 1));
  }
  std::vector<double> sorted_n = prob.neutrality;
  std::sort(sorted_n.begin(), sorted_n.end(), std::greater<>());
  const double ideal = fairr_of_sequence(sorted_n, static_cast<int>(w));

  ConstrainedResult result;
  result.fairr_floor = cfg.alpha_fairness * ideal;
  const double floor = result.fairr_floor - cfg.feasibility_tolerance;
  auto feasible = [&](const Assignment& a) { return prob.fairr(a) >= floor; };

  auto finish = [&](const Assignment& a) {
    // a: window document -> position.
    std::vector<std::size_t> at(w);
    for (std::size_t d = 0; d < w; ++d) at[a[d]] = window[d];
    result.ranking = Ranking{query.query_id, {}};
    result.ranking.entries.reserve(n);
    for (std::size_t p = 0; p < w; ++p) {
      result.ranking.entries.push_back(
          {query.candidates[at[p]].doc_id, static_cast<double>(n - p)});
    }
    for (std::size_t r = w; r < n; ++r) {
      result.ranking.entries.push_back(
          {unfair.entries[r].doc_id, static_cast<double>(n - r)});
    }
    result.utility = prob.utility(a);
    result.fairr = prob.fairr(a);
  };

  // Gain-sorted order is the unconstrained optimum.
  Assignment best(w);
  {
    std::vector<std::size_t> order(w);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return prob.gain[a] > prob.gain[b];
    });
    for (std::size_t p = 0; p < w; ++p) best[order[p]] = static_cast<int>(p);
  }
  result.trace.push_back({0.0, prob.utility(best), prob.fairr(best)});
  if (feasible(best)) {
    finish(best);
    return result;
  }

  double max_gain = 0.0;
  for (double g : prob.gain) max_gain = std::max(max_gain, std::fabs(g));
  double hi = cfg.lambda_max_factor * (max_gain > 0.0 ? max_gain : 1.0);
  Assignment hi_sol = hungarian_assign(prob.lagrangian(hi));
  result.trace.push_back({hi, prob.utility(hi_sol), prob.fairr(hi_sol)});
  if (!feasible(hi_sol)) {
    result.feasible = false;
    result.optimal = false;
    result.lambda = hi;
    finish(hi_sol);
    return result;
  }

  best = hi_sol;
  double best_utility = prob.utility(best);
  double lo = 0.0;
  for (int step = 0; step < cfg.bisection_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    Assignment sol = hungarian_assign(prob.lagrangian(mid));
    const double u = prob.utility(sol);
    result.trace.push_back({mid, u, prob.fairr(sol)});
    if (feasible(sol)) {
      hi = mid;
      if (u > best_utility) {
        best = sol;
        best_utility = u;
      }
    } else {
      lo = mid;
    }
  }
  result.lambda = hi;

  // For any feasible x: U(x) <= U(x) + hi * (FaiRR(x) - floor) = bound(x).
  result.optimal = false;
  if (static_cast<int>(w) <= cfg.exact_window_limit) {
    AssignmentRanker ranker(prob.lagrangian(hi));
    for (int i = 0; i < cfg.max_gap_solutions; ++i) {
      auto sol = ranker.next();
      if (!sol) {
        result.optimal = true;
        break;
      }
      const double u = prob.utility(*sol);
      const double bound = u + hi * (prob.fairr(*sol) - floor);
      if (bound <= best_utility + 1e-12 * (1.0 + std::fabs(best_utility))) {
        result.optimal = true;
        break;
      }
      if (feasible(*sol) && u > best_utility) {
        best = *sol;
        best_utility = u;
      }
    }
  }
  finish(best);
  return result;
}

inline ConstrainedResult constrained_rerank(const QueryCandidates& query,
                                            const ConstraintConfig& cfg) {
  return constrained_rerank(query, cfg, mu_gain_proxy(query, cfg.depth));
}

}  // namespace pufr
