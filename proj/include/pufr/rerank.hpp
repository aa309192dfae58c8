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

// Uncertainty-aware fair re-ranking.
//
// Protected documents are pushed up by alpha * sigma and non-protected
// documents pushed down by alpha * sigma, each within its own confidence
// interval. Adjusted scores are clamped so that no two documents of the same
// group change their relative order:
//
//   protected,     visited by decreasing mu:  s_i = min(mu_i + a_P sigma_i,
//                                                       s_j for every earlier j)
//   non-protected, visited by increasing mu:  s_i = max(mu_i - a_N sigma_i,
//                                                       s_j for every earlier j)
//
// The list is then sorted by the adjusted scores. Clamping creates exact
// ties, which the canonical sort resolves by original rank.

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "pufr/core.hpp"

namespace pufr {

struct PufrConfig {
  double alpha_protected = 0.0;
  double alpha_nonprotected = 0.0;

  static PufrConfig Uniform(double alpha) { return {alpha, alpha}; }

  void validate() const {
    if (!(alpha_protected >= 0.0) || !(alpha_nonprotected >= 0.0)) {
      throw Error("alpha must be >= 0");
    }
  }
};

// Adjusted scores aligned with query.candidates.
using AdjustedScores = std::vector<double>;

namespace internal {

// Candidate indices by mu descending, original rank ascending.
inline std::vector<std::size_t> mu_order(const QueryCandidates& query) {
  const auto& cs = query.candidates;
  std::vector<std::size_t> order(cs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cs[a].mu != cs[b].mu) return cs[a].mu > cs[b].mu;
    return cs[a].original_rank < cs[b].original_rank;
  });
  return order;
}

template <typename SigmaFn>
AdjustedScores adjust_scores_with(const QueryCandidates& query,
                                  const PufrConfig& cfg, SigmaFn sigma) {
  cfg.validate();
  const auto& cs = query.candidates;
  for (const auto& c : cs) {
    if (c.group == Group::kUnassigned) {
      throw Error("document " + c.doc_id + " has no group label");
    }
  }
  const auto order = mu_order(query);
  AdjustedScores adjusted(cs.size());

  double cap = std::numeric_limits<double>::infinity();
  for (std::size_t i : order) {
    if (cs[i].group != Group::kProtected) continue;
    adjusted[i] = std::min(cs[i].mu + cfg.alpha_protected * sigma(cs[i]), cap);
    cap = adjusted[i];
  }
  double floor = -std::numeric_limits<double>::infinity();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t i = *it;
    if (cs[i].group != Group::kNonProtected) continue;
    adjusted[i] =
        std::max(cs[i].mu - cfg.alpha_nonprotected * sigma(cs[i]), floor);
    floor = adjusted[i];
  }
  return adjusted;
}

}  // namespace internal

inline AdjustedScores adjust_scores(const QueryCandidates& query,
                                    const PufrConfig& cfg) {
  return internal::adjust_scores_with(
      query, cfg, [](const ScoredCandidate& c) { return sigma_of(c); });
}

inline Ranking pufr_rerank(const QueryCandidates& query,
                           const PufrConfig& cfg) {
  const auto adjusted = adjust_scores(query, cfg);
  return rank_by_score(query, std::span<const double>(adjusted));
}

// Mean sigma over every (query, candidate) pair of the corpus.
inline double compute_sigma_mean(const Corpus& corpus) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& q : corpus) {
    for (const auto& c : q.candidates) {
      sum += sigma_of(c);
      ++n;
    }
  }
  if (n == 0) throw Error("sigma mean of an empty corpus");
  return sum / static_cast<double>(n);
}

// Ablation: every candidate's sigma is replaced by `sigma_mean`.
inline AdjustedScores uniform_adjust_scores(const QueryCandidates& query,
                                            double sigma_mean,
                                            const PufrConfig& cfg) {
  if (!(sigma_mean >= 0.0)) throw Error("sigma_mean must be >= 0");
  return internal::adjust_scores_with(
      query, cfg, [sigma_mean](const ScoredCandidate&) { return sigma_mean; });
}

inline Ranking uniform_rerank(const QueryCandidates& query, double sigma_mean,
                              const PufrConfig& cfg) {
  const auto adjusted = uniform_adjust_scores(query, sigma_mean, cfg);
  return rank_by_score(query, std::span<const double>(adjusted));
}

}  // namespace pufr
