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

// Synthetic corpora with known structure.
//
// Each document has a latent relevance r ~ N(0,1); its grade is 1 when
// r > relevance_threshold. The predicted score is
//   mu = mu_mean + mu_spread * (rho * r + sqrt(1 - rho^2) * noise) + bump
// where bump = bias_strength * mu_spread * U(0,1) for non-protected documents
// and 0 for protected ones. The predictive deviation is
//   sigma = sigma_base * exp(sigma_spread * N(0,1)) + sigma_bias_coupling * bump
// optionally scaled by (1 + sigma_rank_growth * (rank - 1) / (n - 1)).
// With noise_tracks_sigma the noise term of mu becomes sigma * N(0,1), so each
// document's sigma is the true spread of its score around
// mu_mean + mu_spread * rho * r + bump.
// Protected documents have neutrality 1, the others U[0,1).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "pufr/core.hpp"
#include "pufr/metrics.hpp"

namespace pufr {

struct SyntheticConfig {
  int n_queries = 200;
  int n_candidates = 50;
  double mu_mean = 0.0;
  double mu_spread = 1.0;
  double sigma_base = 0.3;
  double sigma_spread = 0.3;
  double sigma_bias_coupling = 0.0;
  double sigma_rank_growth = 0.0;
  double protected_fraction = 0.3;
  double relevance_correlation = 0.7;
  double relevance_threshold = 1.0;
  double bias_strength = 0.0;
  bool noise_tracks_sigma = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_queries < 1 || n_candidates < 1) {
      throw Error("synthetic corpus needs at least one query and candidate");
    }
    if (!(protected_fraction >= 0.0 && protected_fraction <= 1.0)) {
      throw Error("protected_fraction must lie in [0,1]");
    }
    if (!(relevance_correlation >= 0.0 && relevance_correlation <= 1.0)) {
      throw Error("relevance_correlation must lie in [0,1]");
    }
    if (!(mu_spread >= 0.0) || !(sigma_base >= 0.0) ||
        !(sigma_spread >= 0.0) || !(sigma_bias_coupling >= 0.0) ||
        !(sigma_rank_growth >= 0.0) || !(bias_strength >= 0.0)) {
      throw Error("synthetic spreads and strengths must be >= 0");
    }
  }
};

struct SyntheticData {
  Corpus corpus;
  RelevanceJudgments judgments;
};

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  // generate_canonical may round up to 1.0.
  const double below_one = std::nextafter(1.0, 0.0);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double rho = cfg.relevance_correlation;
  const double noise_weight = std::sqrt(1.0 - rho * rho);

  SyntheticData data;
  data.corpus.reserve(cfg.n_queries);
  for (int q = 0; q < cfg.n_queries; ++q) {
    QueryCandidates query{"q" + std::to_string(q), {}};
    query.candidates.reserve(cfg.n_candidates);
    for (int i = 0; i < cfg.n_candidates; ++i) {
      ScoredCandidate c;
      c.doc_id = query.query_id + "d" + std::to_string(i);
      const double relevance = normal(rng);
      const double noise = normal(rng);
      const bool is_protected = uniform(rng) < cfg.protected_fraction;
      const double bump =
          is_protected ? 0.0
                       : cfg.bias_strength * cfg.mu_spread * uniform(rng);
      const double sigma =
          cfg.sigma_base * std::exp(cfg.sigma_spread * normal(rng)) +
          cfg.sigma_bias_coupling * bump;
      c.mu = cfg.noise_tracks_sigma
                 ? cfg.mu_mean + cfg.mu_spread * rho * relevance +
                       sigma * noise + bump
                 : cfg.mu_mean +
                       cfg.mu_spread * (rho * relevance + noise_weight * noise) +
                       bump;
      c.sigma = sigma;
      c.neutrality = Neutrality(
          is_protected ? 1.0 : std::min(uniform(rng), below_one));
      c.group = is_protected ? Group::kProtected : Group::kNonProtected;
      if (relevance > cfg.relevance_threshold) {
        data.judgments.set(query.query_id, c.doc_id, 1);
      }
      query.candidates.push_back(std::move(c));
    }
    assign_original_ranks(query);
    if (cfg.sigma_rank_growth > 0.0 && cfg.n_candidates > 1) {
      for (auto& c : query.candidates) {
        const double depth = static_cast<double>(c.original_rank - 1) /
                             static_cast<double>(cfg.n_candidates - 1);
        c.sigma = *c.sigma * (1.0 + cfg.sigma_rank_growth * depth);
      }
    }
    data.corpus.push_back(std::move(query));
  }
  return data;
}

}  // namespace pufr
