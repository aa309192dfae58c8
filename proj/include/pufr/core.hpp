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

// Domain types shared by every module: candidates, groups, rankings and the
// canonical score sort with original-rank tie-breaking.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace pufr {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Neutrality of a document in [0, 1]; 1 means free of the targeted bias.
class Neutrality {
 public:
  explicit Neutrality(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw Error("neutrality score out of [0,1]: " + std::to_string(value));
    }
  }
  double value() const { return value_; }
  friend bool operator==(Neutrality a, Neutrality b) = default;

 private:
  double value_;
};

enum class Group : std::uint8_t { kUnassigned, kProtected, kNonProtected };

inline constexpr double kDefaultProtectedThreshold = 1.0;

struct ScoredCandidate {
  std::string doc_id;
  double mu = 0.0;
  // Predictive standard deviation; absent until an uncertainty source is
  // attached.
  std::optional<double> sigma;
  std::optional<Neutrality> neutrality;
  Group group = Group::kUnassigned;
  // 1-based rank under mu descending, doc_id ascending on ties.
  int original_rank = 0;

  bool operator==(const ScoredCandidate&) const = default;
};

struct QueryCandidates {
  std::string query_id;
  std::vector<ScoredCandidate> candidates;

  std::size_t size() const { return candidates.size(); }
  bool operator==(const QueryCandidates&) const = default;
};

using Corpus = std::vector<QueryCandidates>;

struct RankedEntry {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const RankedEntry&) const = default;
};

struct Ranking {
  std::string query_id;
  std::vector<RankedEntry> entries;

  std::vector<std::string> doc_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.doc_id);
    return ids;
  }
  bool operator==(const Ranking&) const = default;
};

inline double sigma_of(const ScoredCandidate& c) {
  if (!c.sigma) throw Error("missing sigma for document " + c.doc_id);
  return *c.sigma;
}

inline double neutrality_of(const ScoredCandidate& c) {
  if (!c.neutrality) {
    throw Error("missing neutrality for document " + c.doc_id);
  }
  return c.neutrality->value();
}

// Recomputes original_rank from mu descending with doc_id as tie-break.
inline void assign_original_ranks(QueryCandidates& query) {
  auto& cs = query.candidates;
  std::vector<std::size_t> order(cs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cs[a].mu != cs[b].mu) return cs[a].mu > cs[b].mu;
    return cs[a].doc_id < cs[b].doc_id;
  });
  for (std::size_t r = 0; r < order.size(); ++r) {
    cs[order[r]].original_rank = static_cast<int>(r + 1);
  }
}

// Checks the structural invariants of a query: non-empty, unique doc ids,
// finite scores, sigma >= 0 and original ranks forming 1..n.
inline void validate(const QueryCandidates& query) {
  if (query.candidates.empty()) {
    throw Error("query " + query.query_id + " has no candidates");
  }
  std::unordered_set<std::string_view> seen;
  std::vector<char> rank_seen(query.size() + 1, 0);
  for (const auto& c : query.candidates) {
    if (!seen.insert(c.doc_id).second) {
      throw Error("duplicate document " + c.doc_id + " in query " +
                  query.query_id);
    }
    if (!std::isfinite(c.mu)) {
      throw Error("non-finite score for document " + c.doc_id);
    }
    if (c.sigma && !(*c.sigma >= 0.0 && std::isfinite(*c.sigma))) {
      throw Error("invalid sigma for document " + c.doc_id);
    }
    if (c.original_rank < 1 ||
        c.original_rank > static_cast<int>(query.size()) ||
        rank_seen[c.original_rank]) {
      throw Error("original ranks of query " + query.query_id +
                  " are not a permutation of 1..n");
    }
    rank_seen[c.original_rank] = 1;
  }
}

// Protected iff neutrality >= protected_threshold.
inline QueryCandidates assign_groups(
    QueryCandidates query,
    double protected_threshold = kDefaultProtectedThreshold) {
  for (auto& c : query.candidates) {
    c.group = neutrality_of(c) >= protected_threshold ? Group::kProtected
                                                      : Group::kNonProtected;
  }
  return query;
}

inline void check_protected_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error("protected threshold must lie in (0,1]");
  }
}

// Candidate indices in canonical order: score descending, original_rank
// ascending on ties.
inline std::vector<std::size_t> canonical_order(const QueryCandidates& query,
                                                std::span<const double> scores) {
  if (scores.size() != query.size()) {
    throw Error("score vector length does not match candidate count");
  }
  std::vector<std::size_t> order(query.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& cs = query.candidates;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return cs[a].original_rank < cs[b].original_rank;
  });
  return order;
}

// `scores` is aligned with query.candidates.
inline Ranking rank_by_score(const QueryCandidates& query,
                             std::span<const double> scores) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) {
      throw Error("NaN score for document " + query.candidates[i].doc_id);
    }
  }
  const auto order = canonical_order(query, scores);
  Ranking ranking{query.query_id, {}};
  ranking.entries.reserve(order.size());
  for (std::size_t i : order) {
    ranking.entries.push_back({query.candidates[i].doc_id, scores[i]});
  }
  return ranking;
}

inline Ranking rank_by_score(
    const QueryCandidates& query,
    const std::unordered_map<std::string, double>& scores) {
  std::vector<double> aligned;
  aligned.reserve(query.size());
  for (const auto& c : query.candidates) {
    auto it = scores.find(c.doc_id);
    if (it == scores.end()) {
      throw Error("no score for document " + c.doc_id);
    }
    aligned.push_back(it->second);
  }
  return rank_by_score(query, std::span<const double>(aligned));
}

inline std::vector<double> mu_scores(const QueryCandidates& query) {
  std::vector<double> mu;
  mu.reserve(query.size());
  for (const auto& c : query.candidates) mu.push_back(c.mu);
  return mu;
}

// 64-bit FNV-1a; stable across platforms, used to derive per-query seeds.
inline std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pufr
