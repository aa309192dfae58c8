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

// Trade-off sweeps: re-rank a corpus with one method over a grid of alpha
// values, evaluate utility and fairness at several cutoffs, time the
// re-ranking step, and compare against a reference method with paired
// t-tests.
//
// The meaning of alpha depends on the method:
//   pufr, uniform  score shift in units of sigma (both groups)
//   fastar         target protected proportion p of the m-table
//   constrained    nFaiRR floor of the window
//   unfair         ignored; a single record is produced

#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "pufr/baselines.hpp"
#include "pufr/core.hpp"
#include "pufr/io.hpp"
#include "pufr/metrics.hpp"
#include "pufr/rerank.hpp"

namespace pufr {

enum class Method { kUnfair, kPufr, kUniform, kFastar, kConstrained };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kUnfair: return "unfair";
    case Method::kPufr: return "pufr";
    case Method::kUniform: return "uniform";
    case Method::kFastar: return "fastar";
    case Method::kConstrained: return "constrained";
  }
  return "unknown";
}

inline Method parse_method(std::string_view name) {
  for (Method m : {Method::kUnfair, Method::kPufr, Method::kUniform,
                   Method::kFastar, Method::kConstrained}) {
    if (method_name(m) == name) return m;
  }
  throw Error("unknown method '" + std::string(name) + "'");
}

inline bool needs_sigma(Method m) {
  return m == Method::kPufr || m == Method::kUniform;
}

struct SweepConfig {
  Method method = Method::kPufr;
  std::vector<double> alpha_grid{0.0};
  std::vector<int> cutoffs_utility{10, 100};
  std::vector<int> cutoffs_fairness{10, 50};
  int depth = 50;
  double fair_significance = kDefaultFairSignificance;
  // Defaults to pufr for the uniform ablation and to unfair otherwise.
  std::optional<Method> reference;
  int threads = 1;

  Method reference_method() const {
    if (reference) return *reference;
    return method == Method::kUniform ? Method::kPufr : Method::kUnfair;
  }

  void validate() const {
    if (alpha_grid.empty()) throw Error("alpha grid is empty");
    for (std::size_t i = 1; i < alpha_grid.size(); ++i) {
      if (!(alpha_grid[i] > alpha_grid[i - 1])) {
        throw Error("alpha grid must be strictly increasing");
      }
    }
    if (cutoffs_utility.empty() || cutoffs_fairness.empty()) {
      throw Error("cutoff lists must be non-empty");
    }
    for (int k : cutoffs_utility) {
      if (k < 1) throw Error("cutoffs must be >= 1");
    }
    for (int k : cutoffs_fairness) {
      if (k < 1) throw Error("cutoffs must be >= 1");
    }
    if (depth < 1) throw Error("depth must be >= 1");
    if (threads < 1) throw Error("threads must be >= 1");
  }
};

struct TradeoffRecord {
  Method method = Method::kUnfair;
  double alpha = 0.0;
  // Aligned with the sorted cutoff lists of the config.
  std::vector<MetricReport> ndcg;
  std::vector<MetricReport> nfairr;
  double mean_rerank_seconds = 0.0;
  Method reference = Method::kUnfair;
  std::vector<TTestResult> ndcg_tests;
  std::vector<TTestResult> nfairr_tests;
  int infeasible_queries = 0;
};

// Runs fn(i) for i in [0, n) on `threads` workers with a static partition.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t t = std::min<std::size_t>(threads, n);
  for (std::size_t w = 0; w < t; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += t) fn(i);
    });
  }
  for (auto& th : workers) th.join();
}

// Re-ranks every query of a corpus with one method and setting.
class Reranker {
 public:
  Reranker(const Corpus& corpus, const SweepConfig& cfg) : cfg_(cfg) {
    std::size_t longest = 0;
    for (const auto& q : corpus) longest = std::max(longest, q.size());
    longest_ = static_cast<int>(std::max<std::size_t>(longest, 1));
    if (needs_sigma(cfg.method) || needs_sigma(cfg.reference_method())) {
      sigma_mean_ = compute_sigma_mean(corpus);
    }
  }

  struct Output {
    Ranking ranking;
    bool infeasible = false;
  };

  // Tables are built here, outside the per-query timing.
  void prepare(Method method, double alpha) {
    if (method == Method::kFastar) {
      table_ = compute_m_table(longest_, alpha, cfg_.fair_significance);
    }
  }

  Output run(Method method, double alpha, const QueryCandidates& q) const {
    switch (method) {
      case Method::kUnfair: return {unfair_rank(q)};
      case Method::kPufr: return {pufr_rerank(q, PufrConfig::Uniform(alpha))};
      case Method::kUniform:
        return {uniform_rerank(q, sigma_mean_, PufrConfig::Uniform(alpha))};
      case Method::kFastar: return {fastar_rerank(q, table_)};
      case Method::kConstrained: {
        ConstraintConfig cc;
        cc.alpha_fairness = alpha;
        cc.depth = cfg_.depth;
        auto r = constrained_rerank(q, cc);
        return {std::move(r.ranking), !r.feasible};
      }
    }
    throw Error("unknown method");
  }

  double sigma_mean() const { return sigma_mean_; }

 private:
  SweepConfig cfg_;
  int longest_ = 1;
  double sigma_mean_ = 0.0;
  MTable table_;
};

namespace internal {

struct Evaluation {
  std::vector<MetricReport> ndcg;
  std::vector<MetricReport> nfairr;
  double mean_seconds = 0.0;
  int infeasible = 0;
};

inline Evaluation evaluate_method(const Corpus& corpus,
                                  const RelevanceJudgments& judgments,
                                  const SweepConfig& cfg, Reranker& reranker,
                                  Method method, double alpha) {
  reranker.prepare(method, alpha);
  const std::size_t n = corpus.size();
  std::vector<Ranking> rankings(n);
  std::vector<double> seconds(n, 0.0);
  std::vector<char> infeasible(n, 0);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    auto out = reranker.run(method, alpha, corpus[i]);
    const auto stop = std::chrono::steady_clock::now();
    seconds[i] = std::chrono::duration<double>(stop - start).count();
    rankings[i] = std::move(out.ranking);
    infeasible[i] = out.infeasible;
  });

  Evaluation ev;
  for (int k : cfg.cutoffs_utility) {
    std::map<std::string, double> values;
    for (const auto& r : rankings) {
      values[r.query_id] = ndcg_at_k(r, judgments, k);
    }
    ev.ndcg.push_back(MetricReport::FromValues(std::move(values)));
  }
  for (int k : cfg.cutoffs_fairness) {
    std::map<std::string, double> values;
    for (std::size_t i = 0; i < n; ++i) {
      values[corpus[i].query_id] = nfairr_at_k(rankings[i], corpus[i], k);
    }
    ev.nfairr.push_back(MetricReport::FromValues(std::move(values)));
  }
  double total = 0.0;
  for (double s : seconds) total += s;
  ev.mean_seconds = n ? total / static_cast<double>(n) : 0.0;
  for (char f : infeasible) ev.infeasible += f;
  return ev;
}

inline std::vector<TTestResult> compare(const std::vector<MetricReport>& a,
                                        const std::vector<MetricReport>& b) {
  std::vector<TTestResult> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].per_query.size() < 2) {
      out.push_back(TTestResult{0.0, 0, 1.0});
    } else {
      out.push_back(paired_t_test(a[i].per_query, b[i].per_query));
    }
  }
  return out;
}

}  // namespace internal

inline void check_corpus_for(const Corpus& corpus, Method method) {
  for (const auto& q : corpus) {
    validate(q);
    for (const auto& c : q.candidates) {
      if (needs_sigma(method) && !c.sigma) {
        throw Error("method " + method_name(method) +
                    " needs sigma; missing for (" + q.query_id + ", " +
                    c.doc_id + ")");
      }
      if (!c.neutrality || c.group == Group::kUnassigned) {
        throw Error("missing neutrality for (" + q.query_id + ", " +
                    c.doc_id + ")");
      }
    }
  }
}

inline std::vector<TradeoffRecord> run_sweep(
    const Corpus& corpus, const RelevanceJudgments& judgments,
    SweepConfig cfg) {
  cfg.validate();
  std::sort(cfg.cutoffs_utility.begin(), cfg.cutoffs_utility.end());
  std::sort(cfg.cutoffs_fairness.begin(), cfg.cutoffs_fairness.end());
  const Method reference = cfg.reference_method();
  check_corpus_for(corpus, cfg.method);
  check_corpus_for(corpus, reference);
  if (corpus.empty()) throw Error("sweep over an empty corpus");

  Reranker reranker(corpus, cfg);
  std::vector<double> grid = cfg.alpha_grid;
  if (cfg.method == Method::kUnfair) grid = {0.0};

  std::optional<internal::Evaluation> unfair_reference;
  std::vector<TradeoffRecord> records;
  for (double alpha : grid) {
    auto ev = internal::evaluate_method(corpus, judgments, cfg, reranker,
                                        cfg.method, alpha);
    internal::Evaluation ref;
    if (reference == cfg.method) {
      ref = ev;
    } else if (reference == Method::kUnfair) {
      if (!unfair_reference) {
        unfair_reference = internal::evaluate_method(
            corpus, judgments, cfg, reranker, Method::kUnfair, 0.0);
      }
      ref = *unfair_reference;
    } else {
      ref = internal::evaluate_method(corpus, judgments, cfg, reranker,
                                      reference, alpha);
    }
    TradeoffRecord rec;
    rec.method = cfg.method;
    rec.alpha = alpha;
    rec.reference = reference;
    rec.ndcg_tests = internal::compare(ev.ndcg, ref.ndcg);
    rec.nfairr_tests = internal::compare(ev.nfairr, ref.nfairr);
    rec.ndcg = std::move(ev.ndcg);
    rec.nfairr = std::move(ev.nfairr);
    rec.mean_rerank_seconds = ev.mean_seconds;
    rec.infeasible_queries = ev.infeasible;
    records.push_back(std::move(rec));
  }
  return records;
}

// Column order: method, alpha, ndcg_cut_<k> (ascending k), nfairr<k>
// (ascending k), rerank_time_s, t_stat, p_value. The t-test columns refer to
// nFaiRR at the smallest fairness cutoff.
inline void write_sweep_header(std::ostream& out, std::vector<int> utility,
                               std::vector<int> fairness) {
  std::sort(utility.begin(), utility.end());
  std::sort(fairness.begin(), fairness.end());
  out << "method,alpha";
  for (int k : utility) out << ",ndcg_cut_" << k;
  for (int k : fairness) out << ",nfairr" << k;
  out << ",rerank_time_s,t_stat,p_value\n";
}

inline void write_sweep_rows(std::ostream& out,
                             const std::vector<TradeoffRecord>& records) {
  for (const auto& r : records) {
    out << method_name(r.method) << ',' << format_double(r.alpha);
    for (const auto& m : r.ndcg) out << ',' << format_double(m.mean);
    for (const auto& m : r.nfairr) out << ',' << format_double(m.mean);
    out << ',' << format_double(r.mean_rerank_seconds);
    const TTestResult t =
        r.nfairr_tests.empty() ? TTestResult{} : r.nfairr_tests.front();
    out << ',' << format_double(t.t_statistic) << ','
        << format_double(t.p_value) << '\n';
  }
}

inline void write_sweep_csv(std::ostream& out, const SweepConfig& cfg,
                            const std::vector<TradeoffRecord>& records) {
  write_sweep_header(out, cfg.cutoffs_utility, cfg.cutoffs_fairness);
  write_sweep_rows(out, records);
}

// Index of the record with the highest nFaiRR at the largest fairness cutoff
// among records whose nDCG at the largest utility cutoff reaches `floor`.
inline std::optional<std::size_t> best_under_ndcg_floor(
    const std::vector<TradeoffRecord>& records, double floor) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.ndcg.empty() || r.nfairr.empty()) continue;
    if (r.ndcg.back().mean < floor) continue;
    if (!best || r.nfairr.back().mean > records[*best].nfairr.back().mean) {
      best = i;
    }
  }
  return best;
}

// Per-rank median intersection counts, one column per alpha.
inline void report_interval_analysis(std::ostream& out, const Corpus& corpus,
                                     const std::vector<double>& alphas) {
  if (alphas.empty()) throw Error("interval analysis needs at least one alpha");
  std::vector<std::vector<double>> columns;
  std::size_t rows = 0;
  for (double a : alphas) {
    if (!(a > 0.0)) throw Error("interval alpha must be > 0");
    columns.push_back(median_intersections(corpus, a));
    rows = std::max(rows, columns.back().size());
  }
  out << "rank";
  for (double a : alphas) out << ",alpha_" << format_double(a);
  out << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    out << r + 1;
    for (const auto& col : columns) {
      out << ',';
      if (r < col.size()) out << format_double(col[r]);
    }
    out << '\n';
  }
}

// Per-query values as "query_id,value" lines under a header.
inline void write_per_query_csv(std::ostream& out, const MetricReport& report) {
  out << "query_id,value\n";
  for (const auto& [q, v] : report.per_query) {
    out << q << ',' << format_double(v) << '\n';
  }
}

inline std::map<std::string, double> parse_per_query_csv(
    std::istream& in, const std::string& source = "<per-query>") {
  std::map<std::string, double> values;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(source, number, "expected query_id,value");
    }
    const std::string q = line.substr(0, comma);
    const std::string_view v(line.data() + comma + 1, line.size() - comma - 1);
    if (number == 1 && q == "query_id") continue;
    if (!values.emplace(q, internal::to_double(v, source, number, "value"))
             .second) {
      throw ParseError(source, number, "duplicate query " + q);
    }
  }
  return values;
}

}  // namespace pufr
