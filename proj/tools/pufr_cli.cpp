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

// Command-line front end. Exit codes: 0 success, 1 usage or parse error,
// 2 an infeasible constrained instance was met (output is still written).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pufr/pufr.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

// Writes to `path`, or to stdout when the path is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw pufr::Error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw pufr::Error("invalid number '" + item + "' in list");
    }
  }
  return out;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct CorpusInputs {
  std::string run;
  std::string sigma;
  std::string neutrality;
  double protected_threshold = pufr::kDefaultProtectedThreshold;

  void add_options(CLI::App* app, bool need_neutrality) {
    app->add_option("--run", run, "run file (query Q0 doc rank score tag)")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--sigma", sigma, "sigma file (query doc sigma)")
        ->check(CLI::ExistingFile);
    auto* n = app->add_option("--neutrality", neutrality,
                              "neutrality file (doc neutrality)")
                  ->check(CLI::ExistingFile);
    if (need_neutrality) n->required();
    app->add_option("--protected-threshold", protected_threshold,
                    "neutrality at or above which a document is protected")
        ->check(CLI::Range(0.0, 1.0));
  }

  pufr::Corpus load() const {
    std::vector<std::string> warnings;
    auto corpus = pufr::parse_run_file(run, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    if (!sigma.empty()) pufr::attach_sigmas(corpus, pufr::parse_sigma_file(sigma));
    if (!neutrality.empty()) {
      pufr::attach_neutrality(corpus, pufr::parse_neutrality_file(neutrality),
                              protected_threshold);
    }
    return corpus;
  }
};

int run_rerank(const CorpusInputs& inputs, const std::string& method_name,
               double alpha, double alpha_nonprotected, int depth,
               double significance, const std::string& tag,
               const std::string& output) {
  const auto method = pufr::parse_method(method_name);
  const auto corpus = inputs.load();
  pufr::check_corpus_for(corpus, method);
  const double alpha_n = alpha_nonprotected >= 0.0 ? alpha_nonprotected : alpha;

  std::vector<pufr::Ranking> rankings;
  int infeasible = 0;
  double sigma_mean = 0.0;
  if (method == pufr::Method::kUniform) {
    sigma_mean = pufr::compute_sigma_mean(corpus);
  }
  std::optional<pufr::MTable> table;
  if (method == pufr::Method::kFastar) {
    std::size_t longest = 1;
    for (const auto& q : corpus) longest = std::max(longest, q.size());
    table = pufr::compute_m_table(static_cast<int>(longest), alpha,
                                  significance);
  }
  for (const auto& q : corpus) {
    switch (method) {
      case pufr::Method::kUnfair:
        rankings.push_back(pufr::unfair_rank(q));
        break;
      case pufr::Method::kPufr:
        rankings.push_back(pufr::pufr_rerank(q, {alpha, alpha_n}));
        break;
      case pufr::Method::kUniform:
        rankings.push_back(pufr::uniform_rerank(q, sigma_mean, {alpha, alpha_n}));
        break;
      case pufr::Method::kFastar:
        rankings.push_back(pufr::fastar_rerank(q, *table));
        break;
      case pufr::Method::kConstrained: {
        pufr::ConstraintConfig cc;
        cc.alpha_fairness = alpha;
        cc.depth = depth;
        auto r = pufr::constrained_rerank(q, cc);
        if (!r.feasible) {
          ++infeasible;
          std::cerr << "warning: query " << q.query_id
                    << " cannot reach the FaiRR floor\n";
        }
        rankings.push_back(std::move(r.ranking));
        break;
      }
    }
  }
  Output out(output);
  pufr::write_run_file(out.stream(), rankings, tag);
  return infeasible ? kExitInfeasible : kExitOk;
}

int run_sweep_command(const CorpusInputs& inputs, const std::string& qrels,
                      const std::string& methods, const std::string& grid,
                      const std::string& utility, const std::string& fairness,
                      int depth, int threads, double significance,
                      std::optional<double> ndcg_floor,
                      const std::string& per_query_dir,
                      const std::string& output) {
  const auto corpus = inputs.load();
  const auto judgments = pufr::parse_qrels(qrels);
  pufr::SweepConfig base;
  base.alpha_grid = parse_number_list(grid);
  base.cutoffs_utility.clear();
  for (double k : parse_number_list(utility)) {
    base.cutoffs_utility.push_back(static_cast<int>(k));
  }
  base.cutoffs_fairness.clear();
  for (double k : parse_number_list(fairness)) {
    base.cutoffs_fairness.push_back(static_cast<int>(k));
  }
  std::sort(base.cutoffs_utility.begin(), base.cutoffs_utility.end());
  std::sort(base.cutoffs_fairness.begin(), base.cutoffs_fairness.end());
  base.depth = depth;
  base.threads = threads;
  base.fair_significance = significance;

  // Validate every method before doing any work.
  std::vector<pufr::SweepConfig> configs;
  for (const auto& name : split_names(methods)) {
    auto cfg = base;
    cfg.method = pufr::parse_method(name);
    cfg.validate();
    pufr::check_corpus_for(corpus, cfg.method);
    pufr::check_corpus_for(corpus, cfg.reference_method());
    configs.push_back(cfg);
  }
  if (configs.empty()) throw pufr::Error("no method given");

  Output out(output);
  pufr::write_sweep_header(out.stream(), base.cutoffs_utility,
                           base.cutoffs_fairness);
  int infeasible = 0;
  for (const auto& cfg : configs) {
    const auto records = pufr::run_sweep(corpus, judgments, cfg);
    pufr::write_sweep_rows(out.stream(), records);
    for (const auto& r : records) {
      infeasible += r.infeasible_queries;
      if (!per_query_dir.empty()) {
        std::filesystem::create_directories(per_query_dir);
        const std::string stem = per_query_dir + "/" +
                                 pufr::method_name(r.method) + "_" +
                                 pufr::format_double(r.alpha);
        for (std::size_t i = 0; i < r.ndcg.size(); ++i) {
          std::ofstream f(stem + "_ndcg_cut_" +
                          std::to_string(base.cutoffs_utility[i]) + ".csv");
          pufr::write_per_query_csv(f, r.ndcg[i]);
        }
        for (std::size_t i = 0; i < r.nfairr.size(); ++i) {
          std::ofstream f(stem + "_nfairr" +
                          std::to_string(base.cutoffs_fairness[i]) + ".csv");
          pufr::write_per_query_csv(f, r.nfairr[i]);
        }
      }
    }
    if (ndcg_floor) {
      const auto best = pufr::best_under_ndcg_floor(records, *ndcg_floor);
      std::cerr << pufr::method_name(cfg.method) << ": ";
      if (best) {
        const auto& r = records[*best];
        std::cerr << "best alpha " << pufr::format_double(r.alpha)
                  << " nfairr" << base.cutoffs_fairness.back() << '='
                  << r.nfairr.back().mean << " ndcg_cut_"
                  << base.cutoffs_utility.back() << '=' << r.ndcg.back().mean
                  << '\n';
      } else {
        std::cerr << "no setting reaches the nDCG floor\n";
      }
    }
  }
  if (infeasible) {
    std::cerr << "warning: " << infeasible
              << " constrained instances were infeasible\n";
  }
  return infeasible ? kExitInfeasible : kExitOk;
}

int run_intervals(const CorpusInputs& inputs, const std::string& grid,
                  const std::string& output) {
  const auto corpus = inputs.load();
  for (const auto& q : corpus) {
    for (const auto& c : q.candidates) pufr::sigma_of(c);
  }
  Output out(output);
  pufr::report_interval_analysis(out.stream(), corpus, parse_number_list(grid));
  return kExitOk;
}

int run_laplace(const std::string& features, const std::string& posterior_path,
                int samples, std::uint64_t seed, const std::string& tag,
                const std::string& output, const std::string& sigma_output) {
  const auto posterior = pufr::parse_posterior_file(posterior_path);
  const auto queries = pufr::parse_feature_file(features);
  pufr::McConfig mc{samples, seed};
  pufr::Corpus corpus;
  for (const auto& qf : queries) {
    pufr::QueryCandidates q{qf.query_id, {}};
    for (const auto& d : qf.doc_ids) {
      pufr::ScoredCandidate c;
      c.doc_id = d;
      q.candidates.push_back(std::move(c));
    }
    corpus.push_back(pufr::score_query(posterior, std::move(q), qf.features, mc));
  }
  {
    Output out(output);
    pufr::write_run_file(out.stream(), corpus, tag);
  }
  Output sig(sigma_output);
  pufr::write_sigma_file(sig.stream(), corpus);
  return kExitOk;
}

int run_synth(const pufr::SyntheticConfig& cfg, const std::string& dir,
              const std::string& tag) {
  const auto data = pufr::generate_synthetic(cfg);
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir + "/" + name);
    if (!f) throw pufr::Error("cannot write " + dir + "/" + name);
    return f;
  };
  {
    auto f = open("run.txt");
    pufr::write_run_file(f, data.corpus, tag);
  }
  {
    auto f = open("sigma.txt");
    pufr::write_sigma_file(f, data.corpus);
  }
  {
    auto f = open("neutrality.txt");
    pufr::write_neutrality_file(f, pufr::neutrality_table(data.corpus));
  }
  {
    auto f = open("qrels.txt");
    pufr::write_qrels(f, data.judgments);
  }
  return kExitOk;
}

int run_ttest(const std::string& a_path, const std::string& b_path) {
  std::ifstream a(a_path), b(b_path);
  if (!a) throw pufr::Error("cannot open " + a_path);
  if (!b) throw pufr::Error("cannot open " + b_path);
  const auto r = pufr::paired_t_test(pufr::parse_per_query_csv(a, a_path),
                                     pufr::parse_per_query_csv(b, b_path));
  std::cout << "t_stat,df,p_value\n"
            << pufr::format_double(r.t_statistic) << ',' << r.degrees_of_freedom
            << ',' << pufr::format_double(r.p_value) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware post hoc fair re-ranking"};
  app.require_subcommand(1);

  // rerank
  auto* rerank = app.add_subcommand("rerank", "re-rank a run with one method");
  CorpusInputs rerank_in;
  rerank_in.add_options(rerank, false);
  std::string method = "pufr", tag = "pufr", output;
  double alpha = 0.0, alpha_nonprotected = -1.0;
  double significance = pufr::kDefaultFairSignificance;
  int depth = 50;
  rerank->add_option("--method", method,
                     "unfair|pufr|uniform|fastar|constrained");
  rerank->add_option("--alpha", alpha, "trade-off parameter")
      ->check(CLI::NonNegativeNumber);
  rerank->add_option("--alpha-nonprotected", alpha_nonprotected,
                     "separate alpha for the non-protected group");
  rerank->add_option("--depth", depth, "constrained re-rank window");
  rerank->add_option("--significance", significance, "FA*IR significance");
  rerank->add_option("--tag", tag, "run tag");
  rerank->add_option("--output", output, "output run file (default stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "utility/fairness trade-off CSV");
  CorpusInputs sweep_in;
  sweep_in.add_options(sweep, true);
  std::string qrels, methods = "pufr", grid = "0", utility = "10,100",
                     fairness = "10,50", per_query_dir;
  int threads = 1;
  std::optional<double> ndcg_floor;
  sweep->add_option("--qrels", qrels, "relevance judgments")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--method", methods, "comma-separated methods");
  sweep->add_option("--alpha-grid", grid, "comma-separated increasing alphas");
  sweep->add_option("--cutoffs-utility", utility, "nDCG cutoffs");
  sweep->add_option("--cutoffs-fairness", fairness, "nFaiRR cutoffs");
  sweep->add_option("--depth", depth, "constrained re-rank window");
  sweep->add_option("--significance", significance, "FA*IR significance");
  sweep->add_option("--threads", threads, "worker threads");
  sweep->add_option("--ndcg-floor", ndcg_floor,
                    "report the best nFaiRR setting above this nDCG");
  sweep->add_option("--per-query-dir", per_query_dir,
                    "write per-query metric CSVs here");
  sweep->add_option("--output", output, "output CSV (default stdout)");

  // intervals
  auto* intervals =
      app.add_subcommand("intervals", "median overlapping intervals per rank");
  CorpusInputs intervals_in;
  intervals_in.add_options(intervals, false);
  std::string interval_grid = "1,2";
  intervals->add_option("--alpha-grid", interval_grid,
                        "interval half-widths in sigmas");
  intervals->add_option("--output", output, "output CSV (default stdout)");

  // laplace
  auto* laplace = app.add_subcommand(
      "laplace", "scores and sigmas from features and a last-layer posterior");
  std::string features, posterior, sigma_output;
  int samples = pufr::kDefaultMcSamples;
  std::uint64_t seed = 0;
  laplace->add_option("--features", features, "feature file")
      ->required()
      ->check(CLI::ExistingFile);
  laplace->add_option("--posterior", posterior, "posterior file")
      ->required()
      ->check(CLI::ExistingFile);
  laplace->add_option("--samples", samples, "Monte Carlo sample size");
  laplace->add_option("--seed", seed, "random seed");
  laplace->add_option("--tag", tag, "run tag");
  laplace->add_option("--output", output, "output run file")->required();
  laplace->add_option("--sigma-output", sigma_output, "output sigma file")
      ->required();

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic fixture corpus");
  pufr::SyntheticConfig synth_cfg;
  std::string synth_dir;
  synth->add_option("--output", synth_dir, "output directory")->required();
  synth->add_option("--queries", synth_cfg.n_queries);
  synth->add_option("--candidates", synth_cfg.n_candidates);
  synth->add_option("--protected-fraction", synth_cfg.protected_fraction);
  synth->add_option("--bias", synth_cfg.bias_strength,
                    "score inflation of non-protected documents");
  synth->add_option("--sigma-base", synth_cfg.sigma_base);
  synth->add_option("--sigma-spread", synth_cfg.sigma_spread);
  synth->add_option("--sigma-coupling", synth_cfg.sigma_bias_coupling,
                    "extra sigma per unit of score inflation");
  synth->add_option("--sigma-rank-growth", synth_cfg.sigma_rank_growth);
  synth->add_option("--relevance-correlation",
                    synth_cfg.relevance_correlation);
  synth->add_option("--relevance-threshold", synth_cfg.relevance_threshold);
  synth->add_flag("--noise-tracks-sigma", synth_cfg.noise_tracks_sigma,
                  "draw each score's noise with its own sigma");
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--tag", tag, "run tag");

  // ttest
  auto* ttest = app.add_subcommand("ttest", "paired t-test of per-query CSVs");
  std::string ttest_a, ttest_b;
  ttest->add_option("a", ttest_a, "per-query CSV")->required();
  ttest->add_option("b", ttest_b, "per-query CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*rerank) {
      return run_rerank(rerank_in, method, alpha, alpha_nonprotected, depth,
                        significance, tag, output);
    }
    if (*sweep) {
      return run_sweep_command(sweep_in, qrels, methods, grid, utility,
                               fairness, depth, threads, significance,
                               ndcg_floor, per_query_dir, output);
    }
    if (*intervals) return run_intervals(intervals_in, interval_grid, output);
    if (*laplace) {
      return run_laplace(features, posterior, samples, seed, tag, output,
                         sigma_output);
    }
    if (*synth) return run_synth(synth_cfg, synth_dir, tag);
    if (*ttest) return run_ttest(ttest_a, ttest_b);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
