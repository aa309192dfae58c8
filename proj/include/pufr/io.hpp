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

// Plain-text file formats. All readers accept any whitespace between fields
// and skip blank lines and lines starting with '#'.
//
//   run         query_id Q0 doc_id rank score tag
//   sigma       query_id doc_id sigma
//   neutrality  doc_id neutrality
//   qrels       query_id 0 doc_id grade
//   features    query_id doc_id v1 ... vd
//   posterior   theta d v1 .. vd / fisher d v1 .. vd / [damping x]
//
// Writers emit single-space separated fields and shortest round-trip
// decimal numbers, so write -> parse -> write is byte-identical.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pufr/core.hpp"
#include "pufr/metrics.hpp"
#include "pufr/uncertainty.hpp"

namespace pufr {

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line,
             const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, end);
}

namespace internal {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    const std::size_t start = i;
    while (i < line.size() &&
           !std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

// Calls fn(fields, line_number) for every non-comment, non-blank line.
template <typename Fn>
void for_each_record(std::istream& in, Fn fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    fn(fields, number);
  }
}

inline double to_double(std::string_view s, const std::string& source,
                        std::size_t line, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(source, line,
                     std::string("invalid ") + what + " '" + std::string(s) +
                         "'");
  }
  return v;
}

inline long to_integer(std::string_view s, const std::string& source,
                       std::size_t line, const char* what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(source, line,
                     std::string("invalid ") + what + " '" + std::string(s) +
                         "'");
  }
  return v;
}

inline void expect_fields(const std::vector<std::string_view>& fields,
                          std::size_t n, const std::string& source,
                          std::size_t line) {
  if (fields.size() != n) {
    throw ParseError(source, line,
                     "expected " + std::to_string(n) + " fields, found " +
                         std::to_string(fields.size()));
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

}  // namespace internal

// ---------------------------------------------------------------------------
// Run files

// Queries keep their first-appearance order; ranks are recomputed from the
// scores. `warnings` receives non-fatal notes such as an empty input.
inline Corpus parse_run_file(std::istream& in,
                             const std::string& source = "<run>",
                             std::vector<std::string>* warnings = nullptr) {
  Corpus corpus;
  std::unordered_map<std::string, std::size_t> query_index;
  std::unordered_map<std::string, std::unordered_set<std::string>> seen;
  internal::for_each_record(in, [&](const auto& f, std::size_t line) {
    internal::expect_fields(f, 6, source, line);
    std::string qid(f[0]), did(f[2]);
    internal::to_integer(f[3], source, line, "rank");
    const double score = internal::to_double(f[4], source, line, "score");
    if (!seen[qid].insert(did).second) {
      throw ParseError(source, line,
                       "duplicate document " + did + " for query " + qid);
    }
    auto [it, inserted] = query_index.try_emplace(qid, corpus.size());
    if (inserted) corpus.push_back(QueryCandidates{qid, {}});
    ScoredCandidate c;
    c.doc_id = std::move(did);
    c.mu = score;
    corpus[it->second].candidates.push_back(std::move(c));
  });
  for (auto& q : corpus) assign_original_ranks(q);
  if (corpus.empty() && warnings) warnings->push_back(source + ": empty run");
  return corpus;
}

inline Corpus parse_run_file(const std::string& path,
                             std::vector<std::string>* warnings = nullptr) {
  auto in = internal::open_input(path);
  return parse_run_file(in, path, warnings);
}

// One line per candidate in original-rank order, score = mu.
inline void write_run_file(std::ostream& out, const Corpus& corpus,
                           const std::string& tag) {
  for (const auto& q : corpus) {
    std::vector<const ScoredCandidate*> by_rank(q.size());
    for (const auto& c : q.candidates) by_rank.at(c.original_rank - 1) = &c;
    for (const auto* c : by_rank) {
      out << q.query_id << " Q0 " << c->doc_id << ' ' << c->original_rank
          << ' ' << format_double(c->mu) << ' ' << tag << '\n';
    }
  }
}

inline void write_run_file(std::ostream& out,
                           const std::vector<Ranking>& rankings,
                           const std::string& tag) {
  for (const auto& r : rankings) {
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      out << r.query_id << " Q0 " << r.entries[i].doc_id << ' ' << i + 1
          << ' ' << format_double(r.entries[i].score) << ' ' << tag << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Sigma files

using SigmaMap = std::map<std::pair<std::string, std::string>, double>;

inline SigmaMap parse_sigma_file(std::istream& in,
                                 const std::string& source = "<sigma>") {
  SigmaMap sigmas;
  internal::for_each_record(in, [&](const auto& f, std::size_t line) {
    internal::expect_fields(f, 3, source, line);
    const double s = internal::to_double(f[2], source, line, "sigma");
    if (s < 0.0) throw ParseError(source, line, "negative sigma");
    if (!sigmas.emplace(std::pair{std::string(f[0]), std::string(f[1])}, s)
             .second) {
      throw ParseError(source, line, "duplicate sigma entry");
    }
  });
  return sigmas;
}

inline SigmaMap parse_sigma_file(const std::string& path) {
  auto in = internal::open_input(path);
  return parse_sigma_file(in, path);
}

inline void write_sigma_file(std::ostream& out, const Corpus& corpus) {
  for (const auto& q : corpus) {
    std::vector<const ScoredCandidate*> by_rank(q.size());
    for (const auto& c : q.candidates) by_rank.at(c.original_rank - 1) = &c;
    for (const auto* c : by_rank) {
      out << q.query_id << ' ' << c->doc_id << ' '
          << format_double(sigma_of(*c)) << '\n';
    }
  }
}

inline void attach_sigmas(Corpus& corpus, const SigmaMap& sigmas) {
  for (auto& q : corpus) {
    for (auto& c : q.candidates) {
      auto it = sigmas.find({q.query_id, c.doc_id});
      if (it == sigmas.end()) {
        throw Error("no sigma for pair (" + q.query_id + ", " + c.doc_id +
                    ")");
      }
      c.sigma = it->second;
    }
  }
}

// ---------------------------------------------------------------------------
// Neutrality files

using NeutralityTable = std::map<std::string, double>;

inline NeutralityTable parse_neutrality_file(
    std::istream& in, const std::string& source = "<neutrality>") {
  NeutralityTable table;
  internal::for_each_record(in, [&](const auto& f, std::size_t line) {
    internal::expect_fields(f, 2, source, line);
    const double v = internal::to_double(f[1], source, line, "neutrality");
    if (v < 0.0 || v > 1.0) {
      throw ParseError(source, line, "neutrality out of [0,1]");
    }
    auto [it, inserted] = table.emplace(std::string(f[0]), v);
    if (!inserted && it->second != v) {
      throw ParseError(source, line,
                       "conflicting neutrality for document " + it->first);
    }
  });
  return table;
}

inline NeutralityTable parse_neutrality_file(const std::string& path) {
  auto in = internal::open_input(path);
  return parse_neutrality_file(in, path);
}

inline void write_neutrality_file(std::ostream& out,
                                  const NeutralityTable& table) {
  for (const auto& [doc, v] : table) {
    out << doc << ' ' << format_double(v) << '\n';
  }
}

inline NeutralityTable neutrality_table(const Corpus& corpus) {
  NeutralityTable table;
  for (const auto& q : corpus) {
    for (const auto& c : q.candidates) table[c.doc_id] = neutrality_of(c);
  }
  return table;
}

// Sets neutrality and group of every candidate.
inline void attach_neutrality(
    Corpus& corpus, const NeutralityTable& table,
    double protected_threshold = kDefaultProtectedThreshold) {
  check_protected_threshold(protected_threshold);
  for (auto& q : corpus) {
    for (auto& c : q.candidates) {
      auto it = table.find(c.doc_id);
      if (it == table.end()) {
        throw Error("no neutrality for document " + c.doc_id);
      }
      c.neutrality = Neutrality(it->second);
    }
    q = assign_groups(std::move(q), protected_threshold);
  }
}

// ---------------------------------------------------------------------------
// Qrels

inline RelevanceJudgments parse_qrels(std::istream& in,
                                      const std::string& source = "<qrels>") {
  RelevanceJudgments judgments;
  internal::for_each_record(in, [&](const auto& f, std::size_t line) {
    internal::expect_fields(f, 4, source, line);
    const long grade = internal::to_integer(f[3], source, line, "grade");
    if (grade < 0) throw ParseError(source, line, "negative grade");
    judgments.set(std::string(f[0]), std::string(f[2]),
                  static_cast<int>(grade));
  });
  return judgments;
}

inline RelevanceJudgments parse_qrels(const std::string& path) {
  auto in = internal::open_input(path);
  return parse_qrels(in, path);
}

inline void write_qrels(std::ostream& out,
                        const RelevanceJudgments& judgments) {
  for (const auto& [q, docs] : judgments.all()) {
    for (const auto& [d, g] : docs) out << q << " 0 " << d << ' ' << g << '\n';
  }
}

// ---------------------------------------------------------------------------
// Features and posteriors

struct QueryFeatures {
  std::string query_id;
  std::vector<std::string> doc_ids;
  std::vector<FeatureVector> features;
};

inline std::vector<QueryFeatures> parse_feature_file(
    std::istream& in, const std::string& source = "<features>") {
  std::vector<QueryFeatures> out;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t dim = 0;
  internal::for_each_record(in, [&](const auto& f, std::size_t line) {
    if (f.size() < 3) {
      throw ParseError(source, line, "expected query, doc and features");
    }
    if (dim == 0) dim = f.size() - 2;
    if (f.size() - 2 != dim) {
      throw ParseError(source, line, "feature dimension differs");
    }
    FeatureVector v;
    v.reserve(dim);
    for (std::size_t j = 2; j < f.size(); ++j) {
      v.push_back(internal::to_double(f[j], source, line, "feature"));
    }
    auto [it, inserted] = index.try_emplace(std::string(f[0]), out.size());
    if (inserted) out.push_back(QueryFeatures{std::string(f[0]), {}, {}});
    auto& qf = out[it->second];
    qf.doc_ids.emplace_back(f[1]);
    qf.features.push_back(std::move(v));
  });
  return out;
}

inline std::vector<QueryFeatures> parse_feature_file(const std::string& path) {
  auto in = internal::open_input(path);
  return parse_feature_file(in, path);
}

inline void write_feature_file(std::ostream& out,
                               const std::vector<QueryFeatures>& queries) {
  for (const auto& q : queries) {
    for (std::size_t i = 0; i < q.doc_ids.size(); ++i) {
      out << q.query_id << ' ' << q.doc_ids[i];
      for (double v : q.features[i]) out << ' ' << format_double(v);
      out << '\n';
    }
  }
}

// The fisher line holds the undamped diagonal; a missing damping line means
// kDefaultDamping.
inline LastLayerPosterior parse_posterior_file(
    std::istream& in, const std::string& source = "<posterior>") {
  std::optional<std::vector<double>> theta, fisher;
  std::optional<double> damping;
  auto read_vector = [&](const auto& f, std::size_t line) {
    if (f.size() < 2) throw ParseError(source, line, "missing dimension");
    const long d = internal::to_integer(f[1], source, line, "dimension");
    if (d < 1 || static_cast<std::size_t>(d) != f.size() - 2) {
      throw ParseError(source, line, "dimension does not match values");
    }
    std::vector<double> v;
    for (std::size_t j = 2; j < f.size(); ++j) {
      v.push_back(internal::to_double(f[j], source, line, "value"));
    }
    return v;
  };
  internal::for_each_record(in, [&](const auto& f, std::size_t line) {
    if (f[0] == "theta" && !theta) {
      theta = read_vector(f, line);
    } else if (f[0] == "fisher" && !fisher) {
      fisher = read_vector(f, line);
    } else if (f[0] == "damping" && !damping) {
      internal::expect_fields(f, 2, source, line);
      damping = internal::to_double(f[1], source, line, "damping");
    } else {
      throw ParseError(source, line,
                       "unexpected record '" + std::string(f[0]) + "'");
    }
  });
  if (!theta || !fisher) throw Error(source + ": needs theta and fisher lines");
  for (double x : *fisher) {
    if (x < 0.0) throw Error(source + ": negative fisher entry");
  }
  return LastLayerPosterior::FromRawFisher(std::move(*theta),
                                           std::move(*fisher),
                                           damping.value_or(kDefaultDamping));
}

inline LastLayerPosterior parse_posterior_file(const std::string& path) {
  auto in = internal::open_input(path);
  return parse_posterior_file(in, path);
}

inline void write_posterior_file(std::ostream& out,
                                 const LastLayerPosterior& posterior) {
  auto line = [&](const char* name, const std::vector<double>& v) {
    out << name << ' ' << v.size();
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
  };
  line("theta", posterior.theta_map());
  line("fisher", posterior.raw_fisher());
  out << "damping " << format_double(posterior.damping()) << '\n';
}

}  // namespace pufr
