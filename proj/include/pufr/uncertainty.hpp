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

// Post hoc Laplace approximation of a linear last scoring layer.
//
// The posterior over last-layer weights is N(theta_map, diag(F)^-1) where F
// is the empirical diagonal Fisher of a calibration set plus a damping term.
// Predictive moments of a score are estimated by Monte Carlo: draw N weight
// vectors once per query, score every candidate with each draw, and take
// the population mean and variance of the N scores. An exact closed form is
// available for the linear layer and serves as a reference.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pufr/core.hpp"

namespace pufr {

inline constexpr double kDefaultDamping = 1e-3;
inline constexpr int kDefaultMcSamples = 1000;

using FeatureVector = std::vector<double>;
using WeightVector = std::vector<double>;

struct DiagonalFisher {
  // Empirical mean of squared gradients plus damping.
  std::vector<double> diag;
  double damping = 0.0;
};

class LastLayerPosterior {
 public:
  // `fisher.diag` must already include the damping term.
  LastLayerPosterior(WeightVector theta_map, DiagonalFisher fisher)
      : theta_map_(std::move(theta_map)),
        fisher_diag_(std::move(fisher.diag)),
        damping_(fisher.damping) {
    if (theta_map_.empty()) throw Error("posterior has zero dimension");
    if (theta_map_.size() != fisher_diag_.size()) {
      throw Error("theta and fisher dimensions differ");
    }
    if (!(damping_ >= 0.0)) throw Error("damping must be >= 0");
    for (std::size_t j = 0; j < fisher_diag_.size(); ++j) {
      if (!std::isfinite(theta_map_[j])) throw Error("non-finite theta entry");
      if (!(fisher_diag_[j] > 0.0) || std::isnan(fisher_diag_[j])) {
        throw Error("fisher diagonal entry " + std::to_string(j) +
                    " is not strictly positive; increase damping");
      }
    }
    raw_fisher_ = fisher_diag_;
    for (auto& f : raw_fisher_) f -= damping_;
  }

  // Adds `damping` to an undamped Fisher diagonal.
  static LastLayerPosterior FromRawFisher(WeightVector theta_map,
                                          std::vector<double> raw_fisher,
                                          double damping = kDefaultDamping) {
    std::vector<double> damped(raw_fisher);
    for (auto& f : damped) f += damping;
    LastLayerPosterior posterior(std::move(theta_map),
                                 DiagonalFisher{std::move(damped), damping});
    posterior.raw_fisher_ = std::move(raw_fisher);
    return posterior;
  }

  std::size_t dim() const { return theta_map_.size(); }
  const WeightVector& theta_map() const { return theta_map_; }
  const std::vector<double>& fisher_diag() const { return fisher_diag_; }
  double damping() const { return damping_; }

  // Undamped Fisher diagonal.
  const std::vector<double>& raw_fisher() const { return raw_fisher_; }

 private:
  WeightVector theta_map_;
  std::vector<double> fisher_diag_;
  std::vector<double> raw_fisher_;
  double damping_;
};

struct McConfig {
  int n_samples = kDefaultMcSamples;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_samples < 2) throw Error("Monte Carlo sample size must be >= 2");
  }
};

struct PredictiveDistribution {
  double mu = 0.0;
  double sigma = 0.0;
};

inline DiagonalFisher estimate_diagonal_fisher(
    std::span<const std::vector<double>> per_example_gradients,
    double damping = kDefaultDamping) {
  if (per_example_gradients.empty()) {
    throw Error("fisher estimation needs at least one gradient");
  }
  if (!(damping >= 0.0)) throw Error("damping must be >= 0");
  const std::size_t d = per_example_gradients.front().size();
  std::vector<double> sum_sq(d, 0.0);
  for (const auto& g : per_example_gradients) {
    if (g.size() != d) throw Error("gradient dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) sum_sq[j] += g[j] * g[j];
  }
  const double n = static_cast<double>(per_example_gradients.size());
  for (auto& s : sum_sq) s = s / n + damping;
  return DiagonalFisher{std::move(sum_sq), damping};
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

// Gradient w.r.t. the weights of ln N(target; theta . h, noise_variance).
inline std::vector<double> gaussian_likelihood_gradient(
    std::span<const double> theta, std::span<const double> feature,
    double target, double noise_variance = 1.0) {
  if (!(noise_variance > 0.0)) throw Error("noise variance must be > 0");
  const double residual = (target - dot(theta, feature)) / noise_variance;
  std::vector<double> g(feature.begin(), feature.end());
  for (auto& x : g) x *= residual;
  return g;
}

inline std::vector<WeightVector> sample_last_layers(
    const LastLayerPosterior& posterior, const McConfig& cfg) {
  cfg.validate();
  const std::size_t d = posterior.dim();
  std::vector<double> scale(d);
  for (std::size_t j = 0; j < d; ++j) {
    scale[j] = 1.0 / std::sqrt(posterior.fisher_diag()[j]);
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<WeightVector> samples(static_cast<std::size_t>(cfg.n_samples),
                                    WeightVector(d));
  for (auto& theta : samples) {
    for (std::size_t j = 0; j < d; ++j) {
      theta[j] = posterior.theta_map()[j] + scale[j] * normal(rng);
    }
  }
  return samples;
}

// Population mean and variance (divide by N) of theta_t . h over the draws.
// The variance is accumulated around the mean, which equals
// E[s^2] - E[s]^2 without its cancellation error.
inline PredictiveDistribution predictive_moments(
    std::span<const WeightVector> samples, std::span<const double> feature) {
  if (samples.size() < 2) throw Error("need at least two weight samples");
  std::vector<double> scores;
  scores.reserve(samples.size());
  for (const auto& theta : samples) scores.push_back(dot(theta, feature));
  const double n = static_cast<double>(scores.size());
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  var /= n;
  return {mean, std::sqrt(std::max(var, 0.0))};
}

inline PredictiveDistribution analytic_predictive(
    const LastLayerPosterior& posterior, std::span<const double> feature) {
  if (feature.size() != posterior.dim()) throw Error("dimension mismatch");
  double var = 0.0;
  for (std::size_t j = 0; j < feature.size(); ++j) {
    var += feature[j] * feature[j] / posterior.fisher_diag()[j];
  }
  return {dot(posterior.theta_map(), feature), std::sqrt(var)};
}

inline std::uint64_t query_seed(std::uint64_t seed, std::string_view query_id) {
  return seed ^ stable_hash(query_id);
}

// Fills mu and sigma of every candidate from one shared set of weight draws
// and recomputes original ranks. `features` is aligned with the candidates.
inline QueryCandidates score_query(const LastLayerPosterior& posterior,
                                   QueryCandidates query,
                                   std::span<const FeatureVector> features,
                                   const McConfig& cfg) {
  if (features.size() != query.size()) {
    throw Error("query " + query.query_id +
                ": one feature vector per candidate required");
  }
  for (const auto& f : features) {
    if (f.size() != posterior.dim()) {
      throw Error("feature dimension does not match the last layer");
    }
    for (double v : f) {
      if (!std::isfinite(v)) throw Error("non-finite feature value");
    }
  }
  McConfig per_query = cfg;
  per_query.seed = query_seed(cfg.seed, query.query_id);
  const auto samples = sample_last_layers(posterior, per_query);
  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto pd = predictive_moments(samples, features[i]);
    query.candidates[i].mu = pd.mu;
    query.candidates[i].sigma = pd.sigma;
  }
  assign_original_ranks(query);
  return query;
}

}  // namespace pufr
