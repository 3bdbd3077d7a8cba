// Copyright 2026 The dpgauss Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPGAUSS_MECHANISMS_HPP_
#define DPGAUSS_MECHANISMS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "dpgauss/error.hpp"
#include "dpgauss/rng.hpp"

namespace dpgauss {

struct PrivacyBudget {
  double eps = 0.0;
  double delta = 0.0;

  friend bool operator==(const PrivacyBudget&, const PrivacyBudget&) = default;
};

inline void ValidateBudget(const PrivacyBudget& b) {
  internal::Require(b.eps > 0.0 && std::isfinite(b.eps), ErrorCode::kInvalidArgument, "eps must be positive");
  internal::Require(b.delta >= 0.0 && b.delta < 1.0, ErrorCode::kInvalidArgument, "delta must lie in [0, 1)");
}

// Basic composition: component-wise sums.
inline PrivacyBudget Compose(const std::vector<PrivacyBudget>& budgets) {
  internal::Require(!budgets.empty(), ErrorCode::kInvalidArgument, "compose needs at least one budget");
  PrivacyBudget total;
  for (const PrivacyBudget& b : budgets) {
    total.eps += b.eps;
    total.delta += b.delta;
  }
  return total;
}

struct LedgerEntry {
  std::string stage;
  PrivacyBudget budget;
};

// Records every data access of a pipeline run, in order.
class BudgetLedger {
 public:
  void Charge(std::string stage, PrivacyBudget budget) { entries_.push_back({std::move(stage), budget}); }
  void Append(const BudgetLedger& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
  }

  const std::vector<LedgerEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  PrivacyBudget Total() const {
    if (entries_.empty()) return {};
    std::vector<PrivacyBudget> parts;
    for (const LedgerEntry& e : entries_) parts.push_back(e.budget);
    return Compose(parts);
  }

 private:
  std::vector<LedgerEntry> entries_;
};

struct ScoredCandidates {
  std::vector<double> scores;
  double sensitivity = 1.0;
  std::vector<std::string> labels;

  std::size_t size() const { return scores.size(); }
};

namespace internal {

inline void CheckCandidates(const ScoredCandidates& c) {
  if (c.scores.empty()) throw Error(ErrorCode::kEmptyCandidates, "no candidates to select from");
  Require(c.sensitivity > 0.0, ErrorCode::kInvalidArgument, "sensitivity must be positive");
  for (double s : c.scores) Require(!std::isnan(s), ErrorCode::kInvalidArgument, "score is NaN");
}

inline std::size_t SampleCategorical(const std::vector<double>& weights, Engine& engine) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = std::uniform_real_distribution<double>(0.0, total)(engine);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding left u at or past the last weight; return the last positive one.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace internal

// Selection probabilities proportional to exp(eps * s / (2 sensitivity)),
// computed after subtracting the maximum score.
inline std::vector<double> ExpMechProbabilities(const ScoredCandidates& c, double eps) {
  internal::CheckCandidates(c);
  internal::Require(eps > 0.0, ErrorCode::kInvalidArgument, "eps must be positive");
  const double top = *std::max_element(c.scores.begin(), c.scores.end());
  const double scale = eps / (2.0 * c.sensitivity);
  std::vector<double> p(c.size());
  double total = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    p[i] = std::exp(scale * (c.scores[i] - top));
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

inline std::size_t ExpMech(const ScoredCandidates& c, double eps, Engine& engine) {
  return internal::SampleCategorical(ExpMechProbabilities(c, eps), engine);
}

inline std::size_t ExpMech(const ScoredCandidates& c, double eps, const RngHandle& rng) {
  Engine engine = rng.MakeEngine();
  return ExpMech(c, eps, engine);
}

inline double Laplace(double scale, Engine& engine) {
  internal::Require(scale > 0.0, ErrorCode::kInvalidArgument, "Laplace scale must be positive");
  // Inverse CDF on u in (-1/2, 1/2).
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  double u = unif(engine);
  while (u == -0.5) u = unif(engine);
  return -scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

inline double Laplace(double scale, const RngHandle& rng) {
  Engine engine = rng.MakeEngine();
  return Laplace(scale, engine);
}

struct GapMaxOptions {
  double beta_internal = 0.05;
};

// Truncation margin of the restricted-support selector.
inline double GapMaxTau(double sensitivity, double eps, double delta, long long k) {
  return 4.0 * sensitivity / eps * std::log(static_cast<double>(k) / delta);
}

// Indices with score >= max - tau.
inline std::vector<std::size_t> GapMaxSupport(const ScoredCandidates& c, double eps, double delta, long long k) {
  internal::CheckCandidates(c);
  internal::Require(eps > 0.0, ErrorCode::kInvalidArgument, "eps must be positive");
  internal::Require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  internal::Require(k >= 1, ErrorCode::kInvalidArgument, "k must be at least 1");
  const double top = *std::max_element(c.scores.begin(), c.scores.end());
  const double tau = GapMaxTau(c.sensitivity, eps, delta, k);
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.scores[i] >= top - tau) support.push_back(i);
  }
  return support;
}

// Score guaranteed (with probability >= 1 - beta_internal) for the output.
inline double GapMaxGuarantee(const ScoredCandidates& c, double eps, double delta, long long k,
                              const GapMaxOptions& options = {}) {
  const auto support = GapMaxSupport(c, eps, delta, k);
  const double top = *std::max_element(c.scores.begin(), c.scores.end());
  return top - GapMaxTau(c.sensitivity, eps, delta, k) -
         2.0 * c.sensitivity / eps * std::log(static_cast<double>(support.size()) / options.beta_internal);
}

// Exponential mechanism restricted to the near-maximal candidates
// {i : s_i >= max - (4 sensitivity / eps) ln(k / delta)}.
inline std::size_t GapMax(const ScoredCandidates& c, double eps, double delta, long long k, Engine& engine) {
  const auto support = GapMaxSupport(c, eps, delta, k);
  ScoredCandidates restricted;
  restricted.sensitivity = c.sensitivity;
  restricted.scores.reserve(support.size());
  for (std::size_t i : support) restricted.scores.push_back(c.scores[i]);
  return support[ExpMech(restricted, eps, engine)];
}

inline std::size_t GapMax(const ScoredCandidates& c, double eps, double delta, long long k,
                          const RngHandle& rng) {
  Engine engine = rng.MakeEngine();
  return GapMax(c, eps, delta, k, engine);
}

}  // namespace dpgauss

#endif  // DPGAUSS_MECHANISMS_HPP_
