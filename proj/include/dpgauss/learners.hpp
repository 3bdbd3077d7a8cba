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

#ifndef DPGAUSS_LEARNERS_HPP_
#define DPGAUSS_LEARNERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "dpgauss/covers.hpp"
#include "dpgauss/error.hpp"
#include "dpgauss/gaussian.hpp"
#include "dpgauss/mechanisms.hpp"
#include "dpgauss/rng.hpp"
#include "dpgauss/scheffe.hpp"
#include "json.hpp"

namespace dpgauss {

// One selection step of a pipeline.
struct StageRecord {
  std::string stage;
  std::size_t candidates = 0;
  std::size_t chosen_index = 0;
  Gaussian chosen = Gaussian::Standard(1);
  PrivacyBudget budget;
  std::optional<long long> k;
};

struct SelectorResult {
  Gaussian chosen = Gaussian::Standard(1);
  std::size_t chosen_index = 0;
  std::optional<ScoredCandidates> scores_snapshot;
  PrivacyBudget budget_spent;
  BudgetLedger ledger;
  std::vector<StageRecord> trace;
};

// Constants the analysis leaves unspecified or that are impractically small
// at desk scale. Every field may be overridden from JSON.
struct LearnerConstants {
  double c1 = 1.0 / 400.0;
  double c2 = 1.0 / 400.0;
  // Upper limits on alpha and xi accepted by the boosting learners.
  double alpha_max = 0.5;
  double xi_max = 0.1;
  // TV radius of the coarse location ball (the literal value is
  // 1 / (200 (600 b + 1))) and of the coarse scale ball (literal
  // 1 / (100 * 1201)). Used when literal_radii is false.
  double location_coarse_tv = 0.6;
  double scale_coarse_tv = 0.6;
  bool literal_radii = false;
  // Sample-size multipliers for the 1/alpha^2, 1/(alpha eps) and 1/eps terms.
  double m_alpha2 = 1.0;
  double m_alpha_eps = 1.0;
  double m_eps = 1.0;
};

// Data-independent search region of the location stages.
struct LocationRegion {
  Vector center;  // empty means the origin
  double radius = 6.0;
  // Optional lattice overrides; by default spacings follow the TV targets.
  std::optional<double> coarse_step;
  std::optional<double> fine_step;
  std::optional<double> fine_radius;
};

// Data-independent search region of the scale stages.
struct ScaleRegion {
  double log_radius = 1.5;
  double log_step = 0.4;
  double fine_step = 0.15;
  double fine_radius = 0.8;
};

struct LearnerConfig {
  double xi = 0.0;
  double alpha = 0.15;
  double beta = 0.1;
  double eps = 1.0;
  double delta = 1e-6;
  double b = 10.0;
  std::optional<long long> k1;
  std::optional<long long> k;
  LearnerConstants constants;
  long long n_mc = 4000;
  MassMethod mass_method = MassMethod::kAuto;
  std::uint64_t mass_seed = 0x5eedULL;
  LocationRegion region;
  ScaleRegion scale_region;
  // Use the certified lattice covers instead of TV-targeted lattices.
  bool certified_covers = false;
};

namespace internal {

inline void ReadOpt(const nlohmann::json& j, const char* key, double& out) {
  if (j.contains(key)) out = j.at(key).get<double>();
}

}  // namespace internal

inline nlohmann::json LearnerConfigToJson(const LearnerConfig& c) {
  nlohmann::json j;
  j["xi"] = c.xi;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["eps"] = c.eps;
  j["delta"] = c.delta;
  j["b"] = c.b;
  j["k1"] = c.k1 ? nlohmann::json(*c.k1) : nlohmann::json(nullptr);
  j["k"] = c.k ? nlohmann::json(*c.k) : nlohmann::json(nullptr);
  j["n_mc"] = c.n_mc;
  j["mass_method"] = MassMethodName(c.mass_method);
  j["mass_seed"] = c.mass_seed;
  j["certified_covers"] = c.certified_covers;
  const LearnerConstants& k = c.constants;
  j["constants"] = {{"c1", k.c1}, {"c2", k.c2}, {"alpha_max", k.alpha_max}, {"xi_max", k.xi_max},
                    {"location_coarse_tv", k.location_coarse_tv}, {"scale_coarse_tv", k.scale_coarse_tv},
                    {"literal_radii", k.literal_radii}, {"m_alpha2", k.m_alpha2},
                    {"m_alpha_eps", k.m_alpha_eps}, {"m_eps", k.m_eps}};
  nlohmann::json region;
  region["center"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < c.region.center.size(); ++i) region["center"].push_back(c.region.center(i));
  region["radius"] = c.region.radius;
  if (c.region.coarse_step) region["coarse_step"] = *c.region.coarse_step;
  if (c.region.fine_step) region["fine_step"] = *c.region.fine_step;
  if (c.region.fine_radius) region["fine_radius"] = *c.region.fine_radius;
  j["region"] = std::move(region);
  j["scale_region"] = {{"log_radius", c.scale_region.log_radius}, {"log_step", c.scale_region.log_step},
                       {"fine_step", c.scale_region.fine_step}, {"fine_radius", c.scale_region.fine_radius}};
  return j;
}

// Missing keys keep their defaults.
inline LearnerConfig LearnerConfigFromJson(const nlohmann::json& j) {
  try {
    LearnerConfig c;
    internal::ReadOpt(j, "xi", c.xi);
    internal::ReadOpt(j, "alpha", c.alpha);
    internal::ReadOpt(j, "beta", c.beta);
    internal::ReadOpt(j, "eps", c.eps);
    internal::ReadOpt(j, "delta", c.delta);
    internal::ReadOpt(j, "b", c.b);
    if (j.contains("k1") && !j["k1"].is_null()) c.k1 = j["k1"].get<long long>();
    if (j.contains("k") && !j["k"].is_null()) c.k = j["k"].get<long long>();
    if (j.contains("n_mc")) c.n_mc = j["n_mc"].get<long long>();
    if (j.contains("mass_method")) c.mass_method = ParseMassMethod(j["mass_method"].get<std::string>());
    if (j.contains("mass_seed")) c.mass_seed = j["mass_seed"].get<std::uint64_t>();
    if (j.contains("certified_covers")) c.certified_covers = j["certified_covers"].get<bool>();
    if (j.contains("constants")) {
      const auto& k = j["constants"];
      internal::ReadOpt(k, "c1", c.constants.c1);
      internal::ReadOpt(k, "c2", c.constants.c2);
      internal::ReadOpt(k, "alpha_max", c.constants.alpha_max);
      internal::ReadOpt(k, "xi_max", c.constants.xi_max);
      internal::ReadOpt(k, "location_coarse_tv", c.constants.location_coarse_tv);
      internal::ReadOpt(k, "scale_coarse_tv", c.constants.scale_coarse_tv);
      internal::ReadOpt(k, "m_alpha2", c.constants.m_alpha2);
      internal::ReadOpt(k, "m_alpha_eps", c.constants.m_alpha_eps);
      internal::ReadOpt(k, "m_eps", c.constants.m_eps);
      if (k.contains("literal_radii")) c.constants.literal_radii = k["literal_radii"].get<bool>();
    }
    if (j.contains("region")) {
      const auto& r = j["region"];
      if (r.contains("center")) c.region.center = VectorFromJson(r["center"]);
      internal::ReadOpt(r, "radius", c.region.radius);
      if (r.contains("coarse_step")) c.region.coarse_step = r["coarse_step"].get<double>();
      if (r.contains("fine_step")) c.region.fine_step = r["fine_step"].get<double>();
      if (r.contains("fine_radius")) c.region.fine_radius = r["fine_radius"].get<double>();
    }
    if (j.contains("scale_region")) {
      const auto& s = j["scale_region"];
      internal::ReadOpt(s, "log_radius", c.scale_region.log_radius);
      internal::ReadOpt(s, "log_step", c.scale_region.log_step);
      internal::ReadOpt(s, "fine_step", c.scale_region.fine_step);
      internal::ReadOpt(s, "fine_radius", c.scale_region.fine_radius);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

inline nlohmann::json StageRecordToJson(const StageRecord& s) {
  nlohmann::json j = {{"stage", s.stage},
                      {"candidates", s.candidates},
                      {"chosen_index", s.chosen_index},
                      {"chosen", GaussianToJson(s.chosen)},
                      {"eps", s.budget.eps},
                      {"delta", s.budget.delta}};
  j["k"] = s.k ? nlohmann::json(*s.k) : nlohmann::json(nullptr);
  return j;
}

// Pairwise Scheffe score S_i = -max_j |(H_i(A_ij) - P(A_ij)) - (H_i(A_ji) - P(A_ji))|
// with P the empirical measure. Changing one point moves each score by at
// most 2 / n.
inline ScoredCandidates MdeScores(const ScheffeTable& table) {
  const Eigen::Index m = table.size();
  ScoredCandidates c;
  c.sensitivity = 2.0 / static_cast<double>(table.n());
  c.scores.assign(static_cast<std::size_t>(m), 0.0);
  const MassTable& masses = table.masses();
  for (Eigen::Index i = 0; i < m; ++i) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      const double r_ij = masses.own(i, j) - table.emp(i, j);
      const double r_ji = masses.cross(i, j) - table.emp(j, i);
      worst = std::max(worst, std::abs(r_ij - r_ji));
    }
    c.scores[static_cast<std::size_t>(i)] = -worst;
  }
  return c;
}

namespace internal {

inline SelectorResult FinishSelection(const ScheffeTable& table, ScoredCandidates scores, std::size_t index,
                                      const std::string& stage, PrivacyBudget budget,
                                      std::optional<long long> k = std::nullopt) {
  SelectorResult r;
  r.chosen = table.hypotheses()[index];
  r.chosen_index = index;
  r.budget_spent = budget;
  r.ledger.Charge(stage, budget);
  r.trace.push_back({stage, static_cast<std::size_t>(table.size()), index, r.chosen, budget, k});
  r.scores_snapshot = std::move(scores);
  return r;
}

inline SelectorResult SingleCandidate(const Gaussian& g, const std::string& stage, PrivacyBudget budget) {
  SelectorResult r;
  r.chosen = g;
  r.budget_spent = budget;
  r.ledger.Charge(stage, budget);
  r.trace.push_back({stage, 1, 0, g, budget, std::nullopt});
  return r;
}

}  // namespace internal

// Private hypothesis selection: exponential mechanism over the pairwise
// Scheffe score. xi, alpha and beta describe the accuracy contract only.
inline SelectorResult Phs(const ScheffeTable& table, double xi, double alpha, double beta, double eps,
                          const RngHandle& rng) {
  (void)xi, (void)alpha, (void)beta;
  ScoredCandidates scores = MdeScores(table);
  const std::size_t index = ExpMech(scores, eps, rng);
  return internal::FinishSelection(table, std::move(scores), index, "phs", {eps, 0.0});
}

// Minimum distance estimate selected with the exponential mechanism at
// sensitivity 2 / n.
inline SelectorResult MdePrivate(const ScheffeTable& table, double alpha, double beta, double eps,
                                 const RngHandle& rng) {
  (void)alpha, (void)beta;
  if (table.n() == 0) throw Error(ErrorCode::kEmptyDataset, "MDE needs data");
  ScoredCandidates scores = MdeScores(table);
  const std::size_t index = ExpMech(scores, eps, rng);
  return internal::FinishSelection(table, std::move(scores), index, "mde", {eps, 0.0});
}

// Number of hypotheses within TV radius of each hypothesis, maximized; the
// masses are data independent so this costs no privacy.
inline long long LocalCountFromTable(const MassTable& masses, double radius) {
  long long best = 1;
  for (Eigen::Index i = 0; i < masses.size(); ++i) {
    long long count = 0;
    for (Eigen::Index j = 0; j < masses.size(); ++j) count += masses.Tv(i, j) <= radius;
    best = std::max(best, count);
  }
  return best;
}

inline SelectorResult GapmaxSelect(const ScheffeTable& table, double xi, double alpha, double beta, double eps,
                                   double delta, long long k, const RngHandle& rng) {
  (void)xi, (void)alpha, (void)beta;
  ScoredCandidates scores = MdeScores(table);
  const std::size_t index = GapMax(scores, eps, delta, k, rng);
  return internal::FinishSelection(table, std::move(scores), index, "gapmax", {eps, delta}, k);
}

struct TableOptions {
  long long n_mc = 4000;
  MassMethod method = MassMethod::kAuto;
  RngHandle mass_rng = RngHandle(0x5eedULL);
  MassCache* cache = nullptr;
};

namespace internal {

inline std::shared_ptr<const MassTable> Masses(const std::vector<Gaussian>& hypotheses,
                                               const TableOptions& options) {
  if (options.cache != nullptr) {
    return options.cache->GetOrBuild(hypotheses, options.n_mc, options.mass_rng, options.method);
  }
  return std::make_shared<const MassTable>(
      BuildMassTable(hypotheses, options.n_mc, options.mass_rng, options.method));
}

inline ScheffeTable MakeTable(std::vector<Gaussian> hypotheses, const Dataset& data, const TableOptions& options) {
  internal::Require(hypotheses.size() >= 2, ErrorCode::kEmptyCandidates, "a Scheffe table needs m >= 2");
  auto masses = Masses(hypotheses, options);
  return ScheffeTable::WithMasses(std::move(hypotheses), std::move(masses), data);
}

}  // namespace internal

// Convenience forms that build the Scheffe table first.
inline SelectorResult Phs(const std::vector<Gaussian>& hypotheses, const Dataset& data, double xi, double alpha,
                          double beta, double eps, const RngHandle& rng, const TableOptions& options = {}) {
  internal::CheckHypotheses(hypotheses);
  if (hypotheses.size() == 1) return internal::SingleCandidate(hypotheses.front(), "phs", {eps, 0.0});
  return Phs(internal::MakeTable(hypotheses, data, options), xi, alpha, beta, eps, rng);
}

inline SelectorResult MdePrivate(const std::vector<Gaussian>& hypotheses, const Dataset& data, double alpha,
                                 double beta, double eps, const RngHandle& rng, const TableOptions& options = {}) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "MDE needs data");
  return MdePrivate(internal::MakeTable(hypotheses, data, options), alpha, beta, eps, rng);
}

inline SelectorResult GapmaxSelect(const Cover& cover, const Dataset& data, double xi, double alpha, double beta,
                                   double eps, double delta, std::optional<long long> k, const RngHandle& rng,
                                   const TableOptions& options = {}) {
  if (cover.elements.empty()) throw Error(ErrorCode::kEmptyCandidates, "empty cover");
  if (cover.size() == 1) {
    auto r = internal::SingleCandidate(cover.elements.front(), "gapmax", {eps, delta});
    r.trace.back().k = k.value_or(1);
    return r;
  }
  ScheffeTable table = internal::MakeTable(cover.elements, data, options);
  const long long kk = k.value_or(LocalCountFromTable(table.masses(), 3.0 * xi + alpha));
  return GapmaxSelect(table, xi, alpha, beta, eps, delta, kk, rng);
}

// Drops the last point of an odd-sized dataset.
inline Dataset PairDifference(const Dataset& data, bool* dropped_last = nullptr) {
  if (data.size() < 2) throw Error(ErrorCode::kFewerThanTwoPoints, "pairing needs at least two points");
  const Eigen::Index half = data.size() / 2;
  if (dropped_last != nullptr) *dropped_last = data.size() % 2 != 0;
  Matrix out(data.dim(), half);
  for (Eigen::Index i = 0; i < half; ++i) {
    out.col(i) = (data.point(2 * i + 1) - data.point(2 * i)) / std::numbers::sqrt2;
  }
  return Dataset(std::move(out));
}

struct Whitening {
  Dataset data;
  // d x r map taking whitened coordinates back: x = unwhiten * w.
  Matrix unwhiten;
  Eigen::Index rank = 0;
};

// Maps each point by the inverse symmetric root of sigma_hat. A singular
// sigma_hat first restricts data to its range, so the output has dimension
// equal to the rank.
inline Whitening WhitenWithMap(const Dataset& data, const Matrix& sigma_hat, const Tolerances& tol = {}) {
  internal::Require(sigma_hat.rows() == data.dim() && sigma_hat.cols() == data.dim(),
                    ErrorCode::kDimensionMismatch, "covariance does not match data");
  const double lambda_min = MinEigenvalue(sigma_hat);
  internal::Require(lambda_min >= -tol.psd, ErrorCode::kNotPsd, "whitening matrix is not PSD");
  if (lambda_min > tol.psd) {
    Whitening w;
    w.data = Dataset(Matrix(InvSqrtPsd(sigma_hat, tol) * data.points()));
    w.unwhiten = SqrtPsd(sigma_hat);
    w.rank = data.dim();
    return w;
  }
  RangeProjection proj = ProjectToRange(sigma_hat, data, tol);
  Whitening w;
  w.data = Dataset(Matrix(InvSqrtPsd(proj.reduced_cov, tol) * proj.reduced_data.points()));
  w.unwhiten = proj.basis * SqrtPsd(proj.reduced_cov);
  w.rank = proj.rank;
  return w;
}

inline Dataset Whiten(const Dataset& data, const Matrix& sigma_hat, const Tolerances& tol = {}) {
  return WhitenWithMap(data, sigma_hat, tol).data;
}

// Mean shift at which two identity-covariance Gaussians are at TV distance
// tv: TV = 2 Phi(|mu1 - mu2| / 2) - 1.
inline double MeanShiftForTv(double tv) {
  internal::Require(tv > 0.0 && tv < 1.0, ErrorCode::kInvalidArgument, "TV target must lie in (0, 1)");
  return 2.0 * std::numbers::sqrt2 * boost::math::erf_inv(tv);
}

// Lattice step whose cells have every point within TV tv of a corner.
inline double StepForTv(double tv, Eigen::Index d) {
  return 2.0 * MeanShiftForTv(tv) / std::sqrt(static_cast<double>(d));
}

namespace internal {

inline TableOptions TableOptionsFor(const LearnerConfig& cfg, MassCache* cache) {
  return {cfg.n_mc, cfg.mass_method, RngHandle(cfg.mass_seed), cache};
}

inline void RequireConstant(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kConstantViolation, what);
}

inline void CheckCommon(double xi, double alpha, double beta, double eps, double delta, const LearnerConfig& cfg) {
  Require(beta > 0.0 && beta < 1.0, ErrorCode::kInvalidArgument, "beta must lie in (0, 1)");
  Require(eps > 0.0, ErrorCode::kInvalidArgument, "eps must be positive");
  Require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  RequireConstant(alpha > 0.0 && alpha < cfg.constants.alpha_max, "alpha outside (0, alpha_max)");
  RequireConstant(xi >= 0.0 && xi < cfg.constants.xi_max, "xi outside [0, xi_max)");
}

// Translated copy of a cover (same covariances).
inline std::vector<Gaussian> Translate(const std::vector<Gaussian>& elements, const Vector& shift) {
  std::vector<Gaussian> out;
  out.reserve(elements.size());
  for (const Gaussian& g : elements) out.emplace_back(g.mean() + shift, g.cov());
  return out;
}

// Runs one selection stage over a data-independent canonical list whose
// affine image `actual` is the real candidate list; masses come from the
// canonical list.
inline ScheffeTable StageTable(const std::vector<Gaussian>& canonical, std::vector<Gaussian> actual,
                               const Dataset& data, const TableOptions& options) {
  Require(canonical.size() >= 2, ErrorCode::kEmptyCandidates, "stage needs at least two candidates");
  return ScheffeTable::WithMasses(std::move(actual), Masses(canonical, options), data);
}

inline void AppendStage(SelectorResult& total, const SelectorResult& stage) {
  total.ledger.Append(stage.ledger);
  total.trace.insert(total.trace.end(), stage.trace.begin(), stage.trace.end());
}

}  // namespace internal

// Location learner for identity-covariance data. Stage 1 picks a coarse
// mean with GAP-MAX over a lattice of the configured region using
// (eps / 2, delta); stage 2 runs PHS with eps / 2 over a fine lattice
// around the coarse choice.
inline SelectorResult Boost1(double b, double xi, double alpha, double beta, double eps, double delta,
                             const LearnerConfig& cfg, const Dataset& data, const RngHandle& rng,
                             MassCache* cache = nullptr) {
  internal::CheckCommon(xi, alpha, beta, eps, delta, cfg);
  internal::Require(b > 0.0, ErrorCode::kInvalidArgument, "b must be positive");
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "boost1 needs data");
  const Eigen::Index d = data.dim();
  const double r_coarse =
      cfg.constants.literal_radii ? 1.0 / (200.0 * (600.0 * b + 1.0)) : cfg.constants.location_coarse_tv;
  const double xi_gm = b * xi + alpha / 4.0;
  const double alpha_gm = r_coarse - 3.0 * alpha / 4.0;
  internal::RequireConstant(alpha_gm > 0.0, "coarse location accuracy " + std::to_string(alpha_gm) +
                                                " is not positive; raise constants.location_coarse_tv");
  const double fine_tv = 3.0 * b * xi + r_coarse;
  const bool strict = cfg.certified_covers || cfg.constants.literal_radii;
  if (strict) internal::RequireConstant(fine_tv < 1.0, "fine location ball radius must stay below TV 1");
  const TableOptions topts = internal::TableOptionsFor(cfg, cache);
  const Vector center = cfg.region.center.size() == 0 ? Vector::Zero(d) : cfg.region.center;
  internal::Require(center.size() == d, ErrorCode::kDimensionMismatch, "region center has the wrong dimension");

  CoverOptions copts;
  copts.c1 = cfg.constants.c1;

  // Stage 1. The lattice is built at the origin so its masses are shared by
  // every region center.
  double coarse_step;
  if (cfg.region.coarse_step) {
    coarse_step = *cfg.region.coarse_step;
  } else if (cfg.certified_covers) {
    coarse_step = LocationCoverStep(alpha_gm, d);
  } else {
    coarse_step = StepForTv(alpha_gm / 4.0, d);
  }
  const Cover coarse = LocationLattice({coarse_step, cfg.region.radius, Gaussian::Standard(d)}, copts);
  SelectorResult total;
  SelectorResult s1;
  if (coarse.size() == 1) {
    s1 = internal::SingleCandidate(Gaussian::Isotropic(center), "gapmax", {eps / 2.0, delta});
  } else {
    ScheffeTable t1 = internal::StageTable(coarse.elements, internal::Translate(coarse.elements, center), data, topts);
    const long long k = cfg.k.value_or(LocalCountFromTable(t1.masses(), 3.0 * xi_gm + alpha_gm));
    s1 = GapmaxSelect(t1, xi_gm, alpha_gm, beta / 2.0, eps / 2.0, delta, k, rng.Split(1));
  }
  internal::AppendStage(total, s1);

  // Stage 2: post-processing of the stage-1 output builds the fine lattice.
  double fine_step, fine_radius;
  if (cfg.certified_covers) {
    fine_step = cfg.region.fine_step.value_or(LocationCoverStep(alpha / 4.0, d));
    fine_radius = cfg.region.fine_radius.value_or(200.0 * fine_tv);
  } else {
    fine_step = cfg.region.fine_step.value_or(StepForTv(alpha / 2.0, d));
    // A ball wider than the coarse search region adds nothing stage 1 could
    // have found; large robustness targets (agnostic rounds) end up here.
    const double reach = fine_tv < 1.0 ? std::min(MeanShiftForTv(fine_tv), cfg.region.radius) : cfg.region.radius;
    fine_radius = cfg.region.fine_radius.value_or(reach);
  }
  const Cover fine = LocationLattice({fine_step, fine_radius, Gaussian::Standard(d)}, copts);
  const double xi_phs = (b + 1.0) * xi + alpha;
  SelectorResult s2;
  if (fine.size() == 1) {
    s2 = internal::SingleCandidate(s1.chosen, "phs", {eps / 2.0, 0.0});
  } else {
    ScheffeTable t2 =
        internal::StageTable(fine.elements, internal::Translate(fine.elements, s1.chosen.mean()), data, topts);
    s2 = Phs(t2, xi_phs, alpha, beta / 2.0, eps / 2.0, rng.Split(2));
  }
  internal::AppendStage(total, s2);
  total.chosen = s2.chosen;
  total.chosen_index = s2.chosen_index;
  total.scores_snapshot = std::move(s2.scores_snapshot);
  total.budget_spent = total.ledger.Total();
  return total;
}

// Full-covariance learner. Pairing removes the mean; a coarse covariance
// comes from GAP-MAX over a log-Euclidean lattice (eps / 4, delta / 2), is
// refined by PHS over a conjugated lattice (eps / 4), and the data whitened
// by the result feed Boost1 with b = 10 (eps / 2, delta / 2).
inline SelectorResult Boost2(double xi, double alpha, double beta, double eps, double delta,
                             const LearnerConfig& cfg, const Dataset& data, const RngHandle& rng,
                             MassCache* cache = nullptr) {
  internal::CheckCommon(xi, alpha, beta, eps, delta, cfg);
  const Dataset paired = PairDifference(data);
  const Eigen::Index d = data.dim();
  const double r_coarse = cfg.constants.literal_radii ? 1.0 / (100.0 * 1201.0) : cfg.constants.scale_coarse_tv;
  const double xi_gm = 4.0 * xi;
  const TableOptions topts = internal::TableOptionsFor(cfg, cache);
  CoverOptions copts;
  copts.c2 = cfg.constants.c2;

  SelectorResult total;
  // Stage 1: coarse covariance.
  const Cover coarse = LogScaleLattice(d, cfg.scale_region.log_step, cfg.scale_region.log_radius, copts);
  SelectorResult s1;
  if (coarse.size() == 1) {
    s1 = internal::SingleCandidate(coarse.elements.front(), "gapmax", {eps / 4.0, delta / 2.0});
  } else {
    ScheffeTable t1 = internal::StageTable(coarse.elements, coarse.elements, paired, topts);
    const long long k1 = cfg.k1.value_or(LocalCountFromTable(t1.masses(), 3.0 * xi_gm + r_coarse));
    s1 = GapmaxSelect(t1, xi_gm, r_coarse, beta / 4.0, eps / 4.0, delta / 2.0, k1, rng.Split(1));
  }
  internal::AppendStage(total, s1);

  // Stage 2: fine covariance around the coarse choice.
  Cover fine_identity;
  if (cfg.certified_covers) {
    CoverOptions relaxed = copts;
    relaxed.c2 = 0.01;
    fine_identity = ScaleCoverIdentity(std::max(xi, alpha / 4.0), d, 12.0 * xi + r_coarse, relaxed);
  } else {
    fine_identity = ScaleLattice(d, cfg.scale_region.fine_step, cfg.scale_region.fine_radius, copts);
  }
  SelectorResult s2;
  if (fine_identity.size() == 1) {
    s2 = internal::SingleCandidate(s1.chosen, "phs", {eps / 4.0, 0.0});
  } else {
    const Cover fine = ConjugateCover(fine_identity, s1.chosen.cov());
    ScheffeTable t2 = internal::StageTable(fine_identity.elements, fine.elements, paired, topts);
    s2 = Phs(t2, 4.0 * xi, alpha, beta / 4.0, eps / 4.0, rng.Split(2));
  }
  internal::AppendStage(total, s2);
  const Matrix sigma_hat = s2.chosen.cov();

  // Stage 3: whitened location.
  const Whitening w = WhitenWithMap(data, sigma_hat);
  LearnerConfig inner = cfg;
  if (inner.region.center.size() != 0 && inner.region.center.size() != w.rank) inner.region.center = Vector();
  SelectorResult s3 = Boost1(10.0, xi, alpha, beta / 2.0, eps / 2.0, delta / 2.0, inner, w.data, rng.Split(3), cache);
  BudgetLedger relabeled;
  for (const LedgerEntry& e : s3.ledger.entries()) relabeled.Charge("boost1/" + e.stage, e.budget);
  total.ledger.Append(relabeled);
  for (StageRecord r : s3.trace) {
    r.stage = "boost1/" + r.stage;
    total.trace.push_back(std::move(r));
  }
  const Vector mu = w.unwhiten * s3.chosen.mean();
  total.chosen = Gaussian(mu, sigma_hat);
  total.chosen_index = s3.chosen_index;
  total.budget_spent = total.ledger.Total();
  return total;
}

// A (xi, C)-robust learner run at the given parameters.
using RobustLearner = std::function<SelectorResult(double xi, double alpha, double beta, double eps, double delta,
                                                   const Dataset& data, const RngHandle& rng)>;

inline int AgnosticRounds(double alpha) {
  internal::Require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  return static_cast<int>(std::ceil(std::log2(1.0 / alpha))) + 4;
}

// xi_t = 2^(t-1) alpha / (12 C) for t = 1 .. T + 4.
inline std::vector<double> AgnosticSchedule(double c, double alpha) {
  std::vector<double> xi;
  const int rounds = AgnosticRounds(alpha);
  for (int t = 1; t <= rounds; ++t) xi.push_back(std::ldexp(alpha / (12.0 * c), t - 1));
  return xi;
}

// Runs the robust learner on a doubling schedule of xi and picks among the
// outputs with private MDE.
inline SelectorResult AgnosticWrap(const RobustLearner& learner, double c, double alpha, double beta, double eps,
                                   double delta, const Dataset& data, const RngHandle& rng,
                                   const TableOptions& options = {}) {
  internal::Require(c > 0.0, ErrorCode::kInvalidArgument, "C must be positive");
  internal::Require(beta > 0.0 && beta < 1.0, ErrorCode::kInvalidArgument, "beta must lie in (0, 1)");
  internal::Require(eps > 0.0, ErrorCode::kInvalidArgument, "eps must be positive");
  const std::vector<double> schedule = AgnosticSchedule(c, alpha);
  const double rounds = static_cast<double>(schedule.size());
  SelectorResult total;
  std::vector<Gaussian> candidates;
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    SelectorResult run = learner(schedule[t], alpha / 12.0, beta / (2.0 * rounds), eps / (2.0 * rounds),
                                 delta / rounds, data, rng.Split(t + 1));
    const std::string prefix = "run" + std::to_string(t + 1) + "/";
    for (const LedgerEntry& e : run.ledger.entries()) total.ledger.Charge(prefix + e.stage, e.budget);
    for (StageRecord r : run.trace) {
      r.stage = prefix + r.stage;
      total.trace.push_back(std::move(r));
    }
    candidates.push_back(run.chosen);
  }
  SelectorResult final_pick = MdePrivate(candidates, data, alpha / 2.0, beta / 2.0, eps / 2.0, rng.Split(0), options);
  internal::AppendStage(total, final_pick);
  total.chosen = final_pick.chosen;
  total.chosen_index = final_pick.chosen_index;
  total.scores_snapshot = std::move(final_pick.scores_snapshot);
  total.budget_spent = total.ledger.Total();
  return total;
}

namespace internal {

inline double Param(const nlohmann::json& p, const char* key) {
  if (!p.contains(key)) throw Error(ErrorCode::kInvalidArgument, std::string("sample size needs '") + key + "'");
  return p.at(key).get<double>();
}

inline double Multiplier(const nlohmann::json& constants, const char* key) {
  return constants.contains(key) ? constants.at(key).get<double>() : 1.0;
}

}  // namespace internal

// Evaluates the sample-size formula of a named result with big-O
// multipliers m_alpha2, m_alpha_eps, m_eps (default 1); natural logs.
// Identifiers: PHS, MDE, GAPMAX, BOOST1, BOOST2, AGNOSTIC.
inline double SampleSizeValue(const std::string& theorem, const nlohmann::json& params,
                              const nlohmann::json& constants = nlohmann::json::object());

// The formula value rounded up.
inline long long SampleSize(const std::string& theorem, const nlohmann::json& params,
                            const nlohmann::json& constants = nlohmann::json::object()) {
  return static_cast<long long>(std::ceil(SampleSizeValue(theorem, params, constants)));
}

inline double SampleSizeValue(const std::string& theorem, const nlohmann::json& params,
                              const nlohmann::json& constants) {
  const double ca = internal::Multiplier(constants, "m_alpha2");
  const double cae = internal::Multiplier(constants, "m_alpha_eps");
  const double ce = internal::Multiplier(constants, "m_eps");
  double n = 0.0;
  if (theorem == "PHS" || theorem == "MDE") {
    const double alpha = internal::Param(params, "alpha"), beta = internal::Param(params, "beta");
    const double l = std::log(internal::Param(params, "m") / beta);
    n = ca * l / (alpha * alpha) + cae * l / (alpha * internal::Param(params, "eps"));
  } else if (theorem == "GAPMAX") {
    const double alpha = internal::Param(params, "alpha"), beta = internal::Param(params, "beta");
    const double eps = internal::Param(params, "eps"), delta = internal::Param(params, "delta");
    double vc;
    if (params.contains("vc")) {
      vc = params.at("vc").get<double>();
    } else {
      const double d = internal::Param(params, "d");
      const bool general = params.value("class", std::string("location")) == "general";
      vc = general ? (d + 2.0) * (d + 1.0) / 2.0 : d + 1.0;
    }
    // The minimum is over log-cardinality of H and log(1/delta); an infinite
    // class (no log_h given) uses log(1/delta).
    double priv = std::log(1.0 / delta);
    if (params.contains("log_h")) priv = std::min(priv, params.at("log_h").get<double>());
    n = ca * (vc + std::log(1.0 / beta)) / (alpha * alpha) +
        cae * (std::log(internal::Param(params, "k") / beta) + priv) / (alpha * eps);
  } else if (theorem == "BOOST1" || theorem == "BOOST2") {
    const double alpha = internal::Param(params, "alpha"), beta = internal::Param(params, "beta");
    const double eps = internal::Param(params, "eps"), delta = internal::Param(params, "delta");
    const double d = internal::Param(params, "d");
    const double dim = theorem == "BOOST1" ? d : d * d;
    const double a = dim + std::log(1.0 / beta);
    n = ca * a / (alpha * alpha) + cae * a / (alpha * eps) + ce * std::log(1.0 / (beta * delta)) / eps;
  } else if (theorem == "AGNOSTIC") {
    const double alpha = internal::Param(params, "alpha"), beta = internal::Param(params, "beta");
    const double eps = internal::Param(params, "eps");
    const double rounds = AgnosticRounds(alpha);
    const double t = rounds - 4.0;
    double inner_n;
    if (params.contains("inner_n")) {
      inner_n = params.at("inner_n").get<double>();
    } else {
      nlohmann::json inner = params;
      inner["alpha"] = alpha / 12.0;
      inner["beta"] = beta / (2.0 * rounds);
      inner["eps"] = eps / (2.0 * rounds);
      if (params.contains("delta")) inner["delta"] = params.at("delta").get<double>() / rounds;
      inner.erase("inner");
      inner_n = static_cast<double>(SampleSize(params.value("inner", std::string("BOOST1")), inner, constants));
    }
    const double l = std::log(t / beta);
    n = inner_n + ca * l / (alpha * alpha) + cae * l / (alpha * eps);
  } else {
    throw Error(ErrorCode::kUnknownTheorem, "unknown result identifier '" + theorem + "'");
  }
  return n;
}

}  // namespace dpgauss

#endif  // DPGAUSS_LEARNERS_HPP_
