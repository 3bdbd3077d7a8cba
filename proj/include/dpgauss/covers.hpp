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

#ifndef DPGAUSS_COVERS_HPP_
#define DPGAUSS_COVERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dpgauss/error.hpp"
#include "dpgauss/gaussian.hpp"
#include "dpgauss/rng.hpp"
#include "dpgauss/tv.hpp"
#include "json.hpp"

namespace dpgauss {

enum class CoverKind { kLocation, kScale, kTransformedScale, kPacking };

inline std::string CoverKindName(CoverKind kind) {
  switch (kind) {
    case CoverKind::kLocation: return "location";
    case CoverKind::kScale: return "scale";
    case CoverKind::kTransformedScale: return "transformed-scale";
    case CoverKind::kPacking: return "packing";
  }
  return "location";
}

inline CoverKind ParseCoverKind(const std::string& name) {
  if (name == "location") return CoverKind::kLocation;
  if (name == "scale") return CoverKind::kScale;
  if (name == "transformed-scale") return CoverKind::kTransformedScale;
  if (name == "packing") return CoverKind::kPacking;
  throw Error(ErrorCode::kParse, "unknown cover kind '" + name + "'");
}

// A materialized finite hypothesis list. Lattice covers keep elements in
// lexicographic order of their integer lattice coordinates.
struct Cover {
  std::vector<Gaussian> elements;
  double xi = 0.0;
  double gamma = 0.0;
  CoverKind kind = CoverKind::kLocation;
  std::optional<long long> k_bound;
  // For packings: positions of the admitted elements in the candidate list.
  std::vector<std::size_t> source_indices;

  std::size_t size() const { return elements.size(); }
};

// Grid spacing, ball radius and center of a lattice cover.
struct LatticeSpec {
  double step;
  double radius;
  Gaussian center;
};

struct CoverOptions {
  // Upper limits on gamma for the location and scale constructions.
  double c1 = 1.0 / 400.0;
  double c2 = 1.0 / 400.0;
  std::size_t max_elements = 10'000'000;
  // Reject xi >= gamma (the regime where the (gamma/xi)^O(d) size bound is
  // meaningful). Off by default; the coverage certificate holds either way.
  bool enforce_parameter_order = false;
};

namespace internal {

constexpr double kLatticeSlack = 1e-9;

inline double UnitBallVolume(int dim) {
  return std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0);
}

// Calls visit(z) for every integer vector z with sum_k weight[k] z_k^2 <=
// bound, in lexicographic order.
template <typename Visit>
void EnumerateEllipsoid(const std::vector<double>& weight, double bound, Visit&& visit) {
  const std::size_t dim = weight.size();
  std::vector<int> z(dim, 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t k, double remaining) {
    if (k == dim) {
      visit(z);
      return;
    }
    const int reach = static_cast<int>(std::floor(std::sqrt(std::max(0.0, remaining) / weight[k])));
    for (int v = -reach; v <= reach; ++v) {
      const double left = remaining - weight[k] * v * v;
      if (left < 0.0) continue;
      z[k] = v;
      rec(k + 1, left);
    }
    z[k] = 0;
  };
  rec(0, bound);
}

inline void CheckXiGamma(double xi, double gamma, double limit, const CoverOptions& options) {
  internal::Require(xi > 0.0 && xi < 1.0, ErrorCode::kInvalidArgument, "xi must lie in (0, 1)");
  internal::Require(gamma > 0.0 && gamma < limit, ErrorCode::kInvalidArgument,
                    "gamma must lie in (0, " + std::to_string(limit) + ")");
  if (options.enforce_parameter_order && xi >= gamma) {
    throw Error(ErrorCode::kParameterOrder, "xi must be smaller than gamma");
  }
}

inline void CheckCap(double estimate, const CoverOptions& options) {
  if (estimate > 2.0 * static_cast<double>(options.max_elements)) {
    throw Error(ErrorCode::kLatticeExplosion,
                "lattice would hold about " + std::to_string(static_cast<long long>(estimate)) + " elements");
  }
}

}  // namespace internal

// All N(center.mean + step * z, center.cov) with z in Z^d and
// |step * z|_2 <= radius.
inline Cover LocationLattice(const LatticeSpec& spec, const CoverOptions& options = {}) {
  internal::Require(spec.step > 0.0 && spec.radius >= 0.0, ErrorCode::kInvalidArgument,
                    "lattice needs step > 0 and radius >= 0");
  const int d = static_cast<int>(spec.center.dim());
  const double r = spec.radius / spec.step;
  internal::CheckCap(internal::UnitBallVolume(d) * std::pow(r + 0.5 * std::sqrt(d), d), options);
  Cover cover;
  cover.kind = CoverKind::kLocation;
  internal::EnumerateEllipsoid(std::vector<double>(d, 1.0), r * r * (1.0 + internal::kLatticeSlack),
                               [&](const std::vector<int>& z) {
                                 if (cover.elements.size() >= options.max_elements) {
                                   throw Error(ErrorCode::kLatticeExplosion, "location lattice exceeds cap");
                                 }
                                 Vector mean = spec.center.mean();
                                 for (int k = 0; k < d; ++k) mean(k) += spec.step * z[k];
                                 cover.elements.emplace_back(std::move(mean), spec.center.cov());
                               });
  return cover;
}

// Number of z in Z^d with |step * z|_2 <= radius, without materializing.
inline long long CountLocationLattice(Eigen::Index d, double step, double radius) {
  const double r = radius / step;
  long long count = 0;
  internal::EnumerateEllipsoid(std::vector<double>(static_cast<std::size_t>(d), 1.0),
                               r * r * (1.0 + internal::kLatticeSlack), [&](const std::vector<int>&) { ++count; });
  return count;
}

inline double LocationCoverStep(double xi, Eigen::Index d) {
  return 2.0 * xi / (9.0 * std::sqrt(static_cast<double>(d)));
}

// Certified xi-cover of the TV ball of radius gamma around N(center, I)
// among identity-covariance Gaussians: lattice spacing 2 xi / (9 sqrt d)
// over the mean ball of radius 200 gamma.
inline Cover LocationCover(const Vector& center_mu, double xi, double gamma, const CoverOptions& options = {}) {
  internal::CheckXiGamma(xi, gamma, options.c1, options);
  const Eigen::Index d = center_mu.size();
  Cover cover = LocationLattice({LocationCoverStep(xi, d), 200.0 * gamma, Gaussian::Isotropic(center_mu)}, options);
  cover.xi = xi;
  cover.gamma = gamma;
  return cover;
}

// Lattice point of a location cover matched to mu_tilde: coordinates of
// (mu_tilde - center) / step truncated toward zero, so the offset never
// grows and stays inside the cover ball.
inline Vector LocationLatticePoint(const Vector& center_mu, double step, const Vector& mu_tilde) {
  Vector offset = (mu_tilde - center_mu) / step;
  for (Eigen::Index k = 0; k < offset.size(); ++k) offset(k) = std::trunc(offset(k));
  return center_mu + step * offset;
}

namespace internal {

inline std::vector<std::pair<int, int>> UpperTriangle(int d) {
  std::vector<std::pair<int, int>> entries;
  for (int r = 0; r < d; ++r) {
    for (int c = r; c < d; ++c) entries.emplace_back(r, c);
  }
  return entries;
}

inline Matrix SymmetricFromCoords(int d, const std::vector<std::pair<int, int>>& entries,
                                  const std::vector<int>& z, double step) {
  Matrix s = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto [r, c] = entries[k];
    s(r, c) = step * z[k];
    s(c, r) = step * z[k];
  }
  return s;
}

// Calls visit(S) for every symmetric S in step * Z^{d x d} with
// |S|_F <= radius, enumerating the d(d+1)/2 free upper-triangle entries.
template <typename Visit>
void EnumerateSymmetricLattice(int d, double step, double radius, const CoverOptions& options, Visit&& visit) {
  internal::Require(step > 0.0 && radius >= 0.0, ErrorCode::kInvalidArgument,
                    "lattice needs step > 0 and radius >= 0");
  const auto entries = UpperTriangle(d);
  std::vector<double> weight;
  for (const auto& [r, c] : entries) weight.push_back(r == c ? 1.0 : 2.0);
  const int free = static_cast<int>(entries.size());
  const double rr = radius / step;
  const int off = free - d;
  CheckCap(UnitBallVolume(free) * std::pow(rr + 0.5 * std::sqrt(free), free) / std::pow(std::sqrt(2.0), off),
           options);
  std::size_t count = 0;
  EnumerateEllipsoid(weight, rr * rr * (1.0 + kLatticeSlack), [&](const std::vector<int>& z) {
    if (++count > options.max_elements) {
      throw Error(ErrorCode::kLatticeExplosion, "symmetric lattice exceeds cap");
    }
    visit(SymmetricFromCoords(d, entries, z, step));
  });
}

}  // namespace internal

// Number of symmetric D in step * Z^{d x d} with |D|_F <= radius.
inline long long CountSymmetricLattice(Eigen::Index d, double step, double radius) {
  std::vector<double> weight;
  for (const auto& [r, c] : internal::UpperTriangle(static_cast<int>(d))) weight.push_back(r == c ? 1.0 : 2.0);
  const double rr = radius / step;
  long long count = 0;
  internal::EnumerateEllipsoid(weight, rr * rr * (1.0 + internal::kLatticeSlack),
                               [&](const std::vector<int>&) { ++count; });
  return count;
}

// N(0, I + D) for symmetric D in step * Z^{d x d} with |D|_F <= radius,
// keeping only strictly PD I + D.
inline Cover ScaleLattice(Eigen::Index d, double step, double radius, const CoverOptions& options = {}) {
  Cover cover;
  cover.kind = CoverKind::kScale;
  const int dim = static_cast<int>(d);
  internal::EnumerateSymmetricLattice(dim, step, radius, options, [&](const Matrix& delta) {
    Matrix cov = Matrix::Identity(d, d) + delta;
    if (MinEigenvalue(cov) <= 0.0) return;
    cover.elements.emplace_back(Vector::Zero(d), std::move(cov));
  });
  return cover;
}

inline double ScaleCoverStep(double xi, Eigen::Index d, double gamma) {
  const double root = std::sqrt(2.0 * std::numbers::pi * std::numbers::e);
  return xi * root * (1.0 - 100.0 * gamma) / (static_cast<double>(d) + xi * root);
}

// Certified xi-cover of the TV ball of radius gamma around N(0, I) among
// zero-mean Gaussians: symmetric lattice of step
// rho = xi sqrt(2 pi e)(1 - 100 gamma) / (d + xi sqrt(2 pi e)) over the
// Frobenius ball of radius 100 gamma.
inline Cover ScaleCoverIdentity(double xi, Eigen::Index d, double gamma, const CoverOptions& options = {}) {
  internal::CheckXiGamma(xi, gamma, options.c2, options);
  internal::Require(d >= 1, ErrorCode::kInvalidArgument, "dimension must be positive");
  Cover cover = ScaleLattice(d, ScaleCoverStep(xi, d, gamma), 100.0 * gamma, options);
  cover.xi = xi;
  cover.gamma = gamma;
  return cover;
}

// The identity cover conjugated by sigma^{1/2}: N(0, S^{1/2} C S^{1/2}).
inline Cover ConjugateCover(const Cover& identity_cover, const Matrix& sigma, const Tolerances& tol = {}) {
  if (MinEigenvalue(sigma) <= tol.psd) {
    throw Error(ErrorCode::kSingularCovariance, "cover center must be strictly positive definite");
  }
  const Matrix root = SqrtPsd(sigma);
  Cover out;
  out.kind = CoverKind::kTransformedScale;
  out.xi = identity_cover.xi;
  out.gamma = identity_cover.gamma;
  out.k_bound = identity_cover.k_bound;
  out.elements.reserve(identity_cover.size());
  for (const Gaussian& g : identity_cover.elements) {
    out.elements.push_back(Affine(g, root, Vector::Zero(sigma.rows())));
  }
  return out;
}

inline Cover ScaleCoverAt(const Matrix& sigma, double xi, double gamma, const CoverOptions& options = {}) {
  if (MinEigenvalue(sigma) <= Tolerances{}.psd) {
    throw Error(ErrorCode::kSingularCovariance, "cover center must be strictly positive definite");
  }
  return ConjugateCover(ScaleCoverIdentity(xi, sigma.rows(), gamma, options), sigma);
}

// Lattice point of a scale cover matched to sigma: entries of
// (sigma - I) / step truncated toward zero.
inline Matrix ScaleLatticePoint(double step, const Matrix& sigma) {
  Matrix delta = (sigma - Matrix::Identity(sigma.rows(), sigma.cols())) / step;
  for (Eigen::Index i = 0; i < delta.size(); ++i) delta.data()[i] = std::trunc(delta.data()[i]);
  return Matrix::Identity(sigma.rows(), sigma.cols()) + step * delta;
}

// Zero-mean Gaussians N(0, exp(S)) for symmetric S on a lattice of step
// log_step with |S|_F <= log_radius. Used as a coarse, data-independent
// candidate set for scale estimation over a bounded condition-number region.
inline Cover LogScaleLattice(Eigen::Index d, double log_step, double log_radius,
                             const CoverOptions& options = {}) {
  Cover cover;
  cover.kind = CoverKind::kScale;
  internal::EnumerateSymmetricLattice(static_cast<int>(d), log_step, log_radius, options, [&](const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    const Vector expd = eig.eigenvalues().array().exp().matrix();
    Matrix cov = eig.eigenvectors() * expd.asDiagonal() * eig.eigenvectors().transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    cover.elements.emplace_back(Vector::Zero(d), std::move(cov));
  });
  return cover;
}

using TvMetric = std::function<double(const Gaussian&, const Gaussian&)>;

enum class TvMetricKind { kLocationUpperBound, kEqualCovariance, kTv1d, kTv1dExact, kTvMc };

// TV oracle selector. kTvMc uses n_mc draws from a fixed stream.
inline TvMetric MakeTvMetric(TvMetricKind kind, long long n_mc = 100'000, RngHandle rng = RngHandle(0)) {
  switch (kind) {
    case TvMetricKind::kLocationUpperBound:
      return [](const Gaussian& a, const Gaussian& b) { return TvBoundLocation(a.mean(), b.mean()).upper; };
    case TvMetricKind::kEqualCovariance:
      return [](const Gaussian& a, const Gaussian& b) { return TvEqualCovariance(a, b); };
    case TvMetricKind::kTv1d:
      return [](const Gaussian& a, const Gaussian& b) { return Tv1d(a, b); };
    case TvMetricKind::kTv1dExact:
      return [](const Gaussian& a, const Gaussian& b) { return Tv1dExact(a, b); };
    case TvMetricKind::kTvMc:
      return [n_mc, rng](const Gaussian& a, const Gaussian& b) {
        if (a == b) return 0.0;
        return TvMc(a, b, n_mc, rng).value;
      };
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown TV metric");
}

// Scan candidates in order and admit one iff its TV to every admitted element
// exceeds xi. The result is a xi-packing and, being maximal within the
// candidate list, also a xi-cover of it.
inline Cover GreedyMaximalPacking(const std::vector<Gaussian>& candidates, double xi, const TvMetric& metric) {
  Cover packing;
  packing.kind = CoverKind::kPacking;
  packing.xi = xi;
  packing.gamma = xi;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    bool admit = true;
    for (const Gaussian& kept : packing.elements) {
      if (metric(candidates[c], kept) <= xi) {
        admit = false;
        break;
      }
    }
    if (admit) {
      packing.elements.push_back(candidates[c]);
      packing.source_indices.push_back(c);
    }
  }
  return packing;
}

// Largest number of cover elements inside a TV ball of radius gamma around
// any probe.
inline long long LocalSmallnessAudit(const Cover& cover, double gamma, const std::vector<Gaussian>& probes,
                                     const TvMetric& metric) {
  internal::Require(!probes.empty(), ErrorCode::kInvalidArgument, "local smallness audit needs probes");
  long long best = 0;
  for (const Gaussian& probe : probes) {
    long long count = 0;
    for (const Gaussian& e : cover.elements) count += metric(probe, e) <= gamma;
    best = std::max(best, count);
  }
  return best;
}

inline long long LocalSmallnessAudit(const Cover& cover, double gamma, const TvMetric& metric) {
  return LocalSmallnessAudit(cover, gamma, cover.elements, metric);
}

struct PackCoverNumbers {
  // Size of the smallest gamma-cover of the candidates found (greedy set
  // cover, or the maximal packing itself when smaller).
  long long cover_number;
  // Size of the greedy maximal gamma-packing.
  long long packing_number;
};

inline PackCoverNumbers ComputePackCoverNumbers(const std::vector<Gaussian>& candidates, double gamma,
                                                const TvMetric& metric) {
  const std::size_t m = candidates.size();
  if (m == 0) return {0, 0};
  std::vector<std::vector<std::size_t>> ball(m);
  for (std::size_t a = 0; a < m; ++a) {
    ball[a].push_back(a);
    for (std::size_t b = a + 1; b < m; ++b) {
      if (metric(candidates[a], candidates[b]) <= gamma) {
        ball[a].push_back(b);
        ball[b].push_back(a);
      }
    }
  }
  // Greedy maximal packing, reusing the neighbor lists.
  std::vector<char> blocked(m, 0);
  long long packing = 0;
  for (std::size_t c = 0; c < m; ++c) {
    if (blocked[c]) continue;
    ++packing;
    for (std::size_t nb : ball[c]) blocked[nb] = 1;
  }
  // Greedy set cover: repeatedly take the ball covering most uncovered points.
  std::vector<char> covered(m, 0);
  std::size_t remaining = m;
  long long cover = 0;
  while (remaining > 0) {
    std::size_t best = 0, best_gain = 0;
    for (std::size_t c = 0; c < m; ++c) {
      std::size_t gain = 0;
      for (std::size_t nb : ball[c]) gain += !covered[nb];
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    for (std::size_t nb : ball[best]) {
      if (!covered[nb]) {
        covered[nb] = 1;
        --remaining;
      }
    }
    ++cover;
  }
  return {std::min(cover, packing), packing};
}

inline nlohmann::json GaussianToJson(const Gaussian& g) {
  nlohmann::json mean = nlohmann::json::array();
  for (Eigen::Index i = 0; i < g.dim(); ++i) mean.push_back(g.mean()(i));
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < g.dim(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < g.dim(); ++j) row.push_back(g.cov()(i, j));
    cov.push_back(std::move(row));
  }
  return {{"mean", std::move(mean)}, {"cov", std::move(cov)}};
}

inline Vector VectorFromJson(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParse, "expected a number array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline Matrix MatrixFromJson(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParse, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != rows) throw Error(ErrorCode::kParse, "matrix must be square");
    for (Eigen::Index c = 0; c < rows; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline Gaussian GaussianFromJson(const nlohmann::json& j) {
  try {
    return Gaussian(VectorFromJson(j.at("mean")), MatrixFromJson(j.at("cov")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

inline nlohmann::json CoverToJson(const Cover& cover) {
  nlohmann::json elements = nlohmann::json::array();
  for (const Gaussian& g : cover.elements) elements.push_back(GaussianToJson(g));
  nlohmann::json meta = {{"xi", cover.xi}, {"gamma", cover.gamma}, {"kind", CoverKindName(cover.kind)}};
  meta["k_bound"] = cover.k_bound ? nlohmann::json(*cover.k_bound) : nlohmann::json(nullptr);
  return {{"metadata", std::move(meta)}, {"elements", std::move(elements)}};
}

inline Cover CoverFromJson(const nlohmann::json& j) {
  try {
    Cover cover;
    const auto& meta = j.at("metadata");
    cover.xi = meta.at("xi").get<double>();
    cover.gamma = meta.at("gamma").get<double>();
    cover.kind = ParseCoverKind(meta.at("kind").get<std::string>());
    if (meta.contains("k_bound") && !meta.at("k_bound").is_null()) cover.k_bound = meta.at("k_bound").get<long long>();
    for (const auto& e : j.at("elements")) cover.elements.push_back(GaussianFromJson(e));
    return cover;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

}  // namespace dpgauss

#endif  // DPGAUSS_COVERS_HPP_
