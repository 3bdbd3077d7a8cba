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

#ifndef DPGAUSS_TV_HPP_
#define DPGAUSS_TV_HPP_

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "dpgauss/error.hpp"
#include "dpgauss/gaussian.hpp"
#include "dpgauss/rng.hpp"

namespace dpgauss {

inline constexpr double kZ95 = 1.959963984540054;

inline double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Point estimate of a probability-like quantity with a 95% half-width.
struct TvEstimate {
  double value = 0.0;
  double half_width = 0.0;
  long long n_mc = 0;
};

// Open interval (lo, hi); infinite endpoints allowed.
struct Interval {
  double lo;
  double hi;
};

namespace internal {

inline void RequireUnivariate(const Gaussian& g) {
  internal::Require(g.dim() == 1, ErrorCode::kWrongDimension, "expected a 1-d Gaussian");
  if (!(g.cov()(0, 0) > 0.0)) {
    throw Error(ErrorCode::kSingularCovariance, "1-d Gaussian with zero variance");
  }
}

// Integrates |f - g| over [lo, hi] split into equal panels; adaptive
// Gauss-Kronrod on each panel absorbs the kinks where f and g cross.
template <typename F, typename G>
double IntegrateAbsDifference(F f, G g, double lo, double hi, int panels = 32) {
  const double width = (hi - lo) / panels;
  double total = 0.0;
  auto integrand = [&](double x) { return std::abs(f(x) - g(x)); };
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * width;
    const double b = (p + 1 == panels) ? hi : a + width;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, b, 12, 1e-13);
  }
  return total;
}

inline double NormalPdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace internal

// 1-d total variation by adaptive quadrature of 0.5 * |p - q| over the union
// of the two 12-sigma intervals.
inline double Tv1d(const Gaussian& g1, const Gaussian& g2) {
  internal::RequireUnivariate(g1);
  internal::RequireUnivariate(g2);
  const double m1 = g1.mean()(0), s1 = std::sqrt(g1.cov()(0, 0));
  const double m2 = g2.mean()(0), s2 = std::sqrt(g2.cov()(0, 0));
  if (m1 == m2 && s1 == s2) return 0.0;
  const double lo = std::min(m1 - 12 * s1, m2 - 12 * s2);
  const double hi = std::max(m1 + 12 * s1, m2 + 12 * s2);
  auto p = [&](double x) { return internal::NormalPdf(x, m1, s1); };
  auto q = [&](double x) { return internal::NormalPdf(x, m2, s2); };
  return std::clamp(0.5 * internal::IntegrateAbsDifference(p, q, lo, hi), 0.0, 1.0);
}

// The set {x : p_i(x) > p_j(x)} for 1-d Gaussians, as disjoint open
// intervals in increasing order. Ties (including p_i == p_j) are excluded.
inline std::vector<Interval> ScheffeIntervals1d(const Gaussian& h_i, const Gaussian& h_j) {
  internal::RequireUnivariate(h_i);
  internal::RequireUnivariate(h_j);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double a = h_i.mean()(0), vi = h_i.cov()(0, 0);
  const double b = h_j.mean()(0), vj = h_j.cov()(0, 0);
  // log p_i - log p_j = qa x^2 + qb x + qc
  const double qa = 0.5 / vj - 0.5 / vi;
  const double qb = a / vi - b / vj;
  const double qc = 0.5 * std::log(vj / vi) - 0.5 * a * a / vi + 0.5 * b * b / vj;
  if (qa == 0.0) {
    if (qb > 0.0) return {{-qc / qb, kInf}};
    if (qb < 0.0) return {{-kInf, -qc / qb}};
    if (qc > 0.0) return {{-kInf, kInf}};
    return {};
  }
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc <= 0.0) {
    if (qa > 0.0) return {{-kInf, kInf}};
    return {};
  }
  const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
  double r1 = q / qa;
  double r2 = (q != 0.0) ? qc / q : -r1;
  if (r1 > r2) std::swap(r1, r2);
  if (qa > 0.0) return {{-kInf, r1}, {r2, kInf}};
  return {{r1, r2}};
}

inline double NormalIntervalMass(const Gaussian& source, const std::vector<Interval>& set) {
  internal::RequireUnivariate(source);
  const double m = source.mean()(0), s = std::sqrt(source.cov()(0, 0));
  double mass = 0.0;
  for (const Interval& iv : set) {
    const double zlo = (iv.lo - m) / s, zhi = (iv.hi - m) / s;
    // Subtract in the tail closer to the interval for accuracy.
    if (zlo > 0.0) {
      mass += NormalCdf(-zlo) - NormalCdf(-zhi);
    } else {
      mass += NormalCdf(zhi) - NormalCdf(zlo);
    }
  }
  return std::clamp(mass, 0.0, 1.0);
}

// Closed-form 1-d total variation: g1(A) - g2(A) on the Scheffe set A of
// (g1, g2).
inline double Tv1dExact(const Gaussian& g1, const Gaussian& g2) {
  const auto set = ScheffeIntervals1d(g1, g2);
  return std::clamp(NormalIntervalMass(g1, set) - NormalIntervalMass(g2, set), 0.0, 1.0);
}

// Monte-Carlo TV as E_{x~g1}[max(0, 1 - q(x)/p(x))]; unbiased and bounded
// in [0, 1].
inline TvEstimate TvMc(const Gaussian& g1, const Gaussian& g2, long long n_mc, const RngHandle& rng,
                       const Tolerances& tol = {}) {
  internal::Require(n_mc >= 1, ErrorCode::kInvalidArgument, "n_mc must be positive");
  internal::Require(g1.dim() == g2.dim(), ErrorCode::kDimensionMismatch, "TV between different dimensions");
  const DensityEvaluator p(g1, tol);
  const DensityEvaluator q(g2, tol);
  Engine engine = rng.MakeEngine();
  const Matrix root = SqrtPsd(g1.cov());
  constexpr long long kBatch = 1 << 14;
  double sum = 0.0, sum_sq = 0.0;
  for (long long done = 0; done < n_mc; done += kBatch) {
    const long long count = std::min(kBatch, n_mc - done);
    Matrix x = root * StandardNormalMatrix(g1.dim(), count, engine);
    x.colwise() += g1.mean();
    const Vector lp = p.LogDensities(x);
    const Vector lq = q.LogDensities(x);
    for (long long k = 0; k < count; ++k) {
      const double v = std::max(0.0, 1.0 - std::exp(lq(k) - lp(k)));
      sum += v;
      sum_sq += v * v;
    }
  }
  const double n = static_cast<double>(n_mc);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean);
  return {mean, kZ95 * std::sqrt(var / n), n_mc};
}

// Exact TV between Gaussians sharing a covariance: 2 Phi(D / 2) - 1 with D
// the Mahalanobis distance between the means.
inline double TvEqualCovariance(const Gaussian& g1, const Gaussian& g2) {
  internal::Require(g1.dim() == g2.dim(), ErrorCode::kDimensionMismatch, "dimensions differ");
  internal::Require((g1.cov() - g2.cov()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + g1.cov().cwiseAbs().maxCoeff()),
                    ErrorCode::kInvalidArgument, "covariances differ");
  const Vector diff = g1.mean() - g2.mean();
  const double maha = std::sqrt(std::max(0.0, diff.dot(g1.cov().ldlt().solve(diff))));
  return 2.0 * NormalCdf(0.5 * maha) - 1.0;
}

struct TvBounds {
  double lower;
  double upper;
};

// Two-sided TV bounds for identity-covariance Gaussians in terms of the mean
// gap: (1/200) min{1, |gap|} <= TV <= (9/2) min{1, |gap|}, upper clamped to 1.
inline TvBounds TvBoundLocation(const Vector& mu1, const Vector& mu2) {
  internal::Require(mu1.size() == mu2.size(), ErrorCode::kDimensionMismatch, "mean lengths differ");
  const double gap = std::min(1.0, (mu1 - mu2).norm());
  return {gap / 200.0, std::min(1.0, 4.5 * gap)};
}

// Lower bound on TV(N(0, I), N(0, sigma)): (1/100) min{1, |sigma - I|_F}.
inline double TvBoundScaleLower(const Matrix& sigma) {
  internal::Require(sigma.rows() == sigma.cols(), ErrorCode::kDimensionMismatch, "matrix must be square");
  const double frob = (sigma - Matrix::Identity(sigma.rows(), sigma.cols())).norm();
  return std::min(1.0, frob) / 100.0;
}

// Upper bound on TV(N(0, sigma), N(0, sigma_hat)) given entry-wise closeness
// rho_prime and lambda_min(sigma) > eta > rho_prime:
// d rho' / (sqrt(2 pi e) (eta - rho')), clamped to 1.
inline double TvUpperValiant(const Matrix& sigma, const Matrix& sigma_hat, double eta, double rho_prime) {
  internal::Require(sigma.rows() == sigma_hat.rows() && sigma.cols() == sigma_hat.cols(),
                    ErrorCode::kDimensionMismatch, "covariance shapes differ");
  if (!(eta > rho_prime) || rho_prime < 0.0) {
    throw Error(ErrorCode::kPreconditionViolated, "need eta > rho' >= 0");
  }
  const double entry_gap = (sigma - sigma_hat).cwiseAbs().maxCoeff();
  if (entry_gap > rho_prime * (1.0 + 1e-12)) {
    throw Error(ErrorCode::kPreconditionViolated, "entry-wise gap exceeds rho'");
  }
  if (!(MinEigenvalue(sigma) > eta)) {
    throw Error(ErrorCode::kPreconditionViolated, "smallest eigenvalue of sigma must exceed eta");
  }
  const double d = static_cast<double>(sigma.rows());
  const double root = std::sqrt(2.0 * std::numbers::pi * std::numbers::e);
  return std::min(1.0, d * rho_prime / (root * (eta - rho_prime)));
}

}  // namespace dpgauss

#endif  // DPGAUSS_TV_HPP_
