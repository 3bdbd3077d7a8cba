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

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "dpgauss/covers.hpp"
#include "gtest/gtest.h"

namespace dpgauss {
namespace {

// Integer points z with sum z_k^2 <= r2, counted by brute force.
long long BruteLatticeCount(int d, long long r2) {
  const auto reach = static_cast<long long>(std::floor(std::sqrt(static_cast<double>(r2)))) + 1;
  long long count = 0;
  std::vector<long long> z(d, -reach);
  while (true) {
    long long s = 0;
    for (long long v : z) s += v * v;
    count += s <= r2;
    int k = 0;
    while (k < d && ++z[k] > reach) z[k++] = -reach;
    if (k == d) break;
  }
  return count;
}

// With xi = 0.05 and gamma = 0.002 the ball radius in lattice units is
// 200 gamma * 9 sqrt(d) / (2 xi) = 36 sqrt(d), so R^2 = 1296 d exactly.
TEST(CoversTest, LocationCoverSizeMatchesLatticeCount) {
  for (int d = 1; d <= 3; ++d) {
    const Cover c = LocationCover(Vector::Zero(d), 0.05, 0.002);
    EXPECT_EQ(static_cast<long long>(c.size()), BruteLatticeCount(d, 1296LL * d)) << "d=" << d;
    EXPECT_EQ(CountLocationLattice(d, LocationCoverStep(0.05, d), 0.4), static_cast<long long>(c.size()));
  }
  EXPECT_EQ(LocationCover(Vector::Zero(1), 0.05, 0.002).size(), 73u);
}

TEST(CoversTest, LocationCoverElementsAreIdentityAndCentered) {
  Vector center(2);
  center << 3.0, -1.0;
  const Cover c = LocationCover(center, 0.1, 0.001);
  std::set<std::pair<long long, long long>> seen;
  for (const Gaussian& g : c.elements) {
    EXPECT_EQ(g.cov(), Matrix::Identity(2, 2));
    EXPECT_LE((g.mean() - center).norm(), 0.2 * (1 + 1e-9));
    const Vector z = (g.mean() - center) / LocationCoverStep(0.1, 2);
    seen.insert({std::llround(z(0)), std::llround(z(1))});
  }
  EXPECT_EQ(seen.size(), c.size());
}

TEST(CoversTest, SizeGrowsAsXiShrinks) {
  std::size_t last = 0;
  for (double xi : {0.2, 0.1, 0.05, 0.02}) {
    const std::size_t size = LocationCover(Vector::Zero(2), xi, 0.002).size();
    EXPECT_GE(size, last);
    last = size;
  }
}

TEST(CoversTest, ParameterChecks) {
  try {
    LocationCover(Vector::Zero(1), 0.05, 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
  CoverOptions strict;
  strict.enforce_parameter_order = true;
  try {
    LocationCover(Vector::Zero(1), 0.05, 0.002, strict);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParameterOrder);
  }
  EXPECT_NO_THROW(LocationCover(Vector::Zero(1), 0.001, 0.002, strict));
  CoverOptions tiny;
  tiny.max_elements = 100;
  try {
    LocationCover(Vector::Zero(3), 0.05, 0.002, tiny);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLatticeExplosion);
  }
}

TEST(CoversTest, TruncatedLatticePointStaysInBallAndCertifies) {
  std::mt19937_64 engine(1);
  std::normal_distribution<double> normal;
  const double xi = 0.05, gamma = 0.002;
  for (int d = 1; d <= 3; ++d) {
    const double step = LocationCoverStep(xi, d);
    for (int t = 0; t < 200; ++t) {
      Vector v(d);
      for (int i = 0; i < d; ++i) v(i) = normal(engine);
      v *= 200 * gamma * std::uniform_real_distribution<double>(0, 1)(engine) / v.norm();
      const Vector p = LocationLatticePoint(Vector::Zero(d), step, v);
      EXPECT_LE(p.norm(), v.norm() + 1e-15);
      EXPECT_LE(TvBoundLocation(v, p).upper, xi * (1 + 1e-9));
    }
  }
}

TEST(CoversTest, ScaleCoverOneDimensionalCount) {
  const double xi = 0.05, gamma = 0.002;
  const double rho = ScaleCoverStep(xi, 1, gamma);
  const Cover c = ScaleCoverIdentity(xi, 1, gamma);
  EXPECT_EQ(static_cast<long long>(c.size()), 2 * static_cast<long long>(std::floor(100 * gamma / rho)) + 1);
}

TEST(CoversTest, ScaleCoverElementsArePdSymmetricAndInBall) {
  const double xi = 0.05, gamma = 0.002;
  for (int d = 1; d <= 3; ++d) {
    const Cover c = ScaleCoverIdentity(xi, d, gamma);
    EXPECT_EQ(static_cast<long long>(c.size()), CountSymmetricLattice(d, ScaleCoverStep(xi, d, gamma), 100 * gamma));
    for (const Gaussian& g : c.elements) {
      EXPECT_GT(MinEigenvalue(g.cov()), 0.0);
      EXPECT_EQ(g.cov(), g.cov().transpose());
      EXPECT_LE((g.cov() - Matrix::Identity(d, d)).norm(), 100 * gamma * (1 + 1e-9));
    }
  }
}

TEST(CoversTest, ScaleCertificateEqualsXiAtLatticeStep) {
  const double xi = 0.05, gamma = 0.001;
  const double rho = ScaleCoverStep(xi, 2, gamma);
  const double root = std::sqrt(2.0 * std::numbers::pi * std::numbers::e);
  EXPECT_NEAR(2 * rho / (root * ((1 - 100 * gamma) - rho)), xi, 1e-15);
}

TEST(CoversTest, ConjugatedCoverMapsIdentityToCenter) {
  Matrix sigma(2, 2);
  sigma << 2.0, 0.5, 0.5, 1.0;
  const Cover c = ScaleCoverAt(sigma, 0.05, 0.002);
  bool found = false;
  for (const Gaussian& g : c.elements) found = found || (g.cov() - sigma).norm() < 1e-12;
  EXPECT_TRUE(found);
  EXPECT_EQ(c.kind, CoverKind::kTransformedScale);
  try {
    ScaleCoverAt(Matrix::Zero(2, 2), 0.05, 0.002);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularCovariance);
  }
}

TEST(CoversTest, LogScaleLatticeContainsIdentity) {
  const Cover c = LogScaleLattice(2, 0.4, 1.5);
  bool identity = false;
  for (const Gaussian& g : c.elements) {
    EXPECT_GT(MinEigenvalue(g.cov()), 0.0);
    identity = identity || (g.cov() - Matrix::Identity(2, 2)).norm() < 1e-12;
  }
  EXPECT_TRUE(identity);
  EXPECT_EQ(static_cast<long long>(c.size()), CountSymmetricLattice(2, 0.4, 1.5));
}

TEST(CoversTest, GreedyPackingIsSeparatedAndCovering) {
  std::mt19937_64 engine(4);
  std::uniform_real_distribution<double> mean(-3, 3), sd(0.5, 2);
  std::vector<Gaussian> candidates;
  for (int i = 0; i < 500; ++i) {
    const double s = sd(engine);
    candidates.push_back(Gaussian::Univariate(mean(engine), s * s));
  }
  const TvMetric metric = MakeTvMetric(TvMetricKind::kTv1dExact);
  const Cover p = GreedyMaximalPacking(candidates, 0.1, metric);
  for (std::size_t a = 0; a < p.size(); ++a) {
    EXPECT_EQ(p.elements[a], candidates[p.source_indices[a]]);
    for (std::size_t b = a + 1; b < p.size(); ++b) EXPECT_GT(metric(p.elements[a], p.elements[b]), 0.1);
  }
  for (const Gaussian& c : candidates) {
    double nearest = 1.0;
    for (const Gaussian& e : p.elements) nearest = std::min(nearest, metric(c, e));
    EXPECT_LE(nearest, 0.1);
  }
}

TEST(CoversTest, PackCoverSandwich) {
  std::mt19937_64 engine(8);
  std::uniform_real_distribution<double> mean(-2, 2), sd(0.5, 1.5);
  const TvMetric metric = MakeTvMetric(TvMetricKind::kTv1dExact);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Gaussian> candidates;
    for (int i = 0; i < 150; ++i) {
      const double s = sd(engine);
      candidates.push_back(Gaussian::Univariate(mean(engine), s * s));
    }
    const double gamma = 0.1;
    const PackCoverNumbers at = ComputePackCoverNumbers(candidates, gamma, metric);
    const PackCoverNumbers twice = ComputePackCoverNumbers(candidates, 2 * gamma, metric);
    EXPECT_LE(twice.packing_number, at.cover_number);
    EXPECT_LE(at.cover_number, at.packing_number);
  }
}

TEST(CoversTest, LocalSmallnessCountsOwnBall) {
  const Cover c = LocationCover(Vector::Zero(1), 0.05, 0.002);
  const long long k = LocalSmallnessAudit(c, 0.002, MakeTvMetric(TvMetricKind::kEqualCovariance));
  // TV 0.002 is a mean gap of about 0.005, below the lattice step 2 xi / 9.
  EXPECT_EQ(k, 1);
}

TEST(CoversTest, CoverJsonRoundTrip) {
  Cover c = ScaleCoverIdentity(0.05, 2, 0.002);
  c.k_bound = 7;
  const Cover back = CoverFromJson(CoverToJson(c));
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(back.elements[i], c.elements[i]);
  EXPECT_EQ(back.kind, CoverKind::kScale);
  EXPECT_EQ(back.k_bound, 7);
  EXPECT_DOUBLE_EQ(back.xi, 0.05);
  EXPECT_THROW(CoverFromJson(nlohmann::json::parse(R"({"elements": []})")), Error);
}

}  // namespace
}  // namespace dpgauss
