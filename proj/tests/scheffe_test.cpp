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

#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>

#include "dpgauss/scheffe.hpp"
#include "gtest/gtest.h"

namespace dpgauss {
namespace {

TEST(ScheffeTest, MembershipExcludesTies) {
  const Gaussian a = Gaussian::Univariate(0, 1), b = Gaussian::Univariate(2, 1);
  EXPECT_TRUE(ScheffeMember(a, b, Vector::Constant(1, 0.0)));
  EXPECT_FALSE(ScheffeMember(a, b, Vector::Constant(1, 1.0)));
  EXPECT_FALSE(ScheffeMember(b, a, Vector::Constant(1, 1.0)));
  EXPECT_FALSE(ScheffeMember(a, a, Vector::Constant(1, 0.0)));
}

TEST(ScheffeTest, EmpiricalMassOfHandBuiltData) {
  const Gaussian a = Gaussian::Univariate(0, 1), b = Gaussian::Univariate(2, 1);
  Matrix pts(1, 5);
  pts << -1.0, 0.5, 1.0, 1.5, 3.0;
  const Dataset data(pts);
  EXPECT_DOUBLE_EQ(EmpiricalMass(a, b, data), 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(EmpiricalMass(b, a, data), 2.0 / 5.0);
  EXPECT_THROW(EmpiricalMass(a, b, Dataset(1)), Error);
}

// A_ij = {|x| < c} with c^2 = (8/3) log 2 for N(0,1) against N(0,4).
TEST(ScheffeTest, ExactMassMatchesReference) {
  const Gaussian narrow = Gaussian::Univariate(0, 1), wide = Gaussian::Univariate(0, 4);
  EXPECT_NEAR(*ExactScheffeMass(narrow, narrow, wide), 0.8260295259166017, 1e-12);
  EXPECT_NEAR(*ExactScheffeMass(wide, narrow, wide), 0.5033549570818332, 1e-12);
  Vector m(2);
  m << 0, 0;
  Matrix c1 = Matrix::Identity(2, 2), c2 = 2.0 * Matrix::Identity(2, 2);
  EXPECT_FALSE(ExactScheffeMass(Gaussian(m, c1), Gaussian(m, c1), Gaussian(m, c2)).has_value());
}

TEST(ScheffeTest, MonteCarloMassCoversExactMass) {
  const Gaussian a = Gaussian::Univariate(0.3, 1.4), b = Gaussian::Univariate(-0.5, 0.6);
  const TvEstimate mc = ScheffeMass(a, a, b, 400000, RngHandle(1));
  EXPECT_NEAR(mc.value, *ExactScheffeMass(a, a, b), 3.0 * mc.half_width / kZ95 + 1e-4);
  EXPECT_EQ(ScheffeMass(a, a, a, 1000, RngHandle(1)).value, 0.0);
}

TEST(ScheffeTest, ExactTableReproducesTvThroughIdentity) {
  std::mt19937_64 engine(3);
  std::uniform_real_distribution<double> mean(-3, 3), var(0.2, 4);
  std::vector<Gaussian> hyps;
  for (int i = 0; i < 8; ++i) hyps.push_back(Gaussian::Univariate(mean(engine), var(engine)));
  const MassTable t = BuildMassTable(hyps, 1, RngHandle(0), MassMethod::kExact);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) EXPECT_NEAR(t.Tv(i, j), Tv1d(hyps[i], hyps[j]), 1e-9);
  }
}

TEST(ScheffeTest, HalfSpaceMassesReproduceEqualCovarianceTv) {
  Matrix cov(2, 2);
  cov << 1.5, 0.4, 0.4, 0.8;
  std::vector<Gaussian> hyps;
  for (double x : {0.0, 0.5, -1.0}) hyps.emplace_back(Vector::Constant(2, x), cov);
  const MassTable exact = BuildMassTable(hyps, 1, RngHandle(0), MassMethod::kExact);
  const MassTable mc = BuildMassTable(hyps, 200000, RngHandle(4), MassMethod::kMonteCarlo);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(exact.Tv(i, j), TvEqualCovariance(hyps[i], hyps[j]), 1e-12);
      EXPECT_NEAR(mc.own(i, j), exact.own(i, j), 0.006);
      EXPECT_NEAR(mc.cross(i, j), exact.cross(i, j), 0.006);
    }
  }
}

TEST(ScheffeTest, MassesAreAffineInvariant) {
  Matrix cov(2, 2);
  cov << 1.0, 0.2, 0.2, 1.3;
  std::vector<Gaussian> hyps = {Gaussian::Standard(2), Gaussian(Vector::Zero(2), cov)};
  Matrix a(2, 2);
  a << 2.0, 0.3, -0.1, 0.7;
  Vector b(2);
  b << 5, -2;
  std::vector<Gaussian> moved = {Affine(hyps[0], a, b), Affine(hyps[1], a, b)};
  const MassTable t1 = BuildMassTable(hyps, 200000, RngHandle(6), MassMethod::kMonteCarlo);
  const MassTable t2 = BuildMassTable(moved, 200000, RngHandle(7), MassMethod::kMonteCarlo);
  EXPECT_NEAR(t1.own(0, 1), t2.own(0, 1), 0.006);
  EXPECT_NEAR(t1.cross(1, 0), t2.cross(1, 0), 0.006);
}

TEST(ScheffeTest, TableJsonRoundTrip) {
  std::vector<Gaussian> hyps = {Gaussian::Univariate(0, 1), Gaussian::Univariate(1, 2), Gaussian::Univariate(-1, 1)};
  const MassTable t = BuildMassTable(hyps, 5000, RngHandle(2), MassMethod::kMonteCarlo);
  const MassTable back = MassTable::FromJson(t.ToJson());
  EXPECT_EQ(back.own_matrix(), t.own_matrix());
  EXPECT_EQ(back.cross_matrix(), t.cross_matrix());
  EXPECT_EQ(back.n_mc(), 5000);
}

TEST(ScheffeTest, CacheHitsAndPersists) {
  const std::string path = (std::filesystem::temp_directory_path() / "dpgauss_cache_test.json").string();
  std::remove(path.c_str());
  std::vector<Gaussian> hyps = {Gaussian::Univariate(0, 1), Gaussian::Univariate(1, 3)};
  {
    MassCache cache(path);
    auto first = cache.GetOrBuild(hyps, 3000, RngHandle(1), MassMethod::kMonteCarlo);
    auto second = cache.GetOrBuild(hyps, 3000, RngHandle(1), MassMethod::kMonteCarlo);
    EXPECT_EQ(first.get(), second.get());
    EXPECT_EQ(cache.hits(), 1u);
    EXPECT_EQ(cache.misses(), 1u);
    cache.GetOrBuild(hyps, 3000, RngHandle(2), MassMethod::kMonteCarlo);
    EXPECT_EQ(cache.misses(), 2u);
    cache.Save();
  }
  MassCache reloaded(path);
  const auto t = reloaded.GetOrBuild(hyps, 3000, RngHandle(1), MassMethod::kMonteCarlo);
  EXPECT_EQ(reloaded.hits(), 1u);
  EXPECT_EQ(t->own_matrix(), BuildMassTable(hyps, 3000, RngHandle(1), MassMethod::kMonteCarlo).own_matrix());
  std::remove(path.c_str());
}

TEST(ScheffeTest, EmpiricalMatrixMatchesPairwiseCounts) {
  std::vector<Gaussian> hyps = {Gaussian::Univariate(0, 1), Gaussian::Univariate(1, 2), Gaussian::Univariate(-1, 0.5)};
  const Dataset data = Sample(Gaussian::Univariate(0, 1.5), 300, RngHandle(5));
  const Matrix emp = EmpiricalMassMatrix(hyps, data);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_DOUBLE_EQ(emp(i, j), i == j ? 0.0 : EmpiricalMass(hyps[i], hyps[j], data));
    }
  }
}

TEST(ScheffeTest, TableNeedsTwoHypotheses) {
  const Dataset data = Sample(Gaussian::Univariate(0, 1), 10, RngHandle(5));
  EXPECT_THROW(BuildScheffeTable({Gaussian::Univariate(0, 1)}, data, 100, RngHandle(1)), Error);
  const ScheffeTable t =
      BuildScheffeTable({Gaussian::Univariate(0, 1), Gaussian::Univariate(1, 1)}, data, 100, RngHandle(1));
  EXPECT_EQ(t.size(), 2);
  EXPECT_EQ(t.n(), 10);
}

}  // namespace
}  // namespace dpgauss
