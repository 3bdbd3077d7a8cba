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
#include <sstream>
#include <string>
#include <vector>

#include "dpgauss/harness.hpp"
#include "gtest/gtest.h"

namespace dpgauss {
namespace {

ExperimentConfig SmallPhsExperiment() {
  ExperimentConfig c;
  c.learner = "phs";
  c.truth.component = Gaussian::Univariate(0.2, 1);
  c.hypotheses = HypothesesFromJson(nlohmann::json::parse(R"({"grid": {"lo": -1, "hi": 1, "step": 0.25}})"));
  c.n_grid = {100, 400};
  c.trials = 6;
  c.seed = 99;
  c.tv_n_mc = 1000;
  return c;
}

std::string Csv(const std::vector<TrialRecord>& records) {
  std::ostringstream out;
  WriteTrialCsv(records, out);
  return out.str();
}

// Two 1-d datasets whose majority side of x = 0.5 differs: 6 vs 5 points.
std::pair<Dataset, Dataset> CountFlipNeighbors() {
  Matrix pts(1, 11);
  pts << -1.0, -0.8, -0.6, -0.4, -0.2, 0.0, 1.0, 1.2, 1.4, 1.6, 1.8;
  Dataset a(pts);
  Dataset b = a;
  b.point(5)(0) = 2.0;
  return {a, b};
}

TEST(HarnessTest, ZeroTrialsWritesHeaderOnly) {
  ExperimentConfig c = SmallPhsExperiment();
  c.trials = 0;
  EXPECT_EQ(Csv(RunExperiment(c)), std::string(kTrialCsvHeader) + "\n");
}

TEST(HarnessTest, RerunIsByteIdentical) {
  ExperimentConfig c = SmallPhsExperiment();
  const std::string first = Csv(RunExperiment(c));
  c.workers = 3;
  EXPECT_EQ(Csv(RunExperiment(c)), first);
  c.seed = 100;
  EXPECT_NE(Csv(RunExperiment(c)), first);
}

TEST(HarnessTest, RecordsCarryLedgerAndOpt) {
  const auto records = RunExperiment(SmallPhsExperiment());
  ASSERT_EQ(records.size(), 12u);
  EXPECT_FALSE(AnyFailed(records));
  for (const auto& r : records) {
    EXPECT_EQ(r.opt, 0.0);
    EXPECT_TRUE(r.ledger_ok);
    EXPECT_GE(r.tv, 0.0);
  }
  const auto medians = MedianTvByN(records);
  ASSERT_EQ(medians.size(), 2u);
  EXPECT_EQ(medians[0].first, 100);
}

TEST(HarnessTest, FailuresBecomeRows) {
  ExperimentConfig c = SmallPhsExperiment();
  c.learner = "boost1";
  c.learner_config.constants.literal_radii = true;
  c.trials = 2;
  const auto records = RunExperiment(c);
  ASSERT_EQ(records.size(), 4u);
  EXPECT_TRUE(AnyFailed(records));
  EXPECT_EQ(records[0].status, "failed");
  EXPECT_FALSE(records[0].error.empty());
}

TEST(HarnessTest, PlantedOpt) {
  TruthSpec clean{Gaussian::Univariate(0, 1), 0.0, std::nullopt};
  EXPECT_EQ(PlantedOpt(clean, 10, RngHandle(1)).value, 0.0);
  TruthSpec dirty{Gaussian::Univariate(0, 1), 0.05, Gaussian::Univariate(50, 1)};
  EXPECT_NEAR(PlantedOpt(dirty, 200000, RngHandle(1)).value, 0.05, 1e-9);
  EXPECT_NEAR(TvToTruth1d(dirty, dirty.component), 0.05, 1e-9);
  EXPECT_NEAR(TvToTruth1d(clean, Gaussian::Univariate(1, 1)), 0.38292492254802624, 1e-9);
  EXPECT_THROW(ValidateTruth({Gaussian::Univariate(0, 1), 1.0, Gaussian::Univariate(1, 1)}), Error);
}

TEST(HarnessTest, SampleTruthContaminationRate) {
  TruthSpec dirty{Gaussian::Univariate(0, 1), 0.1, Gaussian::Univariate(100, 1)};
  const Dataset d = SampleTruth(dirty, 100000, RngHandle(3));
  const double frac = (d.points().array() > 50.0).cast<double>().mean();
  EXPECT_NEAR(frac, 0.1, 0.005);
}

TEST(HarnessTest, HistogramTvAgreesWithClosedForm) {
  const Dataset d = Sample(Gaussian::Univariate(1, 1), 1000000, RngHandle(4));
  EXPECT_NEAR(HistogramTv1d(d, Gaussian::Univariate(0, 1)), 0.38292492254802624, 0.02);
  EXPECT_LT(HistogramTv1d(d, Gaussian::Univariate(1, 1)), 0.02);
}

TEST(HarnessTest, ExperimentConfigParsing) {
  const auto j = nlohmann::json::parse(R"({
    "learner": "boost2", "n_grid": [10, 20], "trials": 3, "seed": 5,
    "truth": {"mean": [0, 0], "cov": [[1, 0], [0, 1]], "w": 0.1,
              "contaminant": {"mean": [9, 9], "cov": [[1, 0], [0, 1]]}},
    "config": {"eps": 2.0, "alpha": 0.2}})");
  const ExperimentConfig c = ExperimentConfigFromJson(j);
  EXPECT_EQ(c.n_grid, (std::vector<long long>{10, 20}));
  EXPECT_EQ(c.truth.component.dim(), 2);
  EXPECT_DOUBLE_EQ(c.learner_config.eps, 2.0);
  EXPECT_EQ(ConfigHash(c), ConfigHash(ExperimentConfigFromJson(j)));
  try {
    ExperimentConfigFromJson(nlohmann::json::parse(R"({"learner": "nope"})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
  EXPECT_THROW(ExperimentConfigFromJson(nlohmann::json::parse(R"({"n_grid": "x"})")), Error);
}

TEST(HarnessTest, AuditIdenticalDatasetsHasNoFlags) {
  std::vector<Gaussian> hyps = HypothesesFromJson(nlohmann::json::parse(R"({"grid": {"lo": -1, "hi": 1, "step": 0.5}})"));
  const Dataset d = Sample(Gaussian::Univariate(0, 1), 30, RngHandle(5));
  const auto report = PrivacyAudit(MdeAuditMechanism(hyps, 1.0), 1.0, 0.0, d, d, 20000, RngHandle(6));
  EXPECT_EQ(report.flags, 0);
}

TEST(HarnessTest, AuditRejectsNonNeighbors) {
  const Dataset a = Sample(Gaussian::Univariate(0, 1), 10, RngHandle(1));
  const Dataset b = Sample(Gaussian::Univariate(0, 1), 10, RngHandle(2));
  try {
    PrivacyAudit(ArgmaxAuditMechanism({Gaussian::Univariate(0, 1)}), 1.0, 0.0, a, b, 10, RngHandle(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotNeighbors);
  }
}

TEST(HarnessTest, AuditFlagsNoiselessArgmax) {
  const auto [a, b] = CountFlipNeighbors();
  std::vector<Gaussian> hyps = {Gaussian::Univariate(0, 1), Gaussian::Univariate(1, 1)};
  TableOptions opts;
  opts.method = MassMethod::kExact;
  const auto report = PrivacyAudit(ArgmaxAuditMechanism(hyps, opts), 1.0, 0.0, a, b, 1000, RngHandle(7));
  EXPECT_GE(report.flags, 1);
  const auto quiet = PrivacyAudit(MdeAuditMechanism(hyps, 1.0, opts), 1.0, 0.0, a, b, 100000, RngHandle(8));
  EXPECT_EQ(quiet.flags, 0);
  EXPECT_EQ(AuditReportToJson(report)["flags"], report.flags);
}

TEST(HarnessTest, WilsonIntervalContainsEstimate) {
  const auto w = Wilson(30, 100, 1.96);
  EXPECT_LT(w.lo, 0.3);
  EXPECT_GT(w.hi, 0.3);
  EXPECT_EQ(Wilson(0, 100, 1.96).lo, 0.0);
}

TEST(HarnessTest, LocationCoverAudit) {
  const auto r = AuditLocationCover(Vector::Zero(1), 0.05, 0.002, 500, RngHandle(9));
  EXPECT_EQ(r.size, 73u);
  EXPECT_TRUE(r.coverage_pass());
  EXPECT_LE(r.max_certified_tv, 0.05);
  EXPECT_GE(r.local_max_count, 1);
  const auto finer = AuditLocationCover(Vector::Zero(1), 0.025, 0.002, 10, RngHandle(9), 0);
  EXPECT_GT(finer.size, r.size);
}

TEST(HarnessTest, ScaleCoverAudit) {
  const auto r = AuditScaleCover(2, 0.05, 0.001, 200, RngHandle(10));
  EXPECT_TRUE(r.coverage_pass());
  EXPECT_TRUE(r.psd_ok);
  EXPECT_EQ(CoverAuditToJson(r)["coverage_pass"], true);
}

// log |cover| against the number of free covariance entries d(d+1)/2; the
// slope is compared with the one from the continuous ball volume.
TEST(HarnessTest, ScaleCoverLogSizeGrowsWithSquaredDimension) {
  const double xi = 0.05, gamma = 0.002;
  std::vector<double> free, log_size, log_volume;
  for (Eigen::Index d = 1; d <= 3; ++d) {
    const double step = ScaleCoverStep(xi, d, gamma);
    const int dims = static_cast<int>(d * (d + 1) / 2);
    const double count = static_cast<double>(AuditScaleCover(d, xi, gamma, 0, RngHandle(1)).size);
    // Off-diagonal entries enter the Frobenius norm twice.
    const double volume = internal::UnitBallVolume(dims) * std::pow(100 * gamma / step, dims) /
                          std::pow(std::numbers::sqrt2, static_cast<double>(dims - d));
    free.push_back(dims);
    log_size.push_back(std::log(count));
    log_volume.push_back(std::log(volume));
  }
  const double fitted = FitSlope(free, log_size);
  const double predicted = FitSlope(free, log_volume);
  EXPECT_GT(fitted, 0.0);
  EXPECT_NEAR(fitted, predicted, 0.3 * predicted) << "sizes " << std::exp(log_size[0]) << " " << std::exp(log_size[1]) << " " << std::exp(log_size[2]);
}

TEST(HarnessTest, FitSlopeOfLine) {
  EXPECT_NEAR(FitSlope({1, 2, 3}, {2, 4, 6}), 2.0, 1e-12);
  EXPECT_THROW(FitSlope({1}, {1}), Error);
}

}  // namespace
}  // namespace dpgauss
