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

// Desk-scale acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dpgauss/dpgauss.hpp"

namespace dpgauss {
namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string Fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

std::vector<Gaussian> Grid21() {
  std::vector<Gaussian> out;
  for (int i = 0; i <= 20; ++i) out.push_back(Gaussian::Univariate(-2.0 + 0.2 * i, 1.0));
  return out;
}

Gaussian RandomGaussian2(std::mt19937_64& engine) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.3, 2.0);
  Vector m(2);
  m << normal(engine), normal(engine);
  const double off = 0.3 * normal(engine);
  Matrix c(2, 2);
  c << unit(engine), off, off, unit(engine);
  c += (std::abs(off) + 0.1) * Matrix::Identity(2, 2);
  return Gaussian(m, c);
}

Outcome Sensitivity() {
  std::mt19937_64 engine(1001);
  std::normal_distribution<double> normal;
  const int n = 20;
  double worst = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    std::vector<Gaussian> hyps;
    for (int i = 0; i < 10; ++i) hyps.push_back(RandomGaussian2(engine));
    const Dataset d = Sample(Gaussian::Standard(2), n, RngHandle(1, pair));
    Dataset d2 = d;
    Vector moved(2);
    moved << 3.0 * normal(engine), 3.0 * normal(engine);
    d2.point(pair % n) = moved;
    auto masses = std::make_shared<const MassTable>(BuildMassTable(hyps, 2000, RngHandle(2, pair)));
    const auto a = MdeScores(ScheffeTable::WithMasses(hyps, masses, d));
    const auto b = MdeScores(ScheffeTable::WithMasses(hyps, masses, d2));
    for (int i = 0; i < 10; ++i) worst = std::max(worst, std::abs(a.scores[i] - b.scores[i]));
  }
  return {worst <= 2.0 / n + 1e-12 && worst >= 0.099, Fmt("max score change %.6f (bound 0.1, need >= 0.099)", worst)};
}

Outcome ExpMechUtility() {
  ScoredCandidates c;
  for (int i = 0; i < 100; ++i) c.scores.push_back(-0.5 * i);
  c.sensitivity = 1.0;
  const double eps = 1.0, beta = 0.1;
  const double threshold = 0.0 - 2.0 * c.sensitivity * std::log(100 / beta) / eps;
  Engine engine = RngHandle(2002).MakeEngine();
  int below = 0;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) below += c.scores[ExpMech(c, eps, engine)] < threshold;
  const double frac = below / double(draws);
  return {frac <= beta, Fmt("fraction below S* - 2 ln(m/beta)/eps: %.4f (limit 0.1)", frac)};
}

Outcome ScheffeIdentity() {
  std::mt19937_64 engine(3003);
  std::uniform_real_distribution<double> mean(-2.0, 2.0), logvar(std::log(0.25), std::log(4.0));
  double worst = 0.0;
  for (int p = 0; p < 50; ++p) {
    const std::vector<Gaussian> pair = {Gaussian::Univariate(mean(engine), std::exp(logvar(engine))),
                                        Gaussian::Univariate(mean(engine), std::exp(logvar(engine)))};
    const MassTable t = BuildMassTable(pair, 1'000'000, RngHandle(3, p), MassMethod::kMonteCarlo);
    const double twice = (t.own(0, 1) - t.cross(1, 0)) + (t.own(1, 0) - t.cross(0, 1));
    worst = std::max(worst, std::abs(twice - 2.0 * Tv1d(pair[0], pair[1])));
  }
  return {worst <= 0.01, Fmt("max |2 TV_scheffe - 2 TV_1d| = %.5f over 50 pairs (limit 0.01)", worst)};
}

long long IntegerBallCount(int d, long long r2) {
  const auto r = static_cast<long long>(std::floor(std::sqrt(static_cast<double>(r2)))) + 1;
  std::function<long long(int, long long)> rec = [&](int left, long long budget) -> long long {
    if (left == 0) return 1;
    long long total = 0;
    for (long long z = -r; z <= r; ++z) {
      if (z * z <= budget) total += rec(left - 1, budget - z * z);
    }
    return total;
  };
  return rec(d, r2);
}

Outcome LocationCoverCriterion() {
  bool pass = true;
  std::string detail;
  for (int d = 1; d <= 3; ++d) {
    // Radius 200 gamma over step 2 xi / (9 sqrt d) is 36 sqrt d lattice units.
    const long long oracle = IntegerBallCount(d, 1296LL * d);
    const auto r = AuditLocationCover(Vector::Zero(d), 0.05, 0.002, 500, RngHandle(4, d), 0);
    pass = pass && r.coverage_pass() && static_cast<long long>(r.size) == oracle;
    detail += Fmt("d=%.0f size %.0f oracle %.0f certified %.0f/500; ", d, static_cast<double>(r.size),
                  static_cast<double>(oracle), static_cast<double>(r.certified));
  }
  return {pass, detail};
}

Outcome ScaleCoverCriterion() {
  const auto r = AuditScaleCover(2, 0.05, 0.001, 200, RngHandle(5005));
  return {r.coverage_pass() && r.psd_ok,
          Fmt("size %.0f certified %.0f/200 max certified TV %.4f psd %.0f", static_cast<double>(r.size),
              static_cast<double>(r.certified), r.max_certified_tv, r.psd_ok ? 1.0 : 0.0)};
}

std::vector<Gaussian> RandomUnivariates(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> mean(-3.0, 3.0), logvar(std::log(0.25), std::log(4.0));
  std::vector<Gaussian> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(Gaussian::Univariate(mean(engine), std::exp(logvar(engine))));
  return out;
}

Outcome PackingIsCover() {
  const TvMetric metric = MakeTvMetric(TvMetricKind::kTv1dExact);
  const auto candidates = RandomUnivariates(10000, 6006);
  const Cover packing = GreedyMaximalPacking(candidates, 0.1, metric);
  double worst = 0.0;
  for (const Gaussian& c : candidates) {
    double nearest = 1.0;
    for (const Gaussian& e : packing.elements) nearest = std::min(nearest, metric(c, e));
    worst = std::max(worst, nearest);
  }
  bool sandwich = true;
  for (int s = 0; s < 20; ++s) {
    const auto set = RandomUnivariates(300, 7000 + s);
    const double gamma = 0.1;
    const PackCoverNumbers at = ComputePackCoverNumbers(set, gamma, metric);
    const PackCoverNumbers wide = ComputePackCoverNumbers(set, 2 * gamma, metric);
    sandwich = sandwich && wide.packing_number <= at.cover_number && at.cover_number <= at.packing_number;
  }
  return {worst <= 0.1 && sandwich, Fmt("packing size %.0f, max nearest TV %.4f, sandwich on 20 sets %.0f",
                                        static_cast<double>(packing.size()), worst, sandwich ? 1.0 : 0.0)};
}

Outcome MdeAgnosticContract() {
  const auto grid = Grid21();
  const double alpha = 0.15, beta = 0.05, eps = 1.0;
  const long long n = SampleSize("MDE", {{"m", 21}, {"alpha", alpha}, {"beta", beta}, {"eps", eps}});
  MassCache cache;
  TableOptions opts;
  opts.cache = &cache;
  const TruthSpec clean{Gaussian::Univariate(0.4, 1), 0.0, std::nullopt};
  const TruthSpec dirty{Gaussian::Univariate(0.4, 1), 0.05, Gaussian::Univariate(50, 1)};
  double opt = 1.0;
  for (const Gaussian& h : grid) opt = std::min(opt, TvToTruth1d(dirty, h));
  int realizable = 0, contaminated = 0;
  for (int t = 0; t < 200; ++t) {
    const auto a = MdePrivate(grid, SampleTruth(clean, n, RngHandle(8, t)), alpha, beta, eps, RngHandle(9, t), opts);
    realizable += TvToTruth1d(clean, a.chosen) <= alpha;
    const auto b = MdePrivate(grid, SampleTruth(dirty, n, RngHandle(10, t)), alpha, beta, eps, RngHandle(11, t), opts);
    contaminated += TvToTruth1d(dirty, b.chosen) <= 3 * opt + alpha;
  }
  return {realizable >= 190 && contaminated >= 180,
          Fmt("n=%.0f realizable %.0f/200 (need 190), OPT %.4f contaminated %.0f/200 (need 180)",
              static_cast<double>(n), realizable, opt, contaminated)};
}

ExperimentConfig Boost2Sweep() {
  ExperimentConfig c;
  c.learner = "boost2";
  Vector mu(2);
  mu << 1.0, 2.0;
  Matrix cov(2, 2);
  cov << 2.0, 0.5, 0.5, 1.0;
  c.truth.component = Gaussian(mu, cov);
  c.learner_config.eps = 2.0;
  c.learner_config.delta = 1e-6;
  c.learner_config.alpha = 0.15;
  c.n_grid = {200, 400, 800, 1600};
  c.trials = 30;
  c.seed = 8008;
  return c;
}

Outcome Boost2EndToEnd(MassCache& cache, std::vector<TrialRecord>& records) {
  records = RunExperiment(Boost2Sweep(), &cache);
  const auto medians = MedianTvByN(records);
  bool monotone = medians.size() == 4 && !AnyFailed(records);
  std::string detail = "medians";
  for (std::size_t i = 0; i < medians.size(); ++i) {
    detail += Fmt(" n=%.0f:%.4f", static_cast<double>(medians[i].first), medians[i].second);
    if (i > 0) monotone = monotone && medians[i].second <= medians[i - 1].second;
  }
  int good = 0, total = 0;
  for (const TrialRecord& r : records) {
    if (r.n != 1600) continue;
    ++total;
    good += r.status == "ok" && r.tv <= 0.15;
  }
  detail += Fmt("; final n within 0.15: %.0f/%.0f", good, total);
  return {monotone && total == 30 && good >= 27, detail};
}

Outcome Ledgers(MassCache& cache, const std::vector<TrialRecord>& boost2) {
  ExperimentConfig b1;
  b1.learner = "boost1";
  Vector mu(2);
  mu << 3.0, -4.0;
  b1.truth.component = Gaussian::Isotropic(mu);
  b1.n_grid = {1000};
  b1.trials = 10;
  b1.seed = 9009;
  b1.tv_n_mc = 10000;

  ExperimentConfig ag;
  ag.learner = "agnostic";
  ag.agnostic_inner = "boost1";
  ag.truth = {Gaussian::Univariate(0.7, 1), 0.05, Gaussian::Univariate(30, 1)};
  ag.learner_config.alpha = 0.25;
  ag.n_grid = {3000};
  ag.trials = 5;
  ag.seed = 9010;
  ag.tv_n_mc = 10000;
  ag.opt_n_mc = 10000;

  int checked = 0, ok = 0;
  auto tally = [&](const std::vector<TrialRecord>& records) {
    for (const TrialRecord& r : records) {
      ++checked;
      ok += r.status == "ok" && r.ledger_ok;
    }
  };
  tally(boost2);
  tally(RunExperiment(b1, &cache));
  tally(RunExperiment(ag, &cache));
  return {checked > 0 && ok == checked, Fmt("%.0f/%.0f records compose to the configured budget", ok, checked)};
}

// Exponential mechanism over bin counts of 1-d data; one replaced point moves
// each count by at most 1.
AuditMechanism CountingExpMech(double eps) {
  return [eps](const Dataset& data) -> AuditSampler {
    ScoredCandidates c;
    c.scores.assign(10, 0.0);
    c.sensitivity = 1.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const int bin = std::clamp(static_cast<int>(std::floor(data.point(i)(0) + 5.0)), 0, 9);
      c.scores[bin] += 1.0;
    }
    auto probs = std::make_shared<std::vector<double>>(ExpMechProbabilities(c, eps));
    return [probs](Engine& engine) {
      return std::discrete_distribution<std::size_t>(probs->begin(), probs->end())(engine);
    };
  };
}

Outcome PrivacyAuditCriterion() {
  const double eps = 1.0;
  const long long runs = 100000;
  Dataset d = Sample(Gaussian::Univariate(0, 2), 50, RngHandle(10010));
  Dataset d_prime = d;
  d_prime.point(0)(0) = 4.5;
  const auto exp_report = PrivacyAudit(CountingExpMech(eps), eps, 0.0, d, d_prime, runs, RngHandle(10011));

  std::vector<Gaussian> hyps;
  for (int i = 0; i < 10; ++i) hyps.push_back(Gaussian::Univariate(-1.0 + 0.25 * i, 1.0));
  TableOptions opts;
  opts.method = MassMethod::kExact;
  const auto mde_report = PrivacyAudit(MdeAuditMechanism(hyps, eps, opts), eps, 0.0, d, d_prime, runs, RngHandle(10012));

  Matrix pts(1, 11);
  pts << -1.0, -0.8, -0.6, -0.4, -0.2, 0.0, 1.0, 1.2, 1.4, 1.6, 1.8;
  Dataset a(pts);
  Dataset b = a;
  b.point(5)(0) = 2.0;
  const auto control = PrivacyAudit(ArgmaxAuditMechanism({Gaussian::Univariate(0, 1), Gaussian::Univariate(1, 1)}, opts),
                                    eps, 0.0, a, b, runs, RngHandle(10013));
  return {exp_report.flags == 0 && mde_report.flags == 0 && control.flags >= 1,
          Fmt("exp_mech flags %.0f, mde_private flags %.0f, argmax control flags %.0f", exp_report.flags,
              mde_report.flags, control.flags)};
}

Outcome PairingStep() {
  const TruthSpec truth{Gaussian::Univariate(0, 1), 0.05, Gaussian::Univariate(10, 1)};
  const Dataset paired = PairDifference(SampleTruth(truth, 2'000'000, RngHandle(11011)));
  const double tv = HistogramTv1d(paired, Gaussian::Univariate(0, 1));
  // Closed-form value for the paired law of this mixture, by quadrature.
  const double oracle = 0.0949455569917939;
  return {tv <= 0.18, Fmt("histogram TV %.4f (limit 0.18, quadrature value %.4f)", tv, oracle)};
}

}  // namespace
}  // namespace dpgauss

int main() {
  using dpgauss::Outcome;
  dpgauss::MassCache cache;
  std::vector<dpgauss::TrialRecord> boost2;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sensitivity", dpgauss::Sensitivity},
      {"exp-mech-utility", dpgauss::ExpMechUtility},
      {"scheffe-tv-identity", dpgauss::ScheffeIdentity},
      {"location-cover", dpgauss::LocationCoverCriterion},
      {"scale-cover", dpgauss::ScaleCoverCriterion},
      {"packing-is-cover", dpgauss::PackingIsCover},
      {"mde-agnostic", dpgauss::MdeAgnosticContract},
      {"boost2-end-to-end", [&] { return dpgauss::Boost2EndToEnd(cache, boost2); }},
      {"budget-ledgers", [&] { return dpgauss::Ledgers(cache, boost2); }},
      {"privacy-audit", dpgauss::PrivacyAuditCriterion},
      {"pairing-step", dpgauss::PairingStep},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2zu %-20s %s (%.1fs) %s\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                secs, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
