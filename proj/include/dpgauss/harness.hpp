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

#ifndef DPGAUSS_HARNESS_HPP_
#define DPGAUSS_HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "dpgauss/covers.hpp"
#include "dpgauss/error.hpp"
#include "dpgauss/gaussian.hpp"
#include "dpgauss/learners.hpp"
#include "dpgauss/mechanisms.hpp"
#include "dpgauss/rng.hpp"
#include "dpgauss/scheffe.hpp"
#include "dpgauss/tv.hpp"
#include "json.hpp"

namespace dpgauss {

// The data law: a Gaussian component, optionally contaminated with weight w.
struct TruthSpec {
  Gaussian component = Gaussian::Standard(1);
  double w = 0.0;
  std::optional<Gaussian> contaminant;
};

inline void ValidateTruth(const TruthSpec& t) {
  internal::Require(t.w >= 0.0 && t.w < 1.0, ErrorCode::kInvalidArgument, "contamination weight must lie in [0, 1)");
  if (t.w > 0.0) {
    internal::Require(t.contaminant.has_value(), ErrorCode::kInvalidArgument, "w > 0 needs a contaminant");
    internal::Require(t.contaminant->dim() == t.component.dim(), ErrorCode::kDimensionMismatch,
                      "contaminant dimension differs");
  }
}

// Each point comes from the contaminant with probability w.
inline Dataset SampleTruth(const TruthSpec& t, Eigen::Index n, const RngHandle& rng) {
  ValidateTruth(t);
  Engine engine = rng.MakeEngine();
  Dataset clean = Sample(t.component, n, engine);
  if (t.w == 0.0) return clean;
  Dataset dirty = Sample(*t.contaminant, n, engine);
  std::bernoulli_distribution coin(t.w);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (coin(engine)) clean.point(i) = dirty.point(i);
  }
  return clean;
}

// TV between the mixture and its Gaussian component, w * TV(component,
// contaminant); exactly 0 when w = 0.
inline TvEstimate PlantedOpt(const TruthSpec& t, long long n_mc, const RngHandle& rng) {
  ValidateTruth(t);
  if (t.w == 0.0) return {0.0, 0.0, 0};
  if (t.component.dim() == 1) return {t.w * Tv1d(t.component, *t.contaminant), 0.0, 0};
  const TvEstimate e = TvMc(t.component, *t.contaminant, n_mc, rng);
  return {t.w * e.value, t.w * e.half_width, e.n_mc};
}

// Achieved TV: quadrature in 1-d, Monte Carlo otherwise.
inline TvEstimate AchievedTv(const Gaussian& out, const Gaussian& truth, long long n_mc, const RngHandle& rng) {
  if (out.dim() == 1) return {Tv1d(out, truth), 0.0, 0};
  if (out == truth) return {0.0, 0.0, n_mc};
  return TvMc(out, truth, n_mc, rng);
}

// TV between a 1-d truth law (possibly a contaminated mixture) and a
// Gaussian, by adaptive quadrature of the density gap.
inline double TvToTruth1d(const TruthSpec& t, const Gaussian& g) {
  ValidateTruth(t);
  internal::RequireUnivariate(g);
  internal::RequireUnivariate(t.component);
  if (t.w == 0.0) return Tv1d(t.component, g);
  internal::RequireUnivariate(*t.contaminant);
  std::vector<Interval> spans;
  for (const Gaussian* h : {&t.component, &*t.contaminant, &g}) {
    const double m = h->mean()(0), s = std::sqrt(h->cov()(0, 0));
    spans.push_back({m - 12.0 * s, m + 12.0 * s});
  }
  std::sort(spans.begin(), spans.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const Interval& iv : spans) {
    if (!merged.empty() && iv.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, iv.hi);
    } else {
      merged.push_back(iv);
    }
  }
  auto pdf = [](const Gaussian& h, double x) { return internal::NormalPdf(x, h.mean()(0), std::sqrt(h.cov()(0, 0))); };
  auto p = [&](double x) { return (1.0 - t.w) * pdf(t.component, x) + t.w * pdf(*t.contaminant, x); };
  auto q = [&](double x) { return pdf(g, x); };
  double total = 0.0;
  for (const Interval& iv : merged) total += internal::IntegrateAbsDifference(p, q, iv.lo, iv.hi);
  return std::clamp(0.5 * total, 0.0, 1.0);
}

// Histogram TV between 1-d samples and a Gaussian: `bins` equal bins over
// mean +- span sd, plus one tail bin on each side.
inline double HistogramTv1d(const Dataset& data, const Gaussian& g, int bins = 200, double span = 6.0) {
  internal::RequireUnivariate(g);
  internal::Require(data.dim() == 1 && !data.empty(), ErrorCode::kEmptyDataset, "need 1-d data");
  const double mu = g.mean()(0), sd = std::sqrt(g.cov()(0, 0));
  const double lo = mu - span * sd, hi = mu + span * sd, width = (hi - lo) / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins) + 2, 0.0);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double x = data.point(i)(0);
    std::size_t b;
    if (x < lo) {
      b = 0;
    } else if (x >= hi) {
      b = static_cast<std::size_t>(bins) + 1;
    } else {
      b = 1 + std::min(static_cast<std::size_t>((x - lo) / width), static_cast<std::size_t>(bins) - 1);
    }
    counts[b] += 1.0;
  }
  const double n = static_cast<double>(data.size());
  double tv = 0.0;
  for (int b = 0; b < bins + 2; ++b) {
    double q = NormalCdf(-span);
    if (b > 0 && b <= bins) {
      const double left = -span + (b - 1) * width / sd;
      q = NormalCdf(left + width / sd) - NormalCdf(left);
    }
    tv += std::abs(counts[static_cast<std::size_t>(b)] / n - q);
  }
  return 0.5 * tv;
}

inline const std::vector<std::string>& KnownLearners() {
  static const std::vector<std::string> names = {"phs", "mde", "gapmax", "boost1", "boost2", "agnostic"};
  return names;
}

struct ExperimentConfig {
  std::string learner = "boost2";
  LearnerConfig learner_config;
  TruthSpec truth;
  std::vector<long long> n_grid;
  int trials = 0;
  std::uint64_t seed = 1;
  std::string out;
  std::string trace;
  // Candidate list for phs / mde / gapmax and for the agnostic wrapper
  // around phs.
  std::vector<Gaussian> hypotheses;
  std::string agnostic_inner = "boost1";
  long long tv_n_mc = 1'000'000;
  long long opt_n_mc = 1'000'000;
  int workers = 1;
  // Canonical JSON the config hash is taken from.
  nlohmann::json source = nlohmann::json::object();
};

// hypotheses: either a list of {mean, cov} or {"grid": {lo, hi, step, variance}}.
inline std::vector<Gaussian> HypothesesFromJson(const nlohmann::json& j) {
  std::vector<Gaussian> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(GaussianFromJson(e));
    return out;
  }
  const auto& g = j.at("grid");
  const double lo = g.at("lo").get<double>(), hi = g.at("hi").get<double>(), step = g.at("step").get<double>();
  const double var = g.value("variance", 1.0);
  internal::Require(step > 0.0 && hi >= lo, ErrorCode::kInvalidArgument, "bad hypothesis grid");
  const auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (long long i = 0; i < count; ++i) out.push_back(Gaussian::Univariate(lo + static_cast<double>(i) * step, var));
  return out;
}

inline std::uint64_t Fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    c.learner = j.value("learner", c.learner);
    if (std::find(KnownLearners().begin(), KnownLearners().end(), c.learner) == KnownLearners().end()) {
      throw Error(ErrorCode::kInvalidArgument, "unknown learner '" + c.learner + "'");
    }
    if (j.contains("config")) c.learner_config = LearnerConfigFromJson(j.at("config"));
    if (j.contains("truth")) {
      const auto& t = j.at("truth");
      c.truth.component = GaussianFromJson(t);
      c.truth.w = t.value("w", 0.0);
      if (t.contains("contaminant")) c.truth.contaminant = GaussianFromJson(t.at("contaminant"));
    }
    if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<long long>>();
    c.trials = j.value("trials", 0);
    c.seed = j.value("seed", std::uint64_t{1});
    c.out = j.value("out", std::string());
    c.trace = j.value("trace", std::string());
    if (j.contains("hypotheses")) c.hypotheses = HypothesesFromJson(j.at("hypotheses"));
    c.agnostic_inner = j.value("agnostic_inner", c.agnostic_inner);
    c.tv_n_mc = j.value("tv_n_mc", c.tv_n_mc);
    c.opt_n_mc = j.value("opt_n_mc", c.opt_n_mc);
    c.workers = j.value("workers", 1);
    c.source = j;
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

inline void ValidateExperiment(const ExperimentConfig& c) {
  ValidateTruth(c.truth);
  internal::Require(c.trials >= 0, ErrorCode::kInvalidArgument, "trials must be non-negative");
  internal::Require(c.workers >= 1, ErrorCode::kInvalidArgument, "workers must be positive");
  for (long long n : c.n_grid) internal::Require(n >= 1, ErrorCode::kInvalidArgument, "n must be positive");
  const bool needs_list = c.learner == "phs" || c.learner == "mde" || c.learner == "gapmax" ||
                          (c.learner == "agnostic" && c.agnostic_inner == "phs");
  if (needs_list) {
    internal::Require(!c.hypotheses.empty(), ErrorCode::kInvalidArgument, c.learner + " needs hypotheses");
    for (const Gaussian& h : c.hypotheses) {
      internal::Require(h.dim() == c.truth.component.dim(), ErrorCode::kDimensionMismatch,
                        "hypothesis dimension differs from truth");
    }
  }
  if (c.learner == "agnostic") {
    internal::Require(c.agnostic_inner == "phs" || c.agnostic_inner == "boost1" || c.agnostic_inner == "boost2",
                      ErrorCode::kInvalidArgument, "agnostic_inner must be phs, boost1 or boost2");
  }
}

// Budget the learner is configured to spend.
inline PrivacyBudget ConfiguredBudget(const std::string& learner, const LearnerConfig& cfg) {
  if (learner == "phs" || learner == "mde") return {cfg.eps, 0.0};
  return {cfg.eps, cfg.delta};
}

inline bool BudgetMatches(const PrivacyBudget& spent, const PrivacyBudget& configured) {
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
  return close(spent.eps, configured.eps) && close(spent.delta, configured.delta);
}

// Runs one learner on one dataset.
inline SelectorResult RunLearner(const ExperimentConfig& c, const Dataset& data, const RngHandle& rng,
                                 MassCache* cache) {
  const LearnerConfig& lc = c.learner_config;
  const TableOptions topts{lc.n_mc, lc.mass_method, RngHandle(lc.mass_seed), cache};
  if (c.learner == "phs") return Phs(c.hypotheses, data, lc.xi, lc.alpha, lc.beta, lc.eps, rng, topts);
  if (c.learner == "mde") return MdePrivate(c.hypotheses, data, lc.alpha, lc.beta, lc.eps, rng, topts);
  if (c.learner == "gapmax") {
    Cover cover;
    cover.elements = c.hypotheses;
    return GapmaxSelect(cover, data, lc.xi, lc.alpha, lc.beta, lc.eps, lc.delta, lc.k, rng, topts);
  }
  if (c.learner == "boost1") return Boost1(lc.b, lc.xi, lc.alpha, lc.beta, lc.eps, lc.delta, lc, data, rng, cache);
  if (c.learner == "boost2") return Boost2(lc.xi, lc.alpha, lc.beta, lc.eps, lc.delta, lc, data, rng, cache);
  if (c.learner == "agnostic") {
    RobustLearner inner;
    double constant;
    if (c.agnostic_inner == "phs") {
      constant = 3.0;
      inner = [&](double xi, double a, double b, double e, double, const Dataset& d, const RngHandle& r) {
        return Phs(c.hypotheses, d, xi, a, b, e, r, topts);
      };
    } else if (c.agnostic_inner == "boost1") {
      constant = 3.0 * (lc.b + 1.0);
      inner = [&](double xi, double a, double b, double e, double dl, const Dataset& d, const RngHandle& r) {
        return Boost1(lc.b, xi, a, b, e, dl, lc, d, r, cache);
      };
    } else {
      constant = 33.0;
      inner = [&](double xi, double a, double b, double e, double dl, const Dataset& d, const RngHandle& r) {
        return Boost2(xi, a, b, e, dl, lc, d, r, cache);
      };
    }
    return AgnosticWrap(inner, constant, lc.alpha, lc.beta, lc.eps, lc.delta, data, rng, topts);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown learner '" + c.learner + "'");
}

struct TrialRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  int trial = 0;
  long long n = 0;
  Eigen::Index d = 0;
  std::string learner;
  std::string status = "ok";
  std::string error;
  std::optional<double> opt;
  double tv = std::numeric_limits<double>::quiet_NaN();
  double tv_half_width = 0.0;
  PrivacyBudget spent;
  bool ledger_ok = false;
  BudgetLedger ledger;
  std::vector<StageRecord> trace;
  std::optional<Gaussian> output;
  double wall_seconds = 0.0;
};

inline const char* kTrialCsvHeader =
    "config_hash,seed,trial,n,d,learner,status,opt,tv,tv_half_width,eps_spent,delta_spent,ledger_ok,error";

namespace internal {

inline std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

}  // namespace internal

// Wall time is kept out of the CSV so reruns are byte-identical; it is
// written to the trace stream.
inline void WriteTrialCsv(const std::vector<TrialRecord>& records, std::ostream& out) {
  out << kTrialCsvHeader << "\n";
  for (const TrialRecord& r : records) {
    out << r.config_hash << ',' << r.seed << ',' << r.trial << ',' << r.n << ',' << r.d << ',' << r.learner << ','
        << r.status << ',' << (r.opt ? FormatDouble(*r.opt) : std::string()) << ','
        << (std::isnan(r.tv) ? std::string() : FormatDouble(r.tv)) << ',' << FormatDouble(r.tv_half_width) << ','
        << FormatDouble(r.spent.eps) << ',' << FormatDouble(r.spent.delta) << ',' << (r.ledger_ok ? 1 : 0) << ','
        << internal::CsvField(r.error) << "\n";
  }
}

inline nlohmann::json TrialRecordToJson(const TrialRecord& r) {
  nlohmann::json ledger = nlohmann::json::array();
  for (const LedgerEntry& e : r.ledger.entries()) {
    ledger.push_back({{"stage", e.stage}, {"eps", e.budget.eps}, {"delta", e.budget.delta}});
  }
  nlohmann::json trace = nlohmann::json::array();
  for (const StageRecord& s : r.trace) trace.push_back(StageRecordToJson(s));
  nlohmann::json j = {{"config_hash", r.config_hash}, {"seed", r.seed},     {"trial", r.trial},
                      {"n", r.n},                     {"learner", r.learner}, {"status", r.status},
                      {"tv", std::isnan(r.tv) ? nlohmann::json(nullptr) : nlohmann::json(r.tv)},
                      {"ledger", std::move(ledger)},  {"trace", std::move(trace)},
                      {"wall_seconds", r.wall_seconds}};
  if (r.output) j["output"] = GaussianToJson(*r.output);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline void WriteTraceJsonl(const std::vector<TrialRecord>& records, std::ostream& out) {
  for (const TrialRecord& r : records) out << TrialRecordToJson(r).dump() << "\n";
}

inline std::string ConfigHash(const ExperimentConfig& c) {
  nlohmann::json canon = c.source;
  canon.erase("out");
  canon.erase("trace");
  canon.erase("workers");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(Fnv1a(canon.dump())));
  return buf;
}

// Stream of trial t at grid point g: derived only from (seed, g, t).
inline RngHandle TrialStream(std::uint64_t seed, std::size_t grid_index, int trial) {
  return RngHandle(seed).Split(grid_index).Split(static_cast<std::uint64_t>(trial));
}

// Every (n, trial) pair yields one record, failures included. Trials run on
// `workers` threads; records come back in (n, trial) order.
inline std::vector<TrialRecord> RunExperiment(const ExperimentConfig& c, MassCache* cache = nullptr) {
  ValidateExperiment(c);
  const std::string hash = ConfigHash(c);
  std::optional<double> opt;
  if (c.truth.w > 0.0 || c.truth.contaminant) {
    opt = PlantedOpt(c.truth, c.opt_n_mc, RngHandle(c.seed).Split(0xA11CEULL)).value;
  } else {
    opt = 0.0;
  }
  MassCache local_cache;
  MassCache* masses = cache != nullptr ? cache : &local_cache;
  const std::size_t total = c.n_grid.size() * static_cast<std::size_t>(c.trials);
  std::vector<TrialRecord> records(total);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t task = next++; task < total; task = next++) {
      const std::size_t g = task / static_cast<std::size_t>(c.trials);
      const int t = static_cast<int>(task % static_cast<std::size_t>(c.trials));
      TrialRecord& r = records[task];
      r.config_hash = hash;
      r.seed = c.seed;
      r.trial = t;
      r.n = c.n_grid[g];
      r.d = c.truth.component.dim();
      r.learner = c.learner;
      r.opt = opt;
      const auto start = std::chrono::steady_clock::now();
      const RngHandle stream = TrialStream(c.seed, g, t);
      try {
        const Dataset data = SampleTruth(c.truth, static_cast<Eigen::Index>(r.n), stream.Split(0));
        SelectorResult out = RunLearner(c, data, stream.Split(1), masses);
        const TvEstimate tv = AchievedTv(out.chosen, c.truth.component, c.tv_n_mc, stream.Split(2));
        r.tv = tv.value;
        r.tv_half_width = tv.half_width;
        r.spent = out.ledger.Total();
        PrivacyBudget configured = ConfiguredBudget(c.learner, c.learner_config);
        if (c.learner == "agnostic" && c.agnostic_inner == "phs") configured.delta = 0.0;
        r.ledger_ok = BudgetMatches(r.spent, configured);
        r.ledger = std::move(out.ledger);
        r.trace = std::move(out.trace);
        r.output = out.chosen;
      } catch (const std::exception& e) {
        r.status = "failed";
        r.error = e.what();
      }
      r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const int workers = std::max(1, std::min<int>(c.workers, static_cast<int>(std::max<std::size_t>(total, 1))));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return records;
}

inline bool AnyFailed(const std::vector<TrialRecord>& records) {
  return std::any_of(records.begin(), records.end(), [](const TrialRecord& r) { return r.status != "ok"; });
}

// Median achieved TV per n (successful trials only), in grid order.
inline std::vector<std::pair<long long, double>> MedianTvByN(const std::vector<TrialRecord>& records) {
  std::vector<std::pair<long long, double>> out;
  std::map<long long, std::vector<double>> by_n;
  std::vector<long long> order;
  for (const TrialRecord& r : records) {
    if (r.status != "ok") continue;
    if (!by_n.count(r.n)) order.push_back(r.n);
    by_n[r.n].push_back(r.tv);
  }
  for (long long n : order) {
    auto v = by_n[n];
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    out.emplace_back(n, k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]));
  }
  return out;
}

// A mechanism under audit: given a dataset, return a sampler of its output
// index. Preparation is data dependent; sampling uses only the engine.
using AuditSampler = std::function<std::size_t(Engine&)>;
using AuditMechanism = std::function<AuditSampler(const Dataset&)>;

struct AuditOutcome {
  std::size_t outcome = 0;
  long long count_d = 0;
  long long count_d_prime = 0;
  bool flagged = false;
};

struct AuditReport {
  std::vector<AuditOutcome> outcomes;
  long long runs = 0;
  double eps = 0.0;
  double delta = 0.0;
  int flags = 0;
};

struct WilsonInterval {
  double lo;
  double hi;
};

inline WilsonInterval Wilson(long long k, long long n, double z) {
  const double p = static_cast<double>(k) / static_cast<double>(n);
  const double nn = static_cast<double>(n);
  const double denom = 1.0 + z * z / nn;
  const double center = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// Frequency tables of the mechanism's output on D and D'. An outcome seen
// with frequency >= min_freq on either side is flagged when the lower
// confidence bound on one side exceeds e^eps times the upper bound on the
// other plus delta.
inline AuditReport PrivacyAudit(const AuditMechanism& mechanism, double eps, double delta, const Dataset& d,
                                const Dataset& d_prime, long long runs, const RngHandle& rng, double z = 2.5758293035489,
                                double min_freq = 0.01) {
  if (!AreNeighbors(d, d_prime)) throw Error(ErrorCode::kNotNeighbors, "datasets are not neighbors");
  internal::Require(runs >= 1, ErrorCode::kInvalidArgument, "runs must be positive");
  std::map<std::size_t, AuditOutcome> table;
  auto tally = [&](const Dataset& data, const RngHandle& stream, bool prime) {
    AuditSampler sampler = mechanism(data);
    Engine engine = stream.MakeEngine();
    for (long long r = 0; r < runs; ++r) {
      AuditOutcome& o = table[sampler(engine)];
      (prime ? o.count_d_prime : o.count_d) += 1;
    }
  };
  tally(d, rng.Split(0), false);
  tally(d_prime, rng.Split(1), true);
  AuditReport report;
  report.runs = runs;
  report.eps = eps;
  report.delta = delta;
  const double bound = std::exp(eps);
  for (auto& [index, o] : table) {
    o.outcome = index;
    const double fa = static_cast<double>(o.count_d) / static_cast<double>(runs);
    const double fb = static_cast<double>(o.count_d_prime) / static_cast<double>(runs);
    if (std::max(fa, fb) >= min_freq) {
      const WilsonInterval a = Wilson(o.count_d, runs, z), b = Wilson(o.count_d_prime, runs, z);
      o.flagged = a.lo > bound * b.hi + delta || b.lo > bound * a.hi + delta;
    }
    report.flags += o.flagged;
    report.outcomes.push_back(o);
  }
  return report;
}

inline nlohmann::json AuditReportToJson(const AuditReport& r) {
  nlohmann::json outcomes = nlohmann::json::array();
  for (const AuditOutcome& o : r.outcomes) {
    outcomes.push_back(
        {{"outcome", o.outcome}, {"count_d", o.count_d}, {"count_d_prime", o.count_d_prime}, {"flagged", o.flagged}});
  }
  return {{"runs", r.runs}, {"eps", r.eps}, {"delta", r.delta}, {"flags", r.flags}, {"outcomes", outcomes}};
}

// Exponential mechanism over the MDE scores of a fixed hypothesis list.
inline AuditMechanism MdeAuditMechanism(std::vector<Gaussian> hypotheses, double eps, const TableOptions& options = {}) {
  auto masses = std::make_shared<const MassTable>(
      BuildMassTable(hypotheses, options.n_mc, options.mass_rng, options.method));
  return [hypotheses = std::move(hypotheses), masses, eps](const Dataset& data) -> AuditSampler {
    const ScheffeTable table = ScheffeTable::WithMasses(hypotheses, masses, data);
    auto probs = std::make_shared<std::vector<double>>(ExpMechProbabilities(MdeScores(table), eps));
    return [probs](Engine& engine) {
      return std::discrete_distribution<std::size_t>(probs->begin(), probs->end())(engine);
    };
  };
}

// Noise-free argmax of the MDE scores; a deliberately non-private control.
inline AuditMechanism ArgmaxAuditMechanism(std::vector<Gaussian> hypotheses, const TableOptions& options = {}) {
  auto masses = std::make_shared<const MassTable>(
      BuildMassTable(hypotheses, options.n_mc, options.mass_rng, options.method));
  return [hypotheses = std::move(hypotheses), masses](const Dataset& data) -> AuditSampler {
    const ScoredCandidates s = MdeScores(ScheffeTable::WithMasses(hypotheses, masses, data));
    const std::size_t best =
        static_cast<std::size_t>(std::max_element(s.scores.begin(), s.scores.end()) - s.scores.begin());
    return [best](Engine&) { return best; };
  };
}

struct CoverAuditReport {
  std::string kind;
  Eigen::Index d = 0;
  double xi = 0.0;
  double gamma = 0.0;
  std::size_t size = 0;
  long long probes = 0;
  long long certified = 0;
  double max_certified_tv = 0.0;
  long long local_max_count = 0;
  bool psd_ok = true;

  bool coverage_pass() const { return certified == probes; }
};

namespace internal {

inline Vector UniformInBall(Eigen::Index d, double radius, Engine& engine) {
  std::normal_distribution<double> normal;
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = normal(engine);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(engine);
  return v.normalized() * radius * std::pow(u, 1.0 / static_cast<double>(d));
}

// Uniform symmetric matrix in the Frobenius ball, as a vector of free
// entries scaled so off-diagonals count twice.
inline Matrix UniformSymmetricInBall(Eigen::Index d, double radius, Engine& engine) {
  const Eigen::Index free = d * (d + 1) / 2;
  const Vector v = UniformInBall(free, radius, engine);
  Matrix s(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = r; c < d; ++c) {
      const double value = r == c ? v(k) : v(k) / std::numbers::sqrt2;
      s(r, c) = value;
      s(c, r) = value;
      ++k;
    }
  }
  return s;
}

}  // namespace internal

// Samples means uniformly in the cover ball and certifies each against its
// nearest cover element with TV <= (9/2) |mu - mu_e|. Local smallness is
// counted with exact equal-covariance TV around `local_probes` elements.
inline CoverAuditReport AuditLocationCover(const Vector& center, double xi, double gamma, long long probes,
                                           const RngHandle& rng, long long local_probes = 20,
                                           const CoverOptions& options = {}) {
  const Cover cover = LocationCover(center, xi, gamma, options);
  const Eigen::Index d = center.size();
  CoverAuditReport report;
  report.kind = "location";
  report.d = d;
  report.xi = xi;
  report.gamma = gamma;
  report.size = cover.size();
  report.probes = probes;
  Matrix means(d, static_cast<Eigen::Index>(cover.size()));
  for (std::size_t i = 0; i < cover.size(); ++i) means.col(static_cast<Eigen::Index>(i)) = cover.elements[i].mean();
  Engine engine = rng.MakeEngine();
  for (long long p = 0; p < probes; ++p) {
    const Vector mu = center + internal::UniformInBall(d, 200.0 * gamma, engine);
    Eigen::Index nearest = 0;
    (means.colwise() - mu).colwise().squaredNorm().minCoeff(&nearest);
    const double bound = TvBoundLocation(mu, means.col(nearest)).upper;
    report.max_certified_tv = std::max(report.max_certified_tv, bound);
    report.certified += bound <= xi * (1.0 + 1e-9);
  }
  if (local_probes > 0) {
    std::vector<Gaussian> chosen;
    std::uniform_int_distribution<std::size_t> pick(0, cover.size() - 1);
    for (long long i = 0; i < local_probes; ++i) chosen.push_back(cover.elements[pick(engine)]);
    report.local_max_count = LocalSmallnessAudit(cover, gamma, chosen, MakeTvMetric(TvMetricKind::kEqualCovariance));
  }
  return report;
}

// Samples covariances uniformly in the Frobenius ball of radius 100 gamma and
// certifies each against its entry-wise nearest element with the eigenvalue
// bound at eta = 1 - 100 gamma and rho' = rho. Also checks every element is PD.
inline CoverAuditReport AuditScaleCover(Eigen::Index d, double xi, double gamma, long long probes,
                                        const RngHandle& rng, long long local_probes = 0,
                                        long long local_n_mc = 20000, const CoverOptions& options = {}) {
  const Cover cover = ScaleCoverIdentity(xi, d, gamma, options);
  const double rho = ScaleCoverStep(xi, d, gamma);
  const double eta = 1.0 - 100.0 * gamma;
  CoverAuditReport report;
  report.kind = "scale";
  report.d = d;
  report.xi = xi;
  report.gamma = gamma;
  report.size = cover.size();
  report.probes = probes;
  for (const Gaussian& g : cover.elements) report.psd_ok = report.psd_ok && MinEigenvalue(g.cov()) > 0.0;
  Engine engine = rng.MakeEngine();
  for (long long p = 0; p < probes; ++p) {
    const Matrix sigma = Matrix::Identity(d, d) + internal::UniformSymmetricInBall(d, 100.0 * gamma, engine);
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cover.size(); ++i) {
      const double gap = (cover.elements[i].cov() - sigma).cwiseAbs().maxCoeff();
      if (gap < best) {
        best = gap;
        nearest = i;
      }
    }
    try {
      const double bound = TvUpperValiant(sigma, cover.elements[nearest].cov(), eta, rho);
      report.max_certified_tv = std::max(report.max_certified_tv, bound);
      report.certified += bound <= xi * (1.0 + 1e-9);
    } catch (const Error&) {
      report.max_certified_tv = 1.0;
    }
  }
  if (local_probes > 0) {
    std::vector<Gaussian> chosen;
    std::uniform_int_distribution<std::size_t> pick(0, cover.size() - 1);
    for (long long i = 0; i < local_probes; ++i) chosen.push_back(cover.elements[pick(engine)]);
    report.local_max_count =
        LocalSmallnessAudit(cover, gamma, chosen, MakeTvMetric(TvMetricKind::kTvMc, local_n_mc, rng.Split(7)));
  }
  return report;
}

inline nlohmann::json CoverAuditToJson(const CoverAuditReport& r) {
  return {{"kind", r.kind},
          {"d", r.d},
          {"xi", r.xi},
          {"gamma", r.gamma},
          {"size", r.size},
          {"probes", r.probes},
          {"certified", r.certified},
          {"coverage_pass", r.coverage_pass()},
          {"max_certified_tv", r.max_certified_tv},
          {"local_max_count", r.local_max_count},
          {"psd_ok", r.psd_ok}};
}

// Least-squares slope of y on x.
inline double FitSlope(const std::vector<double>& x, const std::vector<double>& y) {
  internal::Require(x.size() == y.size() && x.size() >= 2, ErrorCode::kInvalidArgument, "need two or more points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace dpgauss

#endif  // DPGAUSS_HARNESS_HPP_
