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

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpgauss/dpgauss.hpp"
#include "json.hpp"

namespace {

using dpgauss::Error;
using dpgauss::ErrorCode;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct CommonFlags {
  std::string config;
  std::optional<double> eps, delta, alpha;
  std::optional<long long> n;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void AddCommon(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON config file");
  app->add_option("--eps", f.eps, "privacy parameter epsilon");
  app->add_option("--delta", f.delta, "privacy parameter delta");
  app->add_option("--alpha", f.alpha, "accuracy target");
  app->add_option("--n", f.n, "sample size");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--out", f.out, "output path (stdout when empty)");
}

json LoadJson(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParse, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

dpgauss::Dataset LoadDataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParse, "cannot open " + path);
  return dpgauss::ReadDatasetCsv(in);
}

// Writes to `path`, or stdout when it is empty.
void Emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kParse, "cannot write " + path);
  out << text;
}

// Learner parameters from the "config" object (or the whole file), then flags.
dpgauss::LearnerConfig LearnerConfigFrom(const json& file, const CommonFlags& f) {
  dpgauss::LearnerConfig c = dpgauss::LearnerConfigFromJson(file.contains("config") ? file.at("config") : file);
  if (f.eps) c.eps = *f.eps;
  if (f.delta) c.delta = *f.delta;
  if (f.alpha) c.alpha = *f.alpha;
  return c;
}

std::vector<dpgauss::Gaussian> HypothesesFrom(const json& file, const std::string& path) {
  if (!path.empty()) {
    const json h = LoadJson(path);
    if (h.contains("elements")) return dpgauss::CoverFromJson(h).elements;
    return dpgauss::HypothesesFromJson(h.contains("hypotheses") ? h.at("hypotheses") : h);
  }
  if (!file.contains("hypotheses")) throw Error(ErrorCode::kInvalidArgument, "no hypotheses given");
  return dpgauss::HypothesesFromJson(file.at("hypotheses"));
}

json ResultJson(const dpgauss::SelectorResult& r) {
  json ledger = json::array();
  for (const auto& e : r.ledger.entries()) {
    ledger.push_back({{"stage", e.stage}, {"eps", e.budget.eps}, {"delta", e.budget.delta}});
  }
  json trace = json::array();
  for (const auto& s : r.trace) trace.push_back(dpgauss::StageRecordToJson(s));
  return {{"chosen", dpgauss::GaussianToJson(r.chosen)},
          {"chosen_index", r.chosen_index},
          {"budget", {{"eps", r.budget_spent.eps}, {"delta", r.budget_spent.delta}}},
          {"ledger", ledger},
          {"trace", trace}};
}

int RunGen(const CommonFlags& f) {
  const json file = LoadJson(f.config);
  dpgauss::TruthSpec truth;
  const json& t = file.contains("truth") ? file.at("truth") : file;
  truth.component = dpgauss::GaussianFromJson(t);
  truth.w = t.value("w", 0.0);
  if (t.contains("contaminant")) truth.contaminant = dpgauss::GaussianFromJson(t.at("contaminant"));
  const long long n = f.n.value_or(file.value("n", 0LL));
  if (n <= 0) throw Error(ErrorCode::kInvalidArgument, "gen needs --n > 0");
  const dpgauss::Dataset data =
      dpgauss::SampleTruth(truth, n, dpgauss::RngHandle(f.seed.value_or(file.value("seed", std::uint64_t{1}))));
  std::ostringstream os;
  dpgauss::WriteDatasetCsv(data, os);
  Emit(f.out, os.str());
  return kExitOk;
}

struct CoverFlags {
  std::string kind = "location";
  int d = 1;
  double xi = 0.05;
  double gamma = 0.002;
  std::vector<int> dims{1, 2, 3};
  long long probes = 200;
  bool enforce_order = false;
};

int RunCoverGen(const CommonFlags& f, const CoverFlags& c) {
  dpgauss::CoverOptions options;
  options.enforce_parameter_order = c.enforce_order;
  dpgauss::Cover cover;
  if (c.kind == "location") {
    cover = dpgauss::LocationCover(dpgauss::Vector::Zero(c.d), c.xi, c.gamma, options);
  } else if (c.kind == "scale") {
    cover = dpgauss::ScaleCoverIdentity(c.xi, c.d, c.gamma, options);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "cover kind must be location or scale");
  }
  Emit(f.out, dpgauss::CoverToJson(cover).dump() + "\n");
  return kExitOk;
}

int RunCoverAudit(const CommonFlags& f, const CoverFlags& c) {
  dpgauss::CoverOptions options;
  options.enforce_parameter_order = c.enforce_order;
  const dpgauss::RngHandle rng(f.seed.value_or(1));
  json reports = json::array();
  std::vector<double> x, y;
  bool pass = true;
  for (int d : c.dims) {
    dpgauss::CoverAuditReport r;
    if (c.kind == "location") {
      r = dpgauss::AuditLocationCover(dpgauss::Vector::Zero(d), c.xi, c.gamma, c.probes, rng.Split(d), 20, options);
      x.push_back(d);
    } else if (c.kind == "scale") {
      r = dpgauss::AuditScaleCover(d, c.xi, c.gamma, c.probes, rng.Split(d), 5, 20000, options);
      x.push_back(static_cast<double>(d) * d);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "cover kind must be location or scale");
    }
    pass = pass && r.coverage_pass() && r.psd_ok;
    y.push_back(std::log(static_cast<double>(r.size)));
    reports.push_back(dpgauss::CoverAuditToJson(r));
  }
  json out = {{"kind", c.kind}, {"reports", reports}, {"coverage_pass", pass}};
  if (x.size() >= 2) {
    out["fitted_log_size_slope"] = dpgauss::FitSlope(x, y);
    out["slope_variable"] = c.kind == "location" ? "d" : "d^2";
  }
  Emit(f.out, out.dump(2) + "\n");
  return pass ? kExitOk : kExitPartial;
}

int RunSelect(const std::string& which, const CommonFlags& f, const std::string& data_path,
              const std::string& hyp_path) {
  const json file = LoadJson(f.config);
  const dpgauss::LearnerConfig lc = LearnerConfigFrom(file, f);
  const dpgauss::Dataset data = LoadDataset(data_path);
  const auto hypotheses = HypothesesFrom(file, hyp_path);
  const dpgauss::RngHandle rng(f.seed.value_or(1));
  const dpgauss::TableOptions topts{lc.n_mc, lc.mass_method, dpgauss::RngHandle(lc.mass_seed), nullptr};
  dpgauss::SelectorResult r;
  if (which == "phs") {
    r = dpgauss::Phs(hypotheses, data, lc.xi, lc.alpha, lc.beta, lc.eps, rng, topts);
  } else if (which == "mde") {
    r = dpgauss::MdePrivate(hypotheses, data, lc.alpha, lc.beta, lc.eps, rng, topts);
  } else {
    dpgauss::Cover cover;
    cover.elements = hypotheses;
    r = dpgauss::GapmaxSelect(cover, data, lc.xi, lc.alpha, lc.beta, lc.eps, lc.delta, lc.k, rng, topts);
  }
  Emit(f.out, ResultJson(r).dump(2) + "\n");
  return kExitOk;
}

int RunLearn(const std::string& which, const CommonFlags& f, const std::string& data_path,
             const std::string& trace_path, const std::string& inner) {
  json file = LoadJson(f.config);
  dpgauss::ExperimentConfig ec;
  ec.learner = which;
  ec.learner_config = LearnerConfigFrom(file, f);
  ec.agnostic_inner = file.value("agnostic_inner", inner);
  if (file.contains("hypotheses")) ec.hypotheses = dpgauss::HypothesesFromJson(file.at("hypotheses"));
  const dpgauss::Dataset data = LoadDataset(data_path);
  ec.truth.component = dpgauss::Gaussian::Standard(data.dim());
  dpgauss::ValidateExperiment(ec);
  dpgauss::MassCache cache(file.value("mass_cache", std::string()));
  const dpgauss::SelectorResult r = dpgauss::RunLearner(ec, data, dpgauss::RngHandle(f.seed.value_or(1)), &cache);
  cache.Save();
  Emit(f.out, ResultJson(r).dump(2) + "\n");
  if (!trace_path.empty()) {
    std::ofstream tr(trace_path);
    for (const auto& s : r.trace) tr << dpgauss::StageRecordToJson(s).dump() << "\n";
  }
  return kExitOk;
}

int RunBench(const CommonFlags& f, const std::string& trace_path, int workers) {
  json file = LoadJson(f.config);
  if (f.eps) file["config"]["eps"] = *f.eps;
  if (f.delta) file["config"]["delta"] = *f.delta;
  if (f.alpha) file["config"]["alpha"] = *f.alpha;
  if (f.n) file["n_grid"] = std::vector<long long>{*f.n};
  if (f.seed) file["seed"] = *f.seed;
  if (!f.out.empty()) file["out"] = f.out;
  if (!trace_path.empty()) file["trace"] = trace_path;
  if (workers > 0) file["workers"] = workers;
  const dpgauss::ExperimentConfig ec = dpgauss::ExperimentConfigFromJson(file);
  dpgauss::MassCache cache(file.value("mass_cache", std::string()));
  const auto records = dpgauss::RunExperiment(ec, &cache);
  cache.Save();
  std::ostringstream csv;
  dpgauss::WriteTrialCsv(records, csv);
  Emit(ec.out, csv.str());
  if (!ec.trace.empty()) {
    std::ofstream tr(ec.trace);
    dpgauss::WriteTraceJsonl(records, tr);
  }
  return dpgauss::AnyFailed(records) ? kExitPartial : kExitOk;
}

int RunAuditPrivacy(const CommonFlags& f, const std::string& d_path, const std::string& dp_path,
                    const std::string& mechanism, long long runs) {
  const json file = LoadJson(f.config);
  const dpgauss::LearnerConfig lc = LearnerConfigFrom(file, f);
  const auto hypotheses = HypothesesFrom(file, "");
  const dpgauss::TableOptions topts{lc.n_mc, lc.mass_method, dpgauss::RngHandle(lc.mass_seed), nullptr};
  dpgauss::AuditMechanism mech;
  if (mechanism == "mde" || mechanism == "expmech") {
    mech = dpgauss::MdeAuditMechanism(hypotheses, lc.eps, topts);
  } else if (mechanism == "argmax") {
    mech = dpgauss::ArgmaxAuditMechanism(hypotheses, topts);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "mechanism must be mde, expmech or argmax");
  }
  const auto report = dpgauss::PrivacyAudit(mech, lc.eps, 0.0, LoadDataset(d_path),
                                            LoadDataset(dp_path), runs, dpgauss::RngHandle(f.seed.value_or(1)));
  Emit(f.out, dpgauss::AuditReportToJson(report).dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private Gaussian estimation toolkit"};
  app.require_subcommand(1);

  CommonFlags gen_f, cover_f, select_f, learn_f, bench_f, audit_f;
  CoverFlags cover_c;
  std::string data_path, hyp_path, trace_path, d_path, dp_path, mechanism = "mde", inner = "boost1";
  long long runs = 100000;
  int workers = 0;

  auto* gen = app.add_subcommand("gen", "sample a dataset to CSV");
  AddCommon(gen, gen_f);

  auto* cover = app.add_subcommand("cover", "cover construction and audits");
  cover->require_subcommand(1);
  auto* cover_gen = cover->add_subcommand("gen", "materialize a cover as JSON");
  auto* cover_audit = cover->add_subcommand("audit", "certify coverage and fit size exponents");
  for (auto* sub : {cover_gen, cover_audit}) {
    AddCommon(sub, cover_f);
    sub->add_option("--kind", cover_c.kind, "location or scale");
    sub->add_option("--xi", cover_c.xi, "cover accuracy");
    sub->add_option("--gamma", cover_c.gamma, "ball radius");
    sub->add_flag("--enforce-order", cover_c.enforce_order, "reject xi >= gamma");
  }
  cover_gen->add_option("--d", cover_c.d, "dimension");
  cover_audit->add_option("--dims", cover_c.dims, "dimensions to audit")->delimiter(',');
  cover_audit->add_option("--probes", cover_c.probes, "sampled ball members per dimension");

  auto* select = app.add_subcommand("select", "private hypothesis selection");
  select->require_subcommand(1);
  std::vector<std::pair<std::string, CLI::App*>> selects;
  for (const char* name : {"phs", "mde", "gapmax"}) {
    auto* sub = select->add_subcommand(name, std::string("run ") + name);
    AddCommon(sub, select_f);
    sub->add_option("--data", data_path, "dataset CSV")->required();
    sub->add_option("--hypotheses", hyp_path, "hypothesis list or cover JSON");
    selects.emplace_back(name, sub);
  }

  auto* learn = app.add_subcommand("learn", "run a learner on a dataset");
  learn->require_subcommand(1);
  std::vector<std::pair<std::string, CLI::App*>> learns;
  for (const char* name : {"boost1", "boost2", "agnostic"}) {
    auto* sub = learn->add_subcommand(name, std::string("run ") + name);
    AddCommon(sub, learn_f);
    sub->add_option("--data", data_path, "dataset CSV")->required();
    sub->add_option("--trace", trace_path, "JSONL stage trace");
    learns.emplace_back(name, sub);
  }
  learns.back().second->add_option("--inner", inner, "wrapped learner: phs, boost1 or boost2");

  auto* bench = app.add_subcommand("bench", "run an experiment sweep");
  AddCommon(bench, bench_f);
  bench->add_option("--trace", trace_path, "JSONL trace output");
  bench->add_option("--workers", workers, "worker threads");

  auto* audit = app.add_subcommand("audit", "empirical audits");
  audit->require_subcommand(1);
  auto* audit_privacy = audit->add_subcommand("privacy", "frequency audit on neighboring datasets");
  AddCommon(audit_privacy, audit_f);
  audit_privacy->add_option("--data", d_path, "dataset D")->required();
  audit_privacy->add_option("--data-prime", dp_path, "neighboring dataset D'")->required();
  audit_privacy->add_option("--mechanism", mechanism, "mde, expmech or argmax");
  audit_privacy->add_option("--runs", runs, "runs per dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return RunGen(gen_f);
    if (cover_gen->parsed()) return RunCoverGen(cover_f, cover_c);
    if (cover_audit->parsed()) return RunCoverAudit(cover_f, cover_c);
    for (const auto& [name, sub] : selects) {
      if (sub->parsed()) return RunSelect(name, select_f, data_path, hyp_path);
    }
    for (const auto& [name, sub] : learns) {
      if (sub->parsed()) return RunLearn(name, learn_f, data_path, trace_path, inner);
    }
    if (bench->parsed()) return RunBench(bench_f, trace_path, workers);
    if (audit_privacy->parsed()) return RunAuditPrivacy(audit_f, d_path, dp_path, mechanism, runs);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
