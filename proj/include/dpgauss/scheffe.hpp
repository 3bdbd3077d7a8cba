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

#ifndef DPGAUSS_SCHEFFE_HPP_
#define DPGAUSS_SCHEFFE_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dpgauss/error.hpp"
#include "dpgauss/gaussian.hpp"
#include "dpgauss/rng.hpp"
#include "dpgauss/tv.hpp"
#include "json.hpp"

namespace dpgauss {

// x is in A_ij iff log p_i(x) > log p_j(x). Ties belong to neither set.
template <typename Derived>
bool ScheffeMember(const Gaussian& h_i, const Gaussian& h_j, const Eigen::MatrixBase<Derived>& x,
                   const Tolerances& tol = {}) {
  internal::Require(h_i.dim() == h_j.dim() && x.size() == h_i.dim(), ErrorCode::kDimensionMismatch,
                    "Scheffe membership needs matching dimensions");
  return LogDensity(h_i, x, tol) > LogDensity(h_j, x, tol);
}

// Fraction of the dataset inside A_ij. Exact.
inline double EmpiricalMass(const Gaussian& h_i, const Gaussian& h_j, const Dataset& data,
                            const Tolerances& tol = {}) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "empirical mass of an empty dataset");
  internal::Require(h_i.dim() == h_j.dim() && data.dim() == h_i.dim(), ErrorCode::kDimensionMismatch,
                    "Scheffe membership needs matching dimensions");
  const Vector li = DensityEvaluator(h_i, tol).LogDensities(data.points());
  const Vector lj = DensityEvaluator(h_j, tol).LogDensities(data.points());
  return static_cast<double>((li.array() > lj.array()).count()) / static_cast<double>(data.size());
}

// Monte-Carlo estimate of Pr_{x ~ source}[x in A_ij] with a 95% binomial
// half-width. Depends only on the hypotheses and the stream.
inline TvEstimate ScheffeMass(const Gaussian& source, const Gaussian& h_i, const Gaussian& h_j,
                              long long n_mc, const RngHandle& rng, const Tolerances& tol = {}) {
  internal::Require(n_mc >= 1, ErrorCode::kInvalidArgument, "n_mc must be positive");
  internal::Require(source.dim() == h_i.dim() && h_i.dim() == h_j.dim(), ErrorCode::kDimensionMismatch,
                    "Scheffe mass needs matching dimensions");
  if (h_i == h_j) return {0.0, 0.0, n_mc};
  const DensityEvaluator pi(h_i, tol), pj(h_j, tol);
  const Dataset draws = Sample(source, static_cast<Eigen::Index>(n_mc), rng);
  const Vector li = pi.LogDensities(draws.points());
  const Vector lj = pj.LogDensities(draws.points());
  const double p = static_cast<double>((li.array() > lj.array()).count()) / static_cast<double>(n_mc);
  return {p, kZ95 * std::sqrt(p * (1.0 - p) / static_cast<double>(n_mc)), n_mc};
}

// Closed-form Pr_{source}[A_ij] where one exists: any 1-d triple, or h_i and
// h_j sharing a covariance (A_ij is then a half-space).
inline std::optional<double> ExactScheffeMass(const Gaussian& source, const Gaussian& h_i,
                                              const Gaussian& h_j) {
  if (h_i == h_j) return 0.0;
  if (h_i.dim() == 1) {
    return NormalIntervalMass(source, ScheffeIntervals1d(h_i, h_j));
  }
  if (h_i.cov() != h_j.cov()) return std::nullopt;
  Eigen::LLT<Matrix> llt(h_i.cov());
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Vector w = llt.solve(h_i.mean() - h_j.mean());
  const double c = 0.5 * (h_i.mean() + h_j.mean()).dot(w);
  const double spread = std::sqrt(w.dot(source.cov() * w));
  const double shift = w.dot(source.mean()) - c;
  if (spread == 0.0) return shift > 0.0 ? 1.0 : 0.0;
  return NormalCdf(shift / spread);
}

enum class MassMethod { kMonteCarlo, kExact, kAuto };

inline std::string MassMethodName(MassMethod method) {
  switch (method) {
    case MassMethod::kMonteCarlo: return "mc";
    case MassMethod::kExact: return "exact";
    case MassMethod::kAuto: return "auto";
  }
  return "auto";
}

inline MassMethod ParseMassMethod(const std::string& name) {
  if (name == "mc") return MassMethod::kMonteCarlo;
  if (name == "exact") return MassMethod::kExact;
  if (name == "auto") return MassMethod::kAuto;
  throw Error(ErrorCode::kParse, "unknown mass method '" + name + "'");
}

// Data-independent Scheffe masses for a hypothesis list. own(i, j) holds
// H_i(A_ij) and cross(i, j) holds H_i(A_ji), i.e. the mass the source i puts
// on the Scheffe set won by its opponent. Together they give every term of
// 2 TV(H_i, H_j) = (H_i(A_ij) - H_j(A_ij)) + (H_j(A_ji) - H_i(A_ji)).
class MassTable {
 public:
  MassTable() = default;
  MassTable(Matrix own, Matrix cross, Matrix own_hw, Matrix cross_hw, long long n_mc)
      : own_(std::move(own)), cross_(std::move(cross)), own_hw_(std::move(own_hw)),
        cross_hw_(std::move(cross_hw)), n_mc_(n_mc) {}

  Eigen::Index size() const { return own_.rows(); }
  long long n_mc() const { return n_mc_; }

  double own(Eigen::Index i, Eigen::Index j) const { return own_(i, j); }
  double cross(Eigen::Index i, Eigen::Index j) const { return cross_(i, j); }
  double own_half_width(Eigen::Index i, Eigen::Index j) const { return own_hw_(i, j); }
  double cross_half_width(Eigen::Index i, Eigen::Index j) const { return cross_hw_(i, j); }
  const Matrix& own_matrix() const { return own_; }
  const Matrix& cross_matrix() const { return cross_; }

  // H_s(A_ij) for a source s in {i, j}.
  double MassSrc(Eigen::Index s, Eigen::Index i, Eigen::Index j) const {
    if (i == j) return 0.0;
    if (s == i) return own_(i, j);
    if (s == j) return cross_(j, i);
    throw Error(ErrorCode::kInvalidArgument, "masses are stored only for sources i and j");
  }

  // TV(H_i, H_j) reconstructed through the Scheffe identity.
  double Tv(Eigen::Index i, Eigen::Index j) const {
    if (i == j) return 0.0;
    const double twice = (own_(i, j) - cross_(j, i)) + (own_(j, i) - cross_(i, j));
    return std::clamp(0.5 * twice, 0.0, 1.0);
  }

  nlohmann::json ToJson() const {
    auto mat = [](const Matrix& m) {
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
      }
      return rows;
    };
    return {{"n_mc", n_mc_}, {"own", mat(own_)}, {"cross", mat(cross_)},
            {"own_hw", mat(own_hw_)}, {"cross_hw", mat(cross_hw_)}};
  }

  static MassTable FromJson(const nlohmann::json& j) {
    auto mat = [](const nlohmann::json& rows) {
      const auto m = static_cast<Eigen::Index>(rows.size());
      Matrix out(m, m);
      for (Eigen::Index i = 0; i < m; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != m) {
          throw Error(ErrorCode::kParse, "mass block is not square");
        }
        for (Eigen::Index k = 0; k < m; ++k) out(i, k) = rows[i][k].get<double>();
      }
      return out;
    };
    return MassTable(mat(j.at("own")), mat(j.at("cross")), mat(j.at("own_hw")), mat(j.at("cross_hw")),
                     j.at("n_mc").get<long long>());
  }

 private:
  Matrix own_, cross_, own_hw_, cross_hw_;
  long long n_mc_ = 0;
};

namespace internal {

inline void CheckHypotheses(const std::vector<Gaussian>& hypotheses) {
  if (hypotheses.empty()) throw Error(ErrorCode::kEmptyCandidates, "no hypotheses");
  for (const Gaussian& h : hypotheses) {
    internal::Require(h.dim() == hypotheses.front().dim(), ErrorCode::kDimensionMismatch,
                      "hypotheses of different dimensions");
  }
}

}  // namespace internal

// Builds the pairwise mass block. Monte-Carlo draws for source i come from
// rng.Split(i) and are shared across all opponents j.
inline MassTable BuildMassTable(const std::vector<Gaussian>& hypotheses, long long n_mc, const RngHandle& rng,
                                MassMethod method = MassMethod::kAuto, const Tolerances& tol = {}) {
  internal::CheckHypotheses(hypotheses);
  internal::Require(n_mc >= 1 || method == MassMethod::kExact, ErrorCode::kInvalidArgument,
                    "n_mc must be positive");
  const auto m = static_cast<Eigen::Index>(hypotheses.size());
  Matrix own = Matrix::Zero(m, m), cross = Matrix::Zero(m, m);
  Matrix own_hw = Matrix::Zero(m, m), cross_hw = Matrix::Zero(m, m);
  std::vector<DensityEvaluator> evals;
  evals.reserve(hypotheses.size());
  for (const Gaussian& h : hypotheses) evals.emplace_back(h, tol);

  for (Eigen::Index i = 0; i < m; ++i) {
    std::optional<Vector> own_log;
    Dataset draws;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j || hypotheses[i] == hypotheses[j]) continue;
      if (method != MassMethod::kMonteCarlo) {
        auto a = ExactScheffeMass(hypotheses[i], hypotheses[i], hypotheses[j]);
        auto b = ExactScheffeMass(hypotheses[i], hypotheses[j], hypotheses[i]);
        if (a && b) {
          own(i, j) = *a;
          cross(i, j) = *b;
          continue;
        }
        if (method == MassMethod::kExact) {
          throw Error(ErrorCode::kInvalidArgument, "no closed-form Scheffe mass for this pair");
        }
      }
      if (!own_log) {
        draws = Sample(hypotheses[i], static_cast<Eigen::Index>(n_mc), rng.Split(static_cast<std::uint64_t>(i)));
        own_log = evals[i].LogDensities(draws.points());
      }
      const Vector other = evals[j].LogDensities(draws.points());
      const double n = static_cast<double>(n_mc);
      const double p_own = static_cast<double>((own_log->array() > other.array()).count()) / n;
      const double p_cross = static_cast<double>((own_log->array() < other.array()).count()) / n;
      own(i, j) = p_own;
      cross(i, j) = p_cross;
      own_hw(i, j) = kZ95 * std::sqrt(p_own * (1.0 - p_own) / n);
      cross_hw(i, j) = kZ95 * std::sqrt(p_cross * (1.0 - p_cross) / n);
    }
  }
  return MassTable(std::move(own), std::move(cross), std::move(own_hw), std::move(cross_hw), n_mc);
}

// Stable 64-bit FNV-1a digest of a hypothesis list.
inline std::uint64_t HashHypotheses(const std::vector<Gaussian>& hypotheses) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < len; ++k) {
      h ^= bytes[k];
      h *= 0x100000001b3ULL;
    }
  };
  for (const Gaussian& g : hypotheses) {
    const auto d = static_cast<std::int64_t>(g.dim());
    mix(&d, sizeof(d));
    mix(g.mean().data(), sizeof(double) * static_cast<std::size_t>(g.mean().size()));
    mix(g.cov().data(), sizeof(double) * static_cast<std::size_t>(g.cov().size()));
  }
  return h;
}

// Advisory cache of mass blocks keyed by (hypothesis hash, n_mc, seed,
// stream, method). Optionally persisted as JSON. A miss simply recomputes.
class MassCache {
 public:
  MassCache() = default;
  explicit MassCache(std::string path) : path_(std::move(path)) { Load(); }

  std::shared_ptr<const MassTable> GetOrBuild(const std::vector<Gaussian>& hypotheses, long long n_mc,
                                              const RngHandle& rng, MassMethod method = MassMethod::kAuto,
                                              const Tolerances& tol = {}) {
    const Key key{HashHypotheses(hypotheses), n_mc, rng.seed(), rng.stream(), static_cast<int>(method)};
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = entries_.find(key);
      if (it != entries_.end() && it->second->size() == static_cast<Eigen::Index>(hypotheses.size())) {
        ++hits_;
        return it->second;
      }
    }
    auto table = std::make_shared<const MassTable>(BuildMassTable(hypotheses, n_mc, rng, method, tol));
    std::lock_guard<std::mutex> lock(mu_);
    ++misses_;
    entries_[key] = table;
    dirty_ = true;
    return table;
  }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

  void Save() const {
    if (path_.empty() || !dirty_) return;
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [key, table] : entries_) {
      const auto& [hash, n_mc, seed, stream, method] = key;
      out.push_back({{"hash", hash}, {"n_mc", n_mc}, {"seed", seed}, {"stream", stream},
                     {"method", method}, {"table", table->ToJson()}});
    }
    std::ofstream(path_) << out.dump();
  }

 private:
  using Key = std::tuple<std::uint64_t, long long, std::uint64_t, std::uint64_t, int>;

  void Load() {
    std::ifstream in(path_);
    if (!in) return;
    try {
      const auto entries = nlohmann::json::parse(in);
      for (const auto& e : entries) {
        Key key{e.at("hash").get<std::uint64_t>(), e.at("n_mc").get<long long>(),
                e.at("seed").get<std::uint64_t>(), e.at("stream").get<std::uint64_t>(),
                e.at("method").get<int>()};
        entries_[key] = std::make_shared<const MassTable>(MassTable::FromJson(e.at("table")));
      }
    } catch (const std::exception&) {
      entries_.clear();  // a corrupt cache is ignored
    }
  }

  std::string path_;
  std::map<Key, std::shared_ptr<const MassTable>> entries_;
  std::mutex mu_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
  bool dirty_ = false;
};

// emp(i, j) = fraction of the dataset in A_ij, for all ordered pairs.
inline Matrix EmpiricalMassMatrix(const std::vector<Gaussian>& hypotheses, const Dataset& data,
                                  const Tolerances& tol = {}) {
  internal::CheckHypotheses(hypotheses);
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "empirical masses of an empty dataset");
  internal::Require(data.dim() == hypotheses.front().dim(), ErrorCode::kDimensionMismatch,
                    "dataset dimension does not match hypotheses");
  const auto m = static_cast<Eigen::Index>(hypotheses.size());
  const Eigen::Index n = data.size();
  Matrix log_dens(n, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    log_dens.col(i) = DensityEvaluator(hypotheses[i], tol).LogDensities(data.points());
  }
  Matrix emp = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double* a = log_dens.col(i).data();
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double* b = log_dens.col(j).data();
      long long gt = 0, lt = 0;
      for (Eigen::Index k = 0; k < n; ++k) {
        gt += a[k] > b[k];
        lt += a[k] < b[k];
      }
      emp(i, j) = static_cast<double>(gt) / static_cast<double>(n);
      emp(j, i) = static_cast<double>(lt) / static_cast<double>(n);
    }
  }
  return emp;
}

// Hypotheses, their (shared, data-independent) mass block, and the
// empirical Scheffe masses of one dataset.
class ScheffeTable {
 public:
  ScheffeTable(std::vector<Gaussian> hypotheses, std::shared_ptr<const MassTable> masses, Matrix emp,
               Eigen::Index n)
      : hypotheses_(std::move(hypotheses)), masses_(std::move(masses)), emp_(std::move(emp)), n_(n) {
    internal::Require(masses_ && masses_->size() == static_cast<Eigen::Index>(hypotheses_.size()) &&
                          emp_.rows() == masses_->size(),
                      ErrorCode::kDimensionMismatch, "mass block does not match hypotheses");
  }

  // Reuses a precomputed mass block. The block must belong to these
  // hypotheses or to an affine image of them (masses are affine invariant).
  static ScheffeTable WithMasses(std::vector<Gaussian> hypotheses, std::shared_ptr<const MassTable> masses,
                                 const Dataset& data, const Tolerances& tol = {}) {
    Matrix emp = EmpiricalMassMatrix(hypotheses, data, tol);
    return ScheffeTable(std::move(hypotheses), std::move(masses), std::move(emp), data.size());
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(hypotheses_.size()); }
  Eigen::Index n() const { return n_; }
  const std::vector<Gaussian>& hypotheses() const { return hypotheses_; }
  const MassTable& masses() const { return *masses_; }
  std::shared_ptr<const MassTable> shared_masses() const { return masses_; }
  const Matrix& emp_matrix() const { return emp_; }

  double mass(Eigen::Index i, Eigen::Index j) const { return masses_->own(i, j); }
  double emp(Eigen::Index i, Eigen::Index j) const { return emp_(i, j); }

 private:
  std::vector<Gaussian> hypotheses_;
  std::shared_ptr<const MassTable> masses_;
  Matrix emp_;
  Eigen::Index n_ = 0;
};

inline ScheffeTable BuildScheffeTable(const std::vector<Gaussian>& hypotheses, const Dataset& data,
                                      long long n_mc, const RngHandle& rng,
                                      MassMethod method = MassMethod::kAuto, const Tolerances& tol = {}) {
  internal::Require(hypotheses.size() >= 2, ErrorCode::kEmptyCandidates, "a Scheffe table needs m >= 2");
  auto masses = std::make_shared<const MassTable>(BuildMassTable(hypotheses, n_mc, rng, method, tol));
  return ScheffeTable::WithMasses(hypotheses, std::move(masses), data, tol);
}

}  // namespace dpgauss

#endif  // DPGAUSS_SCHEFFE_HPP_
