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

#ifndef DPGAUSS_GAUSSIAN_HPP_
#define DPGAUSS_GAUSSIAN_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dpgauss/error.hpp"
#include "dpgauss/rng.hpp"

namespace dpgauss {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Numerical tolerances shared by every module.
struct Tolerances {
  // Max absolute asymmetry accepted for a covariance matrix.
  double symmetry = 1e-10;
  // Eigenvalues in [-psd, 0) are clamped to zero; anything below is rejected.
  // Densities require the smallest eigenvalue to exceed this value.
  double psd = 1e-9;
  // Relative eigenvalue threshold (times the largest eigenvalue) for rank.
  double rank = 1e-9;
};

// Symmetric PSD square root by eigendecomposition, negative eigenvalues
// clamped to zero.
inline Matrix SqrtPsd(const Matrix& s) {
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

// Inverse symmetric square root of a strictly positive definite matrix.
inline Matrix InvSqrtPsd(const Matrix& s, const Tolerances& tol = {}) {
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.eigenvalues().minCoeff() <= tol.psd) {
    throw Error(ErrorCode::kSingularCovariance, "matrix is not strictly positive definite");
  }
  const Vector inv_root = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_root.asDiagonal() * eig.eigenvectors().transpose();
}

inline double MinEigenvalue(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

// A d-dimensional Gaussian N(mean, cov). The covariance is stored
// symmetrized and with tiny negative eigenvalues clamped, so every
// constructed value satisfies the PSD invariant.
class Gaussian {
 public:
  Gaussian(Vector mean, Matrix cov, const Tolerances& tol = {})
      : mean_(std::move(mean)), cov_(std::move(cov)) {
    const auto d = mean_.size();
    internal::Require(d >= 1, ErrorCode::kDimensionMismatch, "Gaussian needs dimension >= 1");
    internal::Require(cov_.rows() == d && cov_.cols() == d, ErrorCode::kDimensionMismatch,
                      "covariance shape does not match mean length");
    internal::Require(mean_.allFinite() && cov_.allFinite(), ErrorCode::kInvalidArgument,
                      "non-finite Gaussian parameters");
    const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
    if (asym > tol.symmetry) {
      throw Error(ErrorCode::kNotSymmetric, "covariance asymmetry " + std::to_string(asym));
    }
    cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
    Eigen::LLT<Matrix> llt(cov_);
    if (llt.info() == Eigen::Success) return;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (min_eig < -tol.psd) {
      throw Error(ErrorCode::kNotPsd, "covariance eigenvalue " + std::to_string(min_eig));
    }
    if (min_eig < 0.0) {
      const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
      cov_ = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
      cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
    }
  }

  static Gaussian Standard(Eigen::Index d) {
    return Gaussian(Vector::Zero(d), Matrix::Identity(d, d));
  }
  static Gaussian Isotropic(Vector mean) {
    const auto d = mean.size();
    return Gaussian(std::move(mean), Matrix::Identity(d, d));
  }
  static Gaussian Univariate(double mean, double variance) {
    return Gaussian(Vector::Constant(1, mean), Matrix::Constant(1, 1, variance));
  }

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  Eigen::Index dim() const { return mean_.size(); }

  friend bool operator==(const Gaussian& a, const Gaussian& b) {
    return a.mean_ == b.mean_ && a.cov_ == b.cov_;
  }

 private:
  Vector mean_;
  Matrix cov_;
};

// An ordered list of n points in R^d, stored one point per column.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Eigen::Index dim) : points_(dim, 0) {}
  explicit Dataset(Matrix points) : points_(std::move(points)) {}

  Eigen::Index size() const { return points_.cols(); }
  Eigen::Index dim() const { return points_.rows(); }
  bool empty() const { return size() == 0; }

  auto point(Eigen::Index i) const { return points_.col(i); }
  auto point(Eigen::Index i) { return points_.col(i); }
  const Matrix& points() const { return points_; }
  Matrix& points() { return points_; }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.points_.rows() == b.points_.rows() && a.points_.cols() == b.points_.cols() &&
           a.points_ == b.points_;
  }

 private:
  Matrix points_;
};

// Neighboring datasets have the same size and differ in at most one point.
inline bool AreNeighbors(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) return false;
  int differing = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a.point(i) != b.point(i) && ++differing > 1) return false;
  }
  return true;
}

// Log-density evaluator with the factorization done once. Construction
// fails with SingularCovariance unless the covariance is strictly PD.
class DensityEvaluator {
 public:
  explicit DensityEvaluator(const Gaussian& g, const Tolerances& tol = {}) : mean_(g.mean()) {
    if (MinEigenvalue(g.cov()) <= tol.psd) {
      throw Error(ErrorCode::kSingularCovariance,
                  "density undefined for a singular covariance; project to its range first");
    }
    llt_.compute(g.cov());
    const Matrix& l = llt_.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    log_norm_ = -0.5 * (static_cast<double>(g.dim()) * std::log(2.0 * std::numbers::pi) + log_det);
  }

  Eigen::Index dim() const { return mean_.size(); }

  template <typename Derived>
  double LogDensity(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != mean_.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "point dimension does not match Gaussian");
    }
    const Vector r = llt_.matrixL().solve(x - mean_);
    return log_norm_ - 0.5 * r.squaredNorm();
  }

  // Log-densities of every point of a d x n matrix.
  Vector LogDensities(const Matrix& points) const {
    if (points.rows() != mean_.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "point dimension does not match Gaussian");
    }
    Matrix centered = points.colwise() - mean_;
    llt_.matrixL().solveInPlace(centered);
    return (log_norm_ - 0.5 * centered.colwise().squaredNorm().array()).matrix().transpose();
  }

 private:
  Vector mean_;
  Eigen::LLT<Matrix> llt_;
  double log_norm_ = 0.0;
};

template <typename Derived>
double LogDensity(const Gaussian& g, const Eigen::MatrixBase<Derived>& x,
                  const Tolerances& tol = {}) {
  return DensityEvaluator(g, tol).LogDensity(x);
}

// Fills a d x n matrix with i.i.d. N(0, 1) draws, column by column.
inline Matrix StandardNormalMatrix(Eigen::Index d, Eigen::Index n, Engine& engine) {
  std::normal_distribution<double> normal;
  Matrix z(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) z(i, j) = normal(engine);
  }
  return z;
}

// Draws through the symmetric PSD root, so singular covariances produce
// points on the range of the covariance.
inline Dataset Sample(const Gaussian& g, Eigen::Index n, Engine& engine) {
  internal::Require(n >= 0, ErrorCode::kInvalidArgument, "negative sample count");
  if (n == 0) return Dataset(g.dim());
  Matrix pts = SqrtPsd(g.cov()) * StandardNormalMatrix(g.dim(), n, engine);
  pts.colwise() += g.mean();
  return Dataset(std::move(pts));
}

inline Dataset Sample(const Gaussian& g, Eigen::Index n, const RngHandle& rng) {
  Engine engine = rng.MakeEngine();
  return Sample(g, n, engine);
}

// Law of A X + b for X ~ g.
inline Gaussian Affine(const Gaussian& g, const Matrix& a, const Vector& b) {
  internal::Require(a.cols() == g.dim() && a.rows() == b.size(), ErrorCode::kDimensionMismatch,
                    "affine map shape does not conform");
  Matrix cov = a * g.cov() * a.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return Gaussian(a * g.mean() + b, std::move(cov));
}

inline Dataset AffineMap(const Dataset& data, const Matrix& a, const Vector& b) {
  internal::Require(a.cols() == data.dim() && a.rows() == b.size(), ErrorCode::kDimensionMismatch,
                    "affine map shape does not conform");
  Matrix pts = a * data.points();
  pts.colwise() += b;
  return Dataset(std::move(pts));
}

struct RangeProjection {
  // r x r full-rank covariance basis^T S basis.
  Matrix reduced_cov;
  // Data expressed in range coordinates (basis^T x).
  Dataset reduced_data;
  // d x r matrix with orthonormal columns spanning the range of S.
  Matrix basis;
  Eigen::Index rank = 0;
};

// Restricts a PSD matrix (and a dataset) to the range of the matrix. Basis
// columns are ordered by decreasing eigenvalue and signed so that their
// largest-magnitude entry is positive.
inline RangeProjection ProjectToRange(const Matrix& s, const Dataset& data, const Tolerances& tol = {}) {
  internal::Require(s.rows() == s.cols(), ErrorCode::kDimensionMismatch, "matrix must be square");
  internal::Require(data.dim() == s.rows(), ErrorCode::kDimensionMismatch,
                    "dataset dimension does not match matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
  const Vector& values = eig.eigenvalues();
  const double lambda_max = values.maxCoeff();
  if (!(lambda_max > 0.0)) throw Error(ErrorCode::kZeroRank, "matrix has rank zero");
  const double threshold = tol.rank * lambda_max;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
    if (values(i) > threshold) kept.push_back(i);
  }
  RangeProjection out;
  out.rank = static_cast<Eigen::Index>(kept.size());
  out.basis.resize(s.rows(), out.rank);
  for (Eigen::Index c = 0; c < out.rank; ++c) {
    Vector v = eig.eigenvectors().col(kept[c]);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.basis.col(c) = v;
  }
  out.reduced_cov = out.basis.transpose() * s * out.basis;
  out.reduced_cov = 0.5 * (out.reduced_cov + out.reduced_cov.transpose()).eval();
  out.reduced_data = Dataset(Matrix(out.basis.transpose() * data.points()));
  return out;
}

// CSV: one point per row, d decimal columns, no header.
inline Dataset ReadDatasetCsv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      const auto first = field.find_first_not_of(" \t");
      const auto last = field.find_last_not_of(" \t");
      if (first == std::string::npos) {
        throw Error(ErrorCode::kParse, "empty field on line " + std::to_string(line_no));
      }
      const char* begin = field.data() + first;
      const char* end = field.data() + last + 1;
      if (*begin == '+') ++begin;
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::kParse, "bad number '" + field + "' on line " + std::to_string(line_no));
      }
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::kParse, "ragged row on line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Dataset();
  Matrix pts(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t i = 0; i < rows[j].size(); ++i) pts(i, j) = rows[j][i];
  }
  return Dataset(std::move(pts));
}

inline std::string FormatDouble(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

inline void WriteDatasetCsv(const Dataset& data, std::ostream& out) {
  for (Eigen::Index j = 0; j < data.size(); ++j) {
    for (Eigen::Index i = 0; i < data.dim(); ++i) {
      if (i > 0) out << ',';
      out << FormatDouble(data.point(j)(i));
    }
    out << '\n';
  }
}

}  // namespace dpgauss

#endif  // DPGAUSS_GAUSSIAN_HPP_
