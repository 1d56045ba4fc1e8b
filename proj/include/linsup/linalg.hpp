// Copyright 2026 The linsup Authors
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

#ifndef LINSUP_LINALG_HPP_
#define LINSUP_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "linsup/error.hpp"

namespace linsup {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double LogSumExp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

inline double LogSumExp(const VectorXd& values) {
  return LogSumExp(std::span<const double>(values.data(), values.size()));
}

inline MatrixXd Symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

struct SymmetricSplit {
  MatrixXd range;    // orthonormal basis of eigenvalues above threshold
  MatrixXd null;     // orthonormal basis of the rest
  VectorXd eigenvalues;
};

// Splits a symmetric PSD matrix into range and null space. An eigenvalue
// counts as zero when it is below rel_threshold times the largest one.
inline SymmetricSplit SplitRange(const MatrixXd& m, double rel_threshold = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Symmetrize(m));
  const VectorXd& ev = eig.eigenvalues();
  const double top = ev.size() ? std::max(ev.cwiseAbs().maxCoeff(), 0.0) : 0.0;
  const double cut = rel_threshold * top;
  int rank = 0;
  for (int i = 0; i < ev.size(); ++i) rank += ev[i] > cut ? 1 : 0;
  SymmetricSplit out;
  out.eigenvalues = ev;
  const int n = static_cast<int>(m.rows());
  // Eigen sorts ascending: null part first, range part last.
  out.null = eig.eigenvectors().leftCols(n - rank);
  out.range = eig.eigenvectors().rightCols(rank);
  if (top == 0.0) {
    out.null = MatrixXd::Identity(n, n);
    out.range = MatrixXd(n, 0);
  }
  return out;
}

// Pseudo-inverse of a symmetric matrix through its eigendecomposition.
inline MatrixXd SymmetricPinv(const MatrixXd& m, double rel_threshold = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Symmetrize(m));
  const VectorXd& ev = eig.eigenvalues();
  const double top = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  VectorXd inv = VectorXd::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) > rel_threshold * top) inv[i] = 1.0 / ev[i];
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

// Inverse of a symmetric positive definite matrix; refuses rather than
// regularizes when the smallest eigenvalue falls below rel_threshold * largest.
inline MatrixXd InverseSpd(const MatrixXd& m, ErrorCode code,
                           const std::string& what, double rel_threshold = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Symmetrize(m));
  const VectorXd& ev = eig.eigenvalues();
  const double top = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  if (ev.size() == 0 || !(ev.minCoeff() > rel_threshold * top) || top == 0.0) {
    throw Error(code, what + " is singular (min eigenvalue " +
                          std::to_string(ev.size() ? ev.minCoeff() : 0.0) +
                          ", max " + std::to_string(top) + ")");
  }
  return eig.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

inline double MinEigenvalue(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Symmetrize(m), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

inline bool IsPsd(const MatrixXd& m, double tol = 1e-10) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return MinEigenvalue(m) >= -tol * scale;
}

// Moore-Penrose pseudo-inverse via SVD, singular values below
// rel_threshold * sigma_max dropped.
inline MatrixXd Pinv(const MatrixXd& a, double rel_threshold = 1e-10) {
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double top = s.size() ? s[0] : 0.0;
  VectorXd inv = VectorXd::Zero(s.size());
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > rel_threshold * top) inv[i] = 1.0 / s[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline int NumericalRank(const MatrixXd& a, double rel_threshold = 1e-10) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(a);
  const VectorXd& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) rank += s[i] > rel_threshold * s[0] ? 1 : 0;
  return rank;
}

}  // namespace linsup

#endif  // LINSUP_LINALG_HPP_
