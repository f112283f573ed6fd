#pragma once

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mtts/errors.hpp"

namespace mtts {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace linalg {

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-6;

// Cholesky factor of a symmetric PSD matrix. Tries the matrix as given, then
// adds diagonal jitter starting at 1e-10 and growing x10 up to 1e-6.
class JitteredCholesky {
 public:
  JitteredCholesky() = default;

  explicit JitteredCholesky(const Matrix& a, const char* what = "matrix") { compute(a, what); }

  void compute(const Matrix& a, const char* what = "matrix") {
    const auto n = a.rows();
    if (n != a.cols()) throw NumericalError(std::string(what) + ": not square");
    jitter_ = 0.0;
    llt_.compute(a);
    if (llt_.info() == Eigen::Success && finite_factor()) return;
    for (double jitter = kJitterStart; jitter <= kJitterMax * 1.0000001; jitter *= 10.0) {
      Matrix shifted = a;
      shifted.diagonal().array() += jitter;
      llt_.compute(shifted);
      if (llt_.info() == Eigen::Success && finite_factor()) {
        jitter_ = jitter;
        return;
      }
    }
    throw NumericalError(std::string(what) + ": Cholesky factorization failed after jitter 1e-6");
  }

  [[nodiscard]] Matrix solve(const Matrix& b) const { return llt_.solve(b); }
  [[nodiscard]] Vector solve(const Vector& b) const { return llt_.solve(b); }
  [[nodiscard]] Matrix inverse() const {
    return llt_.solve(Matrix::Identity(llt_.rows(), llt_.cols()));
  }
  [[nodiscard]] Matrix lower() const { return llt_.matrixL(); }
  [[nodiscard]] double jitter() const { return jitter_; }

  [[nodiscard]] double log_determinant() const {
    const Matrix& lu = llt_.matrixLLT();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < lu.rows(); ++i) acc += std::log(lu(i, i));
    return 2.0 * acc;
  }

 private:
  [[nodiscard]] bool finite_factor() const { return llt_.matrixLLT().allFinite(); }

  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.size() == 0 && b.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

// Symmetric check plus factorization success with 1e-10 diagonal jitter.
inline bool is_symmetric_psd(const Matrix& m, double sym_tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  if (!m.allFinite()) return false;
  if (m.size() == 0) return true;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale) return false;
  Matrix shifted = symmetrize(m);
  shifted.diagonal().array() += kJitterStart * scale;
  Eigen::LLT<Matrix> llt(shifted);
  return llt.info() == Eigen::Success && llt.matrixLLT().allFinite();
}

inline bool is_positive_definite(const Matrix& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  Eigen::LLT<Matrix> llt(symmetrize(m));
  return llt.info() == Eigen::Success && llt.matrixLLT().allFinite();
}

// Symmetrizes and clamps eigenvalues in [-1e-10, 0) to zero. Anything more
// negative is a genuine PSD violation.
inline Matrix clamp_psd(const Matrix& m, const char* what = "covariance") {
  Matrix s = symmetrize(m);
  if (s.size() == 0) return s;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw NumericalError(std::string(what) + ": not positive semi-definite (min eigenvalue " +
                         std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
  if (eig.eigenvalues().minCoeff() >= 0.0) return s;
  const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
  return symmetrize(eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose());
}

// A square root factor L with L L^T = cov. Uses Cholesky when it succeeds and
// a clamped eigendecomposition otherwise, so rank-deficient (even zero)
// covariances yield exact samples on their support.
inline Matrix covariance_factor(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success && llt.matrixLLT().allFinite()) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(cov));
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -kJitterStart * scale) {
    throw NumericalError("covariance factorization failed");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace linalg
}  // namespace mtts
