#ifndef INTACT_TYPES_HPP
#define INTACT_TYPES_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace intact {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorXc = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

/// Inputs that violate a documented precondition (bad dimensions, indefinite
/// covariance, malformed schedule, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to deliver its contract (Riccati iteration did
/// not converge, Gram matrix lost positive definiteness, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Policy synthesis could not find any admissible schedule.
class NoFeasiblePolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small dense-matrix helpers shared across the library.
// ---------------------------------------------------------------------------

/// Accepts M as symmetric when ||M - M^T|| <= tol*(1+||M||) and returns the
/// symmetrized matrix; throws otherwise.
template <typename Scalar>
MatrixX<Scalar> require_symmetric(const MatrixX<Scalar>& m, const std::string& name,
                                  Scalar tol = Scalar(1e-9)) {
  const Scalar defect = (m - m.transpose()).norm();
  if (defect > tol * (Scalar(1) + m.norm())) {
    throw ValidationError(name + " is not symmetric (defect " + std::to_string(double(defect)) + ")");
  }
  return ((m + m.transpose()) / Scalar(2)).eval();
}

template <typename Scalar>
bool is_positive_semidefinite(const MatrixX<Scalar>& m, Scalar tol = Scalar(1e-9)) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return false;
  return es.eigenvalues().minCoeff() >= -tol * (Scalar(1) + m.norm());
}

template <typename Scalar>
bool is_positive_definite(const MatrixX<Scalar>& m) {
  Eigen::LLT<MatrixX<Scalar>> llt(m);
  return llt.info() == Eigen::Success;
}

template <typename Scalar>
Scalar spectral_radius(const MatrixX<Scalar>& m) {
  return Eigen::EigenSolver<MatrixX<Scalar>>(m, false).eigenvalues().cwiseAbs().maxCoeff();
}

/// Symmetric PSD square root; eigenvalues below zero are clipped (noise
/// covariances are allowed to be singular).
template <typename Scalar>
MatrixX<Scalar> psd_sqrt(const MatrixX<Scalar>& m) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("eigen decomposition failed in psd_sqrt");
  VectorX<Scalar> d = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

/// Numerical rank with a relative singular-value cutoff.
template <typename Scalar>
Eigen::Index numerical_rank(const MatrixX<Scalar>& m, Scalar tol = Scalar(1e-9)) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == Scalar(0)) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * sv(0)) ++r;
  return r;
}

/// Columns of the identity selected by `index_set` (0-based); the transpose of
/// the projection that keeps the listed coordinates.
template <typename Scalar>
MatrixX<Scalar> selection_columns(int dim, const std::vector<int>& index_set) {
  MatrixX<Scalar> s = MatrixX<Scalar>::Zero(dim, static_cast<int>(index_set.size()));
  for (int j = 0; j < static_cast<int>(index_set.size()); ++j) {
    s(index_set[static_cast<size_t>(j)], j) = Scalar(1);
  }
  return s;
}

}  // namespace intact

#endif  // INTACT_TYPES_HPP
