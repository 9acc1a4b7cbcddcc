#ifndef INTACT_MODEL_HPP
#define INTACT_MODEL_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <string>
#include <utility>
#include <vector>

#include "intact/types.hpp"

namespace intact {

/// Discrete LTI plant x+ = A x + B u + w, y = C x + v with
/// w ~ N(0, W), v ~ N(0, R).
template <typename Scalar>
struct PlantModel {
  MatrixX<Scalar> A;
  MatrixX<Scalar> B;
  MatrixX<Scalar> C;
  MatrixX<Scalar> W;
  MatrixX<Scalar> R;
  std::vector<std::string> sensor_names;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }

  /// Full n-block observability matrix [C; CA; ...; CA^{n-1}].
  MatrixX<Scalar> observability_matrix(int blocks) const {
    MatrixX<Scalar> obs(blocks * p(), n());
    MatrixX<Scalar> row = C;
    for (int i = 0; i < blocks; ++i) {
      obs.middleRows(i * p(), p()) = row;
      row = (row * A).eval();
    }
    return obs;
  }

  bool observable(Scalar tol = Scalar(1e-9)) const {
    return numerical_rank<Scalar>(observability_matrix(n()), tol) == n();
  }

  /// Checks dimensions, noise-covariance definiteness and observability;
  /// symmetrizes W and R in place (serialization round-off tolerance 1e-9).
  void validate() {
    if (A.rows() < 1 || A.rows() != A.cols()) throw ValidationError("A must be square and nonempty");
    if (B.rows() != A.rows() || B.cols() < 1) throw ValidationError("B must be n x m with m >= 1");
    if (C.cols() != A.rows() || C.rows() < 1) throw ValidationError("C must be p x n with p >= 1");
    if (W.rows() != A.rows() || W.cols() != A.rows()) throw ValidationError("W must be n x n");
    if (R.rows() != C.rows() || R.cols() != C.rows()) throw ValidationError("R must be p x p");
    W = require_symmetric<Scalar>(W, "W");
    R = require_symmetric<Scalar>(R, "R");
    if (!is_positive_semidefinite<Scalar>(W)) throw ValidationError("W must be positive semidefinite");
    if (!is_positive_definite<Scalar>(R)) throw ValidationError("R must be positive definite");
    if (!sensor_names.empty() && static_cast<int>(sensor_names.size()) != p()) {
      throw ValidationError("sensor_names size must equal p");
    }
    if (!observable()) throw ValidationError("(A, C) pair is not observable");
  }
};

using PlantModeld = PlantModel<double>;

/// Steady-state (prediction form) Kalman filter data:
///   Sigma: prediction-error covariance (Riccati fixed point)
///   K    = Sigma C^T (C Sigma C^T + R)^{-1}
///   Q    = C Sigma C^T + R  (residual covariance)
/// Acl = A - K C A and CA = C A are cached for the attack analysis.
template <typename Scalar>
struct SteadyStateFilter {
  MatrixX<Scalar> Sigma;
  MatrixX<Scalar> K;
  MatrixX<Scalar> Q;
  MatrixX<Scalar> Acl;
  MatrixX<Scalar> CA;

  int n() const { return static_cast<int>(Sigma.rows()); }
  int p() const { return static_cast<int>(Q.rows()); }
};

using SteadyStateFilterd = SteadyStateFilter<double>;

/// Compromised-sensor scenario. `compromised` holds 0-based sensor indices.
template <typename Scalar>
struct AttackScenario {
  std::vector<int> compromised;
  Scalar epsilon = Scalar(1e-3);
  Scalar gamma = Scalar(0);

  void validate(int p) const {
    for (int s : compromised) {
      if (s < 0 || s >= p) throw ValidationError("scenario: compromised sensor index out of range");
    }
    if (!(epsilon > Scalar(0))) throw ValidationError("scenario: epsilon must be positive");
    if (gamma < Scalar(0)) throw ValidationError("scenario: gamma must be nonnegative");
  }
};

using AttackScenariod = AttackScenario<double>;

struct RiccatiOptions {
  double rel_tol = 1e-12;
  long max_iterations = 1000000;
};

/// Fixed-point iteration for the prediction-form Riccati equation
///   Sigma = A Sigma A^T + W - A Sigma C^T (C Sigma C^T + R)^{-1} C Sigma A^T,
/// started from W. Throws NumericalError when the iteration budget runs out
/// and ValidationError when the model is rejected.
template <typename Scalar>
SteadyStateFilter<Scalar> solve_steady_state_filter(PlantModel<Scalar> model,
                                                    const RiccatiOptions& opts = {}) {
  model.validate();
  const MatrixX<Scalar>& A = model.A;
  const MatrixX<Scalar>& C = model.C;

  MatrixX<Scalar> S = model.W;
  bool converged = false;
  for (long it = 0; it < opts.max_iterations; ++it) {
    const MatrixX<Scalar> Q = C * S * C.transpose() + model.R;
    const MatrixX<Scalar> CSAt = C * S * A.transpose();
    const MatrixX<Scalar> Sn =
        A * S * A.transpose() + model.W - CSAt.transpose() * Q.ldlt().solve(CSAt);
    const Scalar delta = (Sn - S).norm();
    S = ((Sn + Sn.transpose()) / Scalar(2)).eval();
    if (delta <= Scalar(opts.rel_tol) * (Scalar(1) + S.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericalError("solve_steady_state_filter: Riccati iteration did not converge");

  SteadyStateFilter<Scalar> f;
  f.Sigma = S;
  f.Q = C * S * C.transpose() + model.R;
  f.K = (f.Q.ldlt().solve(C * S.transpose())).transpose();
  f.Acl = A - f.K * C * A;
  f.CA = C * A;
  if (spectral_radius<Scalar>(f.Acl) >= Scalar(1)) {
    throw NumericalError("solve_steady_state_filter: closed loop is not contractive");
  }
  return f;
}

/// Zero-order-hold discretization of (Ac, Bc) with sampling period Ts via the
/// block matrix exponential exp([Ac Bc; 0 0] Ts).
template <typename Scalar>
std::pair<MatrixX<Scalar>, MatrixX<Scalar>> discretize_zoh(const MatrixX<Scalar>& Ac,
                                                           const MatrixX<Scalar>& Bc, Scalar Ts) {
  if (Ts <= Scalar(0)) throw ValidationError("discretize_zoh: period must be positive");
  if (Ac.rows() != Ac.cols() || Bc.rows() != Ac.rows()) {
    throw ValidationError("discretize_zoh: dimension mismatch");
  }
  const int n = static_cast<int>(Ac.rows());
  const int m = static_cast<int>(Bc.cols());
  MatrixX<Scalar> block = MatrixX<Scalar>::Zero(n + m, n + m);
  block.topLeftCorner(n, n) = Ac * Ts;
  block.topRightCorner(n, m) = Bc * Ts;
  const MatrixX<Scalar> e = block.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

}  // namespace intact

#endif  // INTACT_MODEL_HPP
