#ifndef INTACT_ATTACK_HPP
#define INTACT_ATTACK_HPP

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "intact/detector.hpp"
#include "intact/enforcement.hpp"
#include "intact/reachability.hpp"
#include "intact/stepwise.hpp"
#include "intact/types.hpp"

namespace intact {

/// Deterministic stealthy attack plan. Column j-1 holds a_j; columns beyond
/// the horizon are implicitly zero.
template <typename Scalar>
struct AttackSequence {
  int horizon = 0;
  int target_step = 0;
  MatrixX<Scalar> values;  // p x horizon
  Scalar achieved_error = Scalar(0);
  bool prefix_stealthy = true;
  Scalar max_prefix_ratio = Scalar(0);  ///< max_tau ||prefix||_{Theta_tau} / alpha_tau
};

using AttackSequenced = AttackSequence<double>;

/// Deterministic error/residual response of the attack dynamics
///   de_k = Acl de_{k-1} - K a_k,   dz_k = CA de_{k-1} + a_k,   de_0 = 0.
template <typename Scalar>
void attack_response(const SteadyStateFilter<Scalar>& filter, const AttackSequence<Scalar>& attack,
                     int steps, MatrixX<Scalar>* de_out, MatrixX<Scalar>* dz_out) {
  const int n = filter.n();
  const int p = filter.p();
  VectorX<Scalar> de = VectorX<Scalar>::Zero(n);
  if (de_out) de_out->resize(n, steps);
  if (dz_out) dz_out->resize(p, steps);
  for (int k = 1; k <= steps; ++k) {
    const VectorX<Scalar> a = k <= attack.horizon ? VectorX<Scalar>(attack.values.col(k - 1))
                                                  : VectorX<Scalar>(VectorX<Scalar>::Zero(p));
    const VectorX<Scalar> dz = filter.CA * de + a;
    de = filter.Acl * de - filter.K * a;
    if (dz_out) dz_out->col(k - 1) = dz;
    if (de_out) de_out->col(k - 1) = de;
  }
}

/// Closed-form worst-case policy-aware attack for the cumulative detector:
/// maximizes ||de_k|| subject to the anchored constraint ||P a||_Theta <= alpha
/// by scaling Theta^{-1} G^T w along the top eigen-direction w of the region
/// shape. Prefix stealthiness is re-verified by direct simulation.
template <typename Scalar>
AttackSequence<Scalar> synthesize_worst_attack(const SteadyStateFilter<Scalar>& filter,
                                               const SupportPattern& pattern, Scalar epsilon,
                                               Scalar h, int target_step,
                                               std::optional<Scalar> alpha_override = {}) {
  const int p = filter.p();
  const int t = pattern.anchor_for(target_step);
  if (t > pattern.horizon()) {
    throw ValidationError("synthesize_worst_attack: pattern does not cover the anchor");
  }
  AttackSequence<Scalar> seq;
  seq.horizon = t;
  seq.target_step = target_step;
  seq.values = MatrixX<Scalar>::Zero(p, t);

  const int qt = pattern.q_size(t);
  const Scalar alpha = alpha_override
                           ? *alpha_override
                           : Scalar(sprt_radius(double(epsilon), p, double(h), t));
  if (qt == 0 || alpha <= Scalar(0) || pattern.q_size(target_step) == 0) return seq;

  StealthGramBuilder<Scalar> builder(filter, pattern);
  builder.advance_to(t);
  const MatrixX<Scalar> shape = builder.shape_at(target_step, Scalar(1));
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(shape);
  const int top = static_cast<int>(shape.rows()) - 1;
  const Scalar lam = es.eigenvalues()(top);
  if (lam <= Scalar(0)) return seq;
  const VectorX<Scalar> w = es.eigenvectors().col(top);

  const int qk = pattern.q_size(target_step);
  VectorX<Scalar> g = VectorX<Scalar>::Zero(qt);
  g.head(qk) = builder.error_map_at(target_step).transpose() * w;
  const VectorX<Scalar> u = builder.factor().solve(g);
  // sign: de_k = -M a, so flip to make the achieved error point along +w
  const VectorX<Scalar> a_packed = -(alpha / std::sqrt(lam)) * u;

  int col = 0;
  for (int j = 1; j <= t; ++j) {
    for (int s : pattern.support_at(j)) seq.values(s, j - 1) = a_packed(col++);
  }
  seq.achieved_error = alpha * std::sqrt(lam);

  // prefix constraints, by direct simulation of the residual response
  MatrixX<Scalar> dz;
  attack_response<Scalar>(filter, seq, t, nullptr, &dz);
  const Eigen::LDLT<MatrixX<Scalar>> qinv(filter.Q);
  Scalar cum = Scalar(0);
  for (int tau = 1; tau <= t; ++tau) {
    cum += Scalar(dz.col(tau - 1).dot(qinv.solve(dz.col(tau - 1))));
    const Scalar a_tau = Scalar(sprt_radius(double(epsilon), p, double(h), tau));
    const Scalar ratio = a_tau > Scalar(0) ? std::sqrt(cum) / a_tau
                                           : (cum > Scalar(0) ? std::numeric_limits<Scalar>::infinity()
                                                              : Scalar(0));
    seq.max_prefix_ratio = std::max(seq.max_prefix_ratio, ratio);
  }
  seq.prefix_stealthy = seq.max_prefix_ratio <= Scalar(1) + Scalar(1e-9);
  return seq;
}

/// Extremal per-step-stealthy attack against an unprotected horizon: every
/// residual deviation rides the per-step radius `abar` in the direction that
/// maximizes ||de_target||. Requires all sensors compromised (the residual
/// parametrization needs a full attack channel).
template <typename Scalar>
AttackSequence<Scalar> synthesize_stepwise_attack(const SteadyStateFilter<Scalar>& filter,
                                                  const MatrixX<Scalar>& A, Scalar abar,
                                                  int target_step, int directions = 0) {
  const int n = filter.n();
  const int p = filter.p();
  AttackSequence<Scalar> seq;
  seq.horizon = target_step;
  seq.target_step = target_step;
  seq.values = MatrixX<Scalar>::Zero(p, target_step);
  if (abar <= Scalar(0)) return seq;

  const int ndir = directions > 0 ? directions : (n == 1 ? 1 : n == 2 ? 1440 : 4096);
  const MatrixX<Scalar> dirs = stepwise_detail::direction_grid<Scalar>(n, ndir);
  const MatrixX<Scalar> qh = psd_sqrt<Scalar>(filter.Q);

  // direction of maximal accumulated response
  VectorX<Scalar> h = VectorX<Scalar>::Zero(dirs.rows());
  MatrixX<Scalar> apow = MatrixX<Scalar>::Identity(n, n);  // A^{k-j} as j descends
  std::vector<MatrixX<Scalar>> powers(static_cast<size_t>(target_step));
  for (int j = target_step; j >= 1; --j) {
    powers[static_cast<size_t>(j - 1)] = apow;
    h += abar * (dirs * (apow * filter.K * qh)).rowwise().norm();
    apow = (A * apow).eval();
  }
  Eigen::Index best = 0;
  h.maxCoeff(&best);
  VectorX<Scalar> d = dirs.row(best).transpose();
  // both signs reach the same norm; keep as is
  VectorX<Scalar> de = VectorX<Scalar>::Zero(n);
  for (int j = 1; j <= target_step; ++j) {
    const VectorX<Scalar> g = filter.K.transpose() * powers[static_cast<size_t>(j - 1)].transpose() * d;
    const Scalar denom = (qh * g).norm();
    VectorX<Scalar> dz = VectorX<Scalar>::Zero(p);
    if (denom > Scalar(0)) dz = -(abar / denom) * (filter.Q * g);
    seq.values.col(j - 1) = dz - filter.CA * de;
    de = A * de - filter.K * dz;
  }
  seq.achieved_error = de.norm();
  return seq;
}

}  // namespace intact

#endif  // INTACT_ATTACK_HPP
