#ifndef INTACT_STEPWISE_HPP
#define INTACT_STEPWISE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "intact/detector.hpp"
#include "intact/enforcement.hpp"
#include "intact/model.hpp"
#include "intact/types.hpp"

namespace intact {

// ---------------------------------------------------------------------------
// Per-step reachability for windowed detectors.
//
// With a windowed detector the stealthy set is bracketed by per-step radii
// (window_bounds); under the per-step constraint ||dz_k||_{Q^{-1}} <= abar the
// error recursion, parametrized by the residual deviation the attacker
// chooses to show the detector, becomes
//     de_k = A de_{k-1} - K dz_k,            (all compromised sensors free)
// so the reachable set is an exact Minkowski accumulation of ellipsoids that
// we track through its support function. Enforced steps contribute state
// constraints ||C A Acl^{s-1} de||_{Q^{-1}} <= abar folded into one quadratic
// (sound: the sum of f squares is at most f abar^2), and the policy-aware set
// additionally intersects a backward "must survive the next enforcement
// block" tube. Intersections are bounded by the minimum of support functions,
// which is exact in one dimension and conservative otherwise.
// ---------------------------------------------------------------------------

namespace stepwise_detail {

template <typename Scalar>
struct IntersectNode;

/// Support expression  h(d) = base.h(M^T d) + abar * sum_i ||B_i^T d||.
template <typename Scalar>
struct SetNode {
  MatrixX<Scalar> map;                    // applied to the base set
  std::vector<MatrixX<Scalar>> terms;     // accumulated input ellipsoid shapes
  std::shared_ptr<const IntersectNode<Scalar>> base;  // nullptr = origin
};

/// h(d) = min( r * sqrt(d^T Sinv d), inner.h(d) ).
template <typename Scalar>
struct IntersectNode {
  MatrixX<Scalar> sinv;
  Scalar radius = Scalar(0);
  SetNode<Scalar> inner;
  int depth = 0;
};

/// Row-wise support evaluation over a stack of directions D (rows).
/// `max_depth` closes deep recursions with the cylinder bound alone, which
/// stays sound and makes steady-state periods evaluate identically.
template <typename Scalar>
VectorX<Scalar> eval_set(const SetNode<Scalar>& node, const MatrixX<Scalar>& dirs, Scalar abar,
                         int max_depth);

template <typename Scalar>
VectorX<Scalar> eval_intersect(const IntersectNode<Scalar>& node, const MatrixX<Scalar>& dirs,
                               Scalar abar, int max_depth) {
  VectorX<Scalar> cyl(dirs.rows());
  for (Eigen::Index i = 0; i < dirs.rows(); ++i) {
    const VectorX<Scalar> d = dirs.row(i).transpose();
    cyl(i) = node.radius * std::sqrt(std::max(Scalar(0), Scalar(d.dot(node.sinv * d))));
  }
  if (node.depth >= max_depth) return cyl;
  const VectorX<Scalar> inner = eval_set(node.inner, dirs, abar, max_depth);
  return cyl.cwiseMin(inner);
}

template <typename Scalar>
VectorX<Scalar> eval_set(const SetNode<Scalar>& node, const MatrixX<Scalar>& dirs, Scalar abar,
                         int max_depth) {
  VectorX<Scalar> h = VectorX<Scalar>::Zero(dirs.rows());
  for (const auto& b : node.terms) {
    h += abar * (dirs * b).rowwise().norm();
  }
  if (node.base) {
    h += eval_intersect(*node.base, (dirs * node.map).eval(), abar, max_depth);
  }
  return h;
}

template <typename Scalar>
MatrixX<Scalar> direction_grid(int n, int count) {
  if (n == 1) return MatrixX<Scalar>::Ones(1, 1);
  if (n == 2) {
    MatrixX<Scalar> d(count, 2);
    for (int i = 0; i < count; ++i) {
      const Scalar th = Scalar(M_PI) * Scalar(i) / Scalar(count);
      d(i, 0) = std::cos(th);
      d(i, 1) = std::sin(th);
    }
    return d;
  }
  if (n == 3) {
    // Fibonacci hemisphere
    MatrixX<Scalar> d(count, 3);
    const Scalar golden = Scalar(M_PI) * (Scalar(1) + std::sqrt(Scalar(5)));
    for (int i = 0; i < count; ++i) {
      const Scalar z = Scalar(1) - (Scalar(i) + Scalar(0.5)) / Scalar(count);
      const Scalar rho = std::sqrt(std::max(Scalar(0), Scalar(1) - z * z));
      const Scalar th = golden * Scalar(i);
      d(i, 0) = rho * std::cos(th);
      d(i, 1) = rho * std::sin(th);
      d(i, 2) = z;
    }
    return d;
  }
  std::mt19937_64 rng(0x5eedu + static_cast<unsigned>(n));
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixX<Scalar> d(count, n);
  for (int i = 0; i < count; ++i) {
    VectorX<Scalar> v(n);
    for (int j = 0; j < n; ++j) v(j) = Scalar(gauss(rng));
    d.row(i) = v.normalized().transpose();
  }
  return d;
}

}  // namespace stepwise_detail

template <typename Scalar>
struct StepwiseCurveOptions {
  int directions = 0;        // 0 = dimension-dependent default
  int max_node_depth = 8;
  Scalar exit_threshold = std::numeric_limits<Scalar>::infinity();
  bool policy_aware = true;  // intersect with the survive-next-block tube
  Scalar steady_tol = Scalar(1e-12);
};

template <typename Scalar>
struct StepwiseCurve {
  std::vector<Scalar> bounds;
  bool exceeded = false;
  int exceeded_at = 0;
  bool steady = false;  ///< per-phase values repeat period over period
  Scalar abar = Scalar(0);
};

/// Worst-case expected estimation error per step under the per-step radius
/// `abar`, for a periodic (or absent) enforcement schedule. The supports are
/// global in the sense that an enforced step zeroes all compromised channels;
/// partially enforced (sensor-wise) steps restrict the input ellipsoid but
/// contribute no state constraint, which is conservative.
template <typename Scalar>
StepwiseCurve<Scalar> stepwise_error_curve(const SteadyStateFilter<Scalar>& filter,
                                           const MatrixX<Scalar>& A,
                                           const EnforcementPolicy& policy,
                                           const std::vector<int>& compromised, Scalar abar,
                                           int horizon,
                                           const StepwiseCurveOptions<Scalar>& opts = {}) {
  using stepwise_detail::IntersectNode;
  using stepwise_detail::SetNode;

  const int n = filter.n();
  const int p = filter.p();
  StepwiseCurve<Scalar> out;
  out.abar = abar;
  if (policy.continuous() || compromised.empty()) {
    out.bounds.assign(static_cast<size_t>(horizon), Scalar(0));
    out.steady = true;
    return out;
  }

  const int ndir = opts.directions > 0 ? opts.directions : (n == 1 ? 1 : n == 2 ? 1440 : n == 3 ? 4000 : 4096);
  const MatrixX<Scalar> dirs = stepwise_detail::direction_grid<Scalar>(n, ndir);

  const auto pattern = SupportPattern::from_policy(policy, compromised, p, horizon + 1);
  const MatrixX<Scalar> qh = psd_sqrt<Scalar>(filter.Q);
  const Eigen::LDLT<MatrixX<Scalar>> qinv(filter.Q);

  const bool invertible_A = std::abs(Scalar(A.determinant())) > Scalar(1e-12);
  MatrixX<Scalar> a_inv;
  if (invertible_A) a_inv = A.inverse();

  // block-entry constraint for a run of `fl` enforced steps
  auto entry_constraint = [&](int fl) {
    MatrixX<Scalar> s = MatrixX<Scalar>::Zero(n, n);
    MatrixX<Scalar> acl_pow = MatrixX<Scalar>::Identity(n, n);
    for (int i = 0; i < fl; ++i) {
      const MatrixX<Scalar> row = filter.CA * acl_pow;
      s += row.transpose() * qinv.solve(row);
      acl_pow = (filter.Acl * acl_pow).eval();
    }
    return s;
  };

  auto pinv = [&](const MatrixX<Scalar>& m) {
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    VectorX<Scalar> sv = svd.singularValues();
    VectorX<Scalar> inv = VectorX<Scalar>::Zero(sv.size());
    const Scalar cutoff = sv.size() ? sv(0) * Scalar(1e-12) : Scalar(0);
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > cutoff) inv(i) = Scalar(1) / sv(i);
    return MatrixX<Scalar>(svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose());
  };

  // backward (survivability) support at a free step: m free steps until the
  // next fully-enforced run of length fl
  auto backward_support = [&](int k) -> VectorX<Scalar> {
    if (!opts.policy_aware || !invertible_A) {
      return VectorX<Scalar>::Constant(dirs.rows(), std::numeric_limits<Scalar>::infinity());
    }
    int s = k + 1;
    const int limit = pattern.horizon();
    while (s <= limit && !pattern.support_at(s).empty()) ++s;
    if (s > limit) return VectorX<Scalar>::Constant(dirs.rows(), std::numeric_limits<Scalar>::infinity());
    int fl = 0;
    while (s + fl <= limit && pattern.support_at(s + fl).empty()) ++fl;
    const MatrixX<Scalar> scon = entry_constraint(fl);
    const MatrixX<Scalar> sinv = pinv(scon);
    const Scalar r = std::sqrt(Scalar(fl)) * abar;
    MatrixX<Scalar> dm = dirs;
    VectorX<Scalar> extra = VectorX<Scalar>::Zero(dirs.rows());
    const MatrixX<Scalar> kq = filter.K * qh;
    for (int i = 0; i < s - 1 - k; ++i) {
      dm = (dm * a_inv).eval();
      extra += abar * (dm * kq).rowwise().norm();
    }
    VectorX<Scalar> cyl(dirs.rows());
    for (Eigen::Index i = 0; i < dm.rows(); ++i) {
      const VectorX<Scalar> d = dm.row(i).transpose();
      cyl(i) = r * std::sqrt(std::max(Scalar(0), Scalar(d.dot(sinv * d))));
    }
    return cyl + extra;
  };

  SetNode<Scalar> current{MatrixX<Scalar>::Identity(n, n), {}, nullptr};
  int depth = 0;
  const MatrixX<Scalar> kq = filter.K * qh;

  // period bookkeeping for steady detection
  const int period = policy.kind == EnforcementPolicy::Kind::Global ? policy.global.L : 0;
  int steady_streak = 0;

  int j = 1;
  while (j <= horizon) {
    const auto& sup = pattern.support_at(j);
    if (!sup.empty()) {
      // free (or partially enforced) step
      current.map = (A * current.map).eval();
      for (auto& b : current.terms) b = (A * b).eval();
      if (static_cast<int>(sup.size()) == p || static_cast<int>(sup.size()) ==
                                                   static_cast<int>(pattern.compromised.size())) {
        current.terms.push_back(kq);
      } else {
        // restricted input: projection of the residual ellipsoid onto the
        // unprotected channels
        const MatrixX<Scalar> sel = selection_columns<Scalar>(p, sup);
        const MatrixX<Scalar> qsub = sel.transpose() * filter.Q * sel;
        current.terms.push_back(filter.K * sel * psd_sqrt<Scalar>(qsub));
      }
      VectorX<Scalar> h = stepwise_detail::eval_set(current, dirs, abar, opts.max_node_depth);
      const VectorX<Scalar> hb = backward_support(j);
      const Scalar bound = h.cwiseMin(hb).maxCoeff();
      out.bounds.push_back(bound);
      if (bound > opts.exit_threshold) {
        out.exceeded = true;
        out.exceeded_at = j;
        return out;
      }
      ++j;
    } else {
      // run of fully enforced steps
      int fl = 0;
      while (j + fl <= horizon + 1 && j + fl <= pattern.horizon() &&
             pattern.support_at(j + fl).empty()) {
        ++fl;
      }
      const MatrixX<Scalar> scon = entry_constraint(fl);
      const MatrixX<Scalar> sinv = pinv(scon);
      const Scalar r = std::sqrt(Scalar(fl)) * abar;

      auto inter = std::make_shared<IntersectNode<Scalar>>();
      inter->sinv = sinv;
      inter->radius = r;
      inter->inner = current;
      inter->depth = ++depth;

      MatrixX<Scalar> acl_pow = MatrixX<Scalar>::Identity(n, n);
      for (int s = 1; s <= fl && j + s - 1 <= horizon; ++s) {
        acl_pow = (filter.Acl * acl_pow).eval();
        SetNode<Scalar> inside{acl_pow, {}, inter};
        const VectorX<Scalar> h = stepwise_detail::eval_set(inside, dirs, abar, opts.max_node_depth);
        out.bounds.push_back(h.maxCoeff());
      }
      MatrixX<Scalar> full_pow = MatrixX<Scalar>::Identity(n, n);
      for (int s = 0; s < fl; ++s) full_pow = (filter.Acl * full_pow).eval();
      current = SetNode<Scalar>{full_pow, {}, inter};
      j += fl;
    }

    // steady-state detection: identical per-phase bounds two periods in a row
    if (period > 0 && static_cast<int>(out.bounds.size()) >= 2 * period) {
      const size_t sz = out.bounds.size();
      const Scalar a = out.bounds[sz - 1];
      const Scalar b2 = out.bounds[sz - 1 - static_cast<size_t>(period)];
      if (std::abs(a - b2) <= opts.steady_tol * (Scalar(1) + std::abs(b2))) {
        if (++steady_streak >= period) {
          out.steady = true;
          while (static_cast<int>(out.bounds.size()) < horizon) {
            out.bounds.push_back(out.bounds[out.bounds.size() - static_cast<size_t>(period)]);
          }
          if (out.bounds.size() > static_cast<size_t>(horizon)) out.bounds.resize(static_cast<size_t>(horizon));
          return out;
        }
      } else {
        steady_streak = 0;
      }
    }
  }
  if (out.bounds.size() > static_cast<size_t>(horizon)) out.bounds.resize(static_cast<size_t>(horizon));
  return out;
}

}  // namespace intact

#endif  // INTACT_STEPWISE_HPP
