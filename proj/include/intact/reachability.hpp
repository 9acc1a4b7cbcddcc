#ifndef INTACT_REACHABILITY_HPP
#define INTACT_REACHABILITY_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <vector>

#include "intact/detector.hpp"
#include "intact/enforcement.hpp"
#include "intact/model.hpp"
#include "intact/types.hpp"

namespace intact {

// ---------------------------------------------------------------------------
// Non-recursive attack-to-error and attack-to-residual maps restricted to the
// support of the stacked attack vector:
//   de_k  = -[(A-KCA)^{k-1} K P1 | ... | K Pk] a~        (error map)
//   dz_k  =  [-CA M_{k-1} P     | Pk~ ]        a~        (residual map)
// where Pj selects the compromised columns active at step j.
// ---------------------------------------------------------------------------

/// Incremental builder for the maps and the stealthiness Gram matrix
///   Theta_t = sum_{tau<=t} [N_tau P 0]^T Q^{-1} [N_tau P 0].
/// Grows one step at a time; the Cholesky factor is recomputed per anchor.
template <typename Scalar>
class StealthGramBuilder {
 public:
  StealthGramBuilder(const SteadyStateFilter<Scalar>& filter, const SupportPattern& pattern)
      : filter_(&filter), pattern_(&pattern), qinv_solver_(filter.Q.ldlt()) {
    const int n = filter.n();
    m_current_ = MatrixX<Scalar>::Zero(n, 0);
    theta_ = MatrixX<Scalar>::Zero(0, 0);
  }

  int step() const { return step_; }
  int dim() const { return static_cast<int>(theta_.rows()); }

  void advance_to(int target) {
    if (target > pattern_->horizon()) {
      throw ValidationError("StealthGramBuilder: pattern does not cover requested step");
    }
    const int n = filter_->n();
    const int p = filter_->p();
    while (step_ < target) {
      ++step_;
      const auto& sup = pattern_->support_at(step_);
      const MatrixX<Scalar> cam_prev = filter_->CA * m_current_;  // p x |Q_{k-1}|
      const MatrixX<Scalar> kcols = filter_->K * selection_columns<Scalar>(p, sup);

      MatrixX<Scalar> m_next(n, m_current_.cols() + kcols.cols());
      m_next << filter_->Acl * m_current_, kcols;
      m_current_ = std::move(m_next);
      error_maps_.push_back(m_current_);

      MatrixX<Scalar> nrow(p, m_current_.cols());
      nrow << -cam_prev, selection_columns<Scalar>(p, sup);

      const int mdim = static_cast<int>(m_current_.cols());
      MatrixX<Scalar> theta_next = MatrixX<Scalar>::Zero(mdim, mdim);
      theta_next.topLeftCorner(theta_.rows(), theta_.cols()) = theta_;
      theta_next += nrow.transpose() * qinv_solver_.solve(nrow);
      theta_ = std::move(theta_next);
      residual_maps_.push_back(std::move(nrow));
      factored_ = false;
    }
  }

  /// M_k P (n x |Q_k|); requires advance_to(k) or beyond.
  const MatrixX<Scalar>& error_map_at(int k) const { return error_maps_.at(static_cast<size_t>(k - 1)); }
  /// N_k P (p x |Q_k|).
  const MatrixX<Scalar>& residual_map_at(int k) const { return residual_maps_.at(static_cast<size_t>(k - 1)); }
  const MatrixX<Scalar>& theta() const { return theta_; }

  const Eigen::LLT<MatrixX<Scalar>>& factor() {
    if (!factored_) {
      llt_.compute(theta_);
      if (llt_.info() != Eigen::Success) {
        throw NumericalError("StealthGramBuilder: Gram matrix lost positive definiteness");
      }
      factored_ = true;
    }
    return llt_;
  }

  /// Y~ = alpha^2 [M_k P 0] Theta^{-1} [M_k P 0]^T for the current horizon.
  MatrixX<Scalar> shape_at(int k, Scalar alpha) {
    const int n = filter_->n();
    const int qk = pattern_->q_size(k);
    if (qk == 0) return MatrixX<Scalar>::Zero(n, n);
    const auto& llt = factor();
    MatrixX<Scalar> g = MatrixX<Scalar>::Zero(dim(), n);
    g.topRows(qk) = error_map_at(k).transpose();
    const MatrixX<Scalar> solved = llt.solve(g);
    MatrixX<Scalar> y = alpha * alpha * g.transpose() * solved;
    return ((y + y.transpose()) / Scalar(2)).eval();
  }

 private:
  const SteadyStateFilter<Scalar>* filter_;
  const SupportPattern* pattern_;
  Eigen::LDLT<MatrixX<Scalar>> qinv_solver_;
  MatrixX<Scalar> m_current_;
  std::vector<MatrixX<Scalar>> error_maps_;
  std::vector<MatrixX<Scalar>> residual_maps_;
  MatrixX<Scalar> theta_;
  Eigen::LLT<MatrixX<Scalar>> llt_;
  bool factored_ = false;
  int step_ = 0;
};

template <typename Scalar>
MatrixX<Scalar> error_map(const SteadyStateFilter<Scalar>& filter, const SupportPattern& pattern,
                          int k) {
  StealthGramBuilder<Scalar> b(filter, pattern);
  b.advance_to(k);
  return b.error_map_at(k);
}

template <typename Scalar>
MatrixX<Scalar> residual_map(const SteadyStateFilter<Scalar>& filter, const SupportPattern& pattern,
                             int k) {
  StealthGramBuilder<Scalar> b(filter, pattern);
  b.advance_to(k);
  return b.residual_map_at(k);
}

/// Theta_t, checked positive definite (Cholesky must succeed).
template <typename Scalar>
MatrixX<Scalar> theta_matrix(const SteadyStateFilter<Scalar>& filter, const SupportPattern& pattern,
                             int t) {
  StealthGramBuilder<Scalar> b(filter, pattern);
  b.advance_to(t);
  b.factor();
  return b.theta();
}

// ---------------------------------------------------------------------------
// Reachable-error ellipsoids.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ReachableRegion {
  MatrixX<Scalar> Y;
  Scalar gamma = Scalar(0);
  int k = 0;
  int t_anchor = 0;
};

using ReachableRegiond = ReachableRegion<double>;

/// Region of expected estimation errors reachable at step k by policy-aware
/// stealthy attacks, anchored at the next enforcement-block end t:
///   Y_k = alpha^2(eps, tp, 2h+tp) [M_k P 0] Theta_t^{-1} [M_k P 0]^T + gamma Sigma.
/// `alpha_override` substitutes the calibrated radius (used by the curve
/// engine to keep a stationary per-cycle budget).
template <typename Scalar>
ReachableRegion<Scalar> reachable_region(const SteadyStateFilter<Scalar>& filter,
                                         const SupportPattern& pattern, Scalar epsilon, Scalar h,
                                         int k, Scalar gamma,
                                         std::optional<Scalar> alpha_override = {}) {
  const int t = pattern.anchor_for(k);
  if (t > pattern.horizon()) {
    throw ValidationError("reachable_region: pattern does not cover the anchor of k");
  }
  StealthGramBuilder<Scalar> b(filter, pattern);
  b.advance_to(t);
  const Scalar alpha =
      alpha_override ? *alpha_override
                     : Scalar(sprt_radius(double(epsilon), filter.p(), double(h), t));
  ReachableRegion<Scalar> region;
  region.k = k;
  region.t_anchor = t;
  region.gamma = gamma;
  region.Y = b.shape_at(k, alpha);
  if (gamma > Scalar(0)) region.Y += gamma * filter.Sigma;
  return region;
}

/// Extreme semi-axis sqrt(lambda_max(Y~)) of the expected-error ellipsoid;
/// defined for gamma = 0 regions.
template <typename Scalar>
Scalar max_expected_error(const ReachableRegion<Scalar>& region) {
  if (region.gamma != Scalar(0)) {
    throw ValidationError("max_expected_error: defined for gamma = 0 regions");
  }
  if (region.Y.size() == 0) return Scalar(0);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(region.Y, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(es.eigenvalues().maxCoeff(), Scalar(0)));
}

/// Loewner-order containment of same-center ellipsoids:
/// inner is contained in outer iff Y_outer - Y_inner is PSD (within tolerance).
template <typename Scalar>
bool region_contained(const ReachableRegion<Scalar>& inner, const ReachableRegion<Scalar>& outer,
                      Scalar tol = Scalar(1e-9)) {
  if (inner.Y.rows() != outer.Y.rows()) throw ValidationError("region_contained: dimension mismatch");
  if (inner.gamma != outer.gamma) throw ValidationError("region_contained: mismatched gamma");
  const MatrixX<Scalar> d = outer.Y - inner.Y;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(d, Eigen::EigenvaluesOnly);
  const Scalar scale = Scalar(1) + std::max(inner.Y.norm(), outer.Y.norm());
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

// ---------------------------------------------------------------------------
// Cumulative-detector curve engine (Algorithm-1 inner loop).
// ---------------------------------------------------------------------------

template <typename Scalar>
struct SprtCurve {
  std::vector<Scalar> bounds;     ///< bounds[k-1] = max expected error at step k
  bool fixpoint = false;          ///< containment termination reached
  int fixpoint_anchor = 0;
  bool exceeded = false;          ///< early exit: bound crossed the threshold
  int exceeded_at = 0;
  bool capped = false;            ///< resource cap hit before termination
  Scalar alpha = Scalar(0);       ///< per-cycle stealthiness budget
};

template <typename Scalar>
struct SprtCurveOptions {
  int max_periods = 200;
  int max_gram_dim = 4000;
  Scalar exit_threshold = std::numeric_limits<Scalar>::infinity();
  Scalar containment_tol = Scalar(1e-9);
  /// keep iterating anchors beyond the horizon until containment terminates
  /// (policy verdicts need the fixpoint; plain curves do not)
  bool require_fixpoint = true;
};

/// No-enforcement curve: every step is its own planning horizon, with the
/// step-dependent radius alpha(eps, kp, 2h+kp).
template <typename Scalar>
SprtCurve<Scalar> sprt_unenforced_curve(const SteadyStateFilter<Scalar>& filter,
                                        const std::vector<int>& compromised, Scalar epsilon,
                                        Scalar h, int horizon,
                                        const SprtCurveOptions<Scalar>& opts = {}) {
  SprtCurve<Scalar> out;
  const auto pattern = SupportPattern::from_policy(EnforcementPolicy::none(), compromised,
                                                   filter.p(), horizon);
  StealthGramBuilder<Scalar> b(filter, pattern);
  for (int k = 1; k <= horizon; ++k) {
    if (pattern.q_size(k) > opts.max_gram_dim) {
      out.capped = true;
      break;
    }
    b.advance_to(k);
    const Scalar alpha = Scalar(sprt_radius(double(epsilon), filter.p(), double(h), k));
    const MatrixX<Scalar> y = b.shape_at(k, alpha);
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(y, Eigen::EigenvaluesOnly);
    const Scalar bound = std::sqrt(std::max(es.eigenvalues().maxCoeff(), Scalar(0)));
    out.bounds.push_back(bound);
    if (bound > opts.exit_threshold) {
      out.exceeded = true;
      out.exceeded_at = k;
      break;
    }
  }
  return out;
}

/// Periodic-policy curve. Anchors are the enforcement-block ends; the
/// stealthiness budget is frozen at the first anchor so consecutive periods
/// are comparable, and the curve is extended by repetition once the
/// two containment conditions of the design loop hold.
template <typename Scalar>
SprtCurve<Scalar> sprt_policy_curve(const SteadyStateFilter<Scalar>& filter,
                                    const EnforcementPolicy& policy,
                                    const std::vector<int>& compromised, Scalar epsilon, Scalar h,
                                    int horizon, const SprtCurveOptions<Scalar>& opts = {}) {
  SprtCurve<Scalar> out;
  const int p = filter.p();
  if (policy.continuous()) {
    out.bounds.assign(static_cast<size_t>(horizon), Scalar(0));
    out.fixpoint = true;
    return out;
  }
  if (policy.kind == EnforcementPolicy::Kind::None || compromised.empty()) {
    return sprt_unenforced_curve<Scalar>(filter, compromised, epsilon, h, horizon, opts);
  }

  // pattern long enough for the final anchor we may visit
  const int span = policy.kind == EnforcementPolicy::Kind::Global
                       ? policy.global.L
                       : [&] {
                           int l = 1;
                           for (const auto& s : policy.sensors) l = std::max(l, s.L);
                           return l;
                         }();
  const int reserve = std::max(horizon + 2 * span, span * (opts.max_periods + 2));
  const auto pattern = SupportPattern::from_policy(policy, compromised, p, reserve);
  if (pattern.block_ends.empty()) {
    return sprt_unenforced_curve<Scalar>(filter, compromised, epsilon, h, horizon, opts);
  }

  StealthGramBuilder<Scalar> b(filter, pattern);
  out.alpha = Scalar(sprt_radius(double(epsilon), p, double(h), pattern.block_ends.front()));

  std::vector<MatrixX<Scalar>> prev_period;  // shapes of the previous period, by phase
  int prev_anchor = 0;
  for (size_t ai = 0; ai < pattern.block_ends.size(); ++ai) {
    const int t = pattern.block_ends[ai];
    if (static_cast<int>(ai) >= opts.max_periods || pattern.q_size(t) > opts.max_gram_dim) {
      out.capped = true;
      break;
    }
    b.advance_to(t);
    std::vector<MatrixX<Scalar>> shapes;
    bool contained = ai > 0 && (t - prev_anchor) == static_cast<int>(prev_period.size());
    for (int k = prev_anchor + 1; k <= t; ++k) {
      MatrixX<Scalar> y = b.shape_at(k, out.alpha);
      Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(y, Eigen::EigenvaluesOnly);
      const Scalar bound = std::sqrt(std::max(es.eigenvalues().maxCoeff(), Scalar(0)));
      if (static_cast<int>(out.bounds.size()) < horizon) out.bounds.push_back(bound);
      if (bound > opts.exit_threshold) {
        out.exceeded = true;
        out.exceeded_at = k;
        return out;
      }
      if (contained) {
        const MatrixX<Scalar> d = prev_period[static_cast<size_t>(k - prev_anchor - 1)] - y;
        Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> ed(d, Eigen::EigenvaluesOnly);
        const Scalar scale = Scalar(1) + y.norm();
        if (ed.eigenvalues().minCoeff() < -opts.containment_tol * scale) contained = false;
      }
      shapes.push_back(std::move(y));
    }
    if (contained) {
      out.fixpoint = true;
      out.fixpoint_anchor = t;
      // extend periodically
      const int period = t - prev_anchor;
      while (static_cast<int>(out.bounds.size()) < horizon) {
        const size_t src = out.bounds.size() - static_cast<size_t>(period);
        out.bounds.push_back(out.bounds[src]);
        if (out.bounds.back() > opts.exit_threshold) {
          out.exceeded = true;
          out.exceeded_at = static_cast<int>(out.bounds.size());
          return out;
        }
      }
      return out;
    }
    prev_period = std::move(shapes);
    prev_anchor = t;
    if (!opts.require_fixpoint && static_cast<int>(out.bounds.size()) >= horizon) break;
  }
  if (static_cast<int>(out.bounds.size()) > horizon) out.bounds.resize(static_cast<size_t>(horizon));
  return out;
}

}  // namespace intact

#endif  // INTACT_REACHABILITY_HPP
