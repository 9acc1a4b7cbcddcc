#ifndef INTACT_DETECTOR_HPP
#define INTACT_DETECTOR_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "intact/types.hpp"

namespace intact {

// ---------------------------------------------------------------------------
// Chi-square distribution kernels.
//
// The central CDF is the regularized lower incomplete gamma P(k/2, x/2),
// evaluated by power series (x < a+1) or Lentz continued fraction (x >= a+1).
// The noncentral CDF is the Poisson mixture
//     F(x; k, lambda) = sum_j  Pois(j; lambda/2) * F_chi2(x; k + 2j),
// accumulated outward from the Poisson mode so large noncentralities do not
// underflow; the series stops once the unaccounted Poisson mass drops below
// 1e-14, which bounds the absolute truncation error by the same amount.
// ---------------------------------------------------------------------------

namespace detail {

inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 100000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-17) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double regularized_gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw ValidationError("regularized_gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

}  // namespace detail

/// Central chi-square CDF with `dof` degrees of freedom.
inline double chi2_cdf(double x, int dof) {
  if (dof < 1) throw ValidationError("chi2_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  return detail::regularized_gamma_p(0.5 * dof, 0.5 * x);
}

/// Noncentral chi-square CDF, absolute error below 1e-10 on its domain.
/// lambda = 0 reduces exactly to the central CDF.
inline double noncentral_chi2_cdf(double x, int dof, double lambda) {
  if (dof < 1) throw ValidationError("noncentral_chi2_cdf: dof must be positive");
  if (lambda < 0.0) throw ValidationError("noncentral_chi2_cdf: lambda must be nonnegative");
  if (x <= 0.0) return 0.0;
  if (lambda == 0.0) return chi2_cdf(x, dof);

  const double half = 0.5 * lambda;
  const long mode = static_cast<long>(half);
  const double log_w_mode = -half + mode * std::log(half) - std::lgamma(double(mode) + 1.0);
  const double w_mode = std::exp(log_w_mode);

  double total = w_mode * chi2_cdf(x, dof + 2 * static_cast<int>(mode));
  double mass = w_mode;

  // walk down from the mode
  double w = w_mode;
  for (long j = mode; j >= 1; --j) {
    w *= double(j) / half;
    mass += w;
    total += w * chi2_cdf(x, dof + 2 * static_cast<int>(j - 1));
    if (w < 1e-18 && 1.0 - mass < 1e-14) break;
  }
  // walk up from the mode
  w = w_mode;
  for (long j = mode + 1; j < mode + 100000; ++j) {
    w *= half / double(j);
    mass += w;
    total += w * chi2_cdf(x, dof + 2 * static_cast<int>(j));
    if (1.0 - mass < 1e-14) break;
  }
  return std::min(total, 1.0);
}

/// Threshold h with P(chi2_dof > h) = beta, via bracketed bisection.
inline double threshold_from_false_alarm(double beta, int dof) {
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("threshold_from_false_alarm: beta must lie in (0,1)");
  if (dof < 1) throw ValidationError("threshold_from_false_alarm: dof must be positive");
  const double target = 1.0 - beta;  // CDF value at h
  double lo = 0.0, hi = 1.0;
  while (chi2_cdf(hi, dof) < target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NumericalError("threshold_from_false_alarm: bracket growth failed");
  }
  for (int i = 0; i < 200 && (hi - lo) > 1e-15 * (1.0 + hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, dof) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Calibrated stealthiness radius: the unique alpha >= 0 with
/// P(ncchi2(dof, alpha^2) > h) = beta + epsilon, where beta is the nominal
/// exceedance of the central distribution at h.
struct StealthRadius {
  double alpha = 0.0;
  int dof = 0;
  double threshold_used = 0.0;
};

inline StealthRadius alpha_chi2(double epsilon, int dof, double h) {
  if (dof < 1) throw ValidationError("alpha_chi2: dof must be positive");
  if (h <= 0.0) throw ValidationError("alpha_chi2: threshold must be positive");
  if (epsilon < 0.0) throw ValidationError("alpha_chi2: epsilon must be nonnegative");
  const double beta = 1.0 - chi2_cdf(h, dof);
  if (epsilon > 1.0 - beta + 1e-12) {
    throw std::domain_error("alpha_chi2: epsilon exceeds 1 - beta");
  }
  if (epsilon == 0.0) return {0.0, dof, h};

  const double target = beta + epsilon;  // exceedance to hit
  auto exceed = [&](double lambda) { return 1.0 - noncentral_chi2_cdf(h, dof, lambda); };

  double lo = 0.0, hi = 1.0;
  while (exceed(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NumericalError("alpha_chi2: bracket growth failed");
  }
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    (exceed(mid) < target ? lo : hi) = mid;
    if (hi - lo <= 1e-15 * (1.0 + hi)) break;
  }
  const double lambda = 0.5 * (lo + hi);
  return {std::sqrt(lambda), dof, h};
}

// ---------------------------------------------------------------------------
// Detector specification.
// ---------------------------------------------------------------------------

/// Residual detector description. Windowed detectors evaluate
///   g_k = sum_{i=1..T} c_i z_{k-T+i}^T Q^{-1} z_{k-T+i}
/// against `threshold`; the cumulative detector evaluates
///   g_k = 1/2 sum_{tau<=k} z^T Q^{-1} z - k p / 2
/// against the same threshold (log-likelihood normalized to zero under
/// nominal operation).
struct DetectorSpec {
  enum class Kind { Windowed, Sprt };

  Kind kind = Kind::Windowed;
  int window = 1;
  Eigen::VectorXd coeffs = Eigen::VectorXd::Ones(1);
  double threshold = 0.0;
  double beta = 0.0;

  static DetectorSpec chi2(double beta, int p) {
    DetectorSpec d;
    d.kind = Kind::Windowed;
    d.window = 1;
    d.coeffs = Eigen::VectorXd::Ones(1);
    d.beta = beta;
    d.threshold = threshold_from_false_alarm(beta, p);
    return d;
  }

  static DetectorSpec windowed(int window, Eigen::VectorXd coeffs, double threshold, double beta) {
    DetectorSpec d;
    d.kind = Kind::Windowed;
    d.window = window;
    d.coeffs = std::move(coeffs);
    d.threshold = threshold;
    d.beta = beta;
    return d;
  }

  static DetectorSpec sprt(double threshold, double beta) {
    DetectorSpec d;
    d.kind = Kind::Sprt;
    d.window = 0;
    d.coeffs.resize(0);
    d.threshold = threshold;
    d.beta = beta;
    return d;
  }

  bool is_pure_chi2() const {
    return kind == Kind::Windowed && window == 1 && coeffs.size() == 1 &&
           std::abs(coeffs(0) - 1.0) < 1e-12;
  }

  /// Structural checks plus, for the pure chi-square case, consistency of the
  /// stored threshold with the stored false-alarm rate.
  void validate(int p) const {
    if (threshold <= 0.0) throw ValidationError("detector: threshold must be positive");
    if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("detector: beta must lie in (0,1)");
    if (kind == Kind::Windowed) {
      if (window < 1) throw ValidationError("detector: window must be >= 1");
      if (coeffs.size() != window) throw ValidationError("detector: coefficient count must equal window");
      if ((coeffs.array() < 0.0).any()) throw ValidationError("detector: coefficients must be nonnegative");
      if (coeffs(window - 1) <= 0.0) throw ValidationError("detector: trailing coefficient must be strictly positive");
      if (is_pure_chi2()) {
        const double implied = 1.0 - chi2_cdf(threshold, p);
        if (std::abs(implied - beta) > 1e-6 * (1.0 + beta)) {
          throw ValidationError("detector: threshold inconsistent with beta for the chi-square detector");
        }
      }
    }
  }
};

/// Per-step robustness radii bracketing the stealthy set of a windowed
/// detector: every attack keeping ||dz||_{Q^{-1}} below `first` stays stealthy,
/// and every stealthy attack keeps it below `second`.
inline std::pair<double, double> window_bounds(const DetectorSpec& spec, double epsilon, int p) {
  if (spec.kind != DetectorSpec::Kind::Windowed) {
    throw ValidationError("window_bounds: requires a windowed detector");
  }
  spec.validate(p);
  const int T = spec.window;
  const double c_max = spec.coeffs.maxCoeff();
  const double c_T = spec.coeffs(T - 1);
  if (c_max <= 0.0) throw ValidationError("window_bounds: all-zero coefficient vector");
  const double under = alpha_chi2(epsilon, T * p, spec.threshold / c_max).alpha / std::sqrt(double(T));
  const double over = alpha_chi2(epsilon, p, spec.threshold / c_T).alpha;
  return {under, over};
}

/// Cumulative-detector radius at step k: alpha_chi2(eps, k p, 2h + k p).
inline double sprt_radius(double epsilon, int p, double h, int k) {
  if (k < 1) throw ValidationError("sprt_radius: step must be >= 1");
  return alpha_chi2(epsilon, k * p, 2.0 * h + double(k) * double(p)).alpha;
}

}  // namespace intact

#endif  // INTACT_DETECTOR_HPP
