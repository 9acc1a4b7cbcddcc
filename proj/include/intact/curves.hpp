#ifndef INTACT_CURVES_HPP
#define INTACT_CURVES_HPP

#include <utility>
#include <vector>

#include "intact/detector.hpp"
#include "intact/enforcement.hpp"
#include "intact/reachability.hpp"
#include "intact/stepwise.hpp"

namespace intact {

/// Per-step worst-case expected-error bounds under a policy, dispatched on the
/// detector family: cumulative detectors run the anchored Gram-matrix
/// pipeline, windowed detectors run the per-step radius pipeline with the
/// over-approximating Lemma radius.
template <typename Scalar>
std::vector<std::pair<int, Scalar>> error_curve(const SteadyStateFilter<Scalar>& filter,
                                                const EnforcementPolicy& policy,
                                                const AttackScenario<Scalar>& scenario,
                                                const DetectorSpec& detector, int horizon) {
  detector.validate(filter.p());
  scenario.validate(filter.p());
  std::vector<Scalar> bounds;
  if (detector.kind == DetectorSpec::Kind::Sprt) {
    SprtCurveOptions<Scalar> opts;
    opts.require_fixpoint = false;
    bounds = sprt_policy_curve<Scalar>(filter, policy, scenario.compromised,
                                       scenario.epsilon, Scalar(detector.threshold), horizon, opts)
                 .bounds;
  } else {
    const double abar = window_bounds(detector, double(scenario.epsilon), filter.p()).second;
    const MatrixX<Scalar> A = filter.Acl + filter.K * filter.CA;  // plant matrix
    bounds = stepwise_error_curve<Scalar>(filter, A, policy, scenario.compromised, Scalar(abar),
                                          horizon)
                 .bounds;
  }
  std::vector<std::pair<int, Scalar>> curve;
  curve.reserve(bounds.size());
  for (size_t i = 0; i < bounds.size(); ++i) curve.emplace_back(static_cast<int>(i) + 1, bounds[i]);
  return curve;
}

}  // namespace intact

#endif  // INTACT_CURVES_HPP
