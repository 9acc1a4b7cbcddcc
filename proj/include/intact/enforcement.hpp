#ifndef INTACT_ENFORCEMENT_HPP
#define INTACT_ENFORCEMENT_HPP

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "intact/types.hpp"

namespace intact {

/// Periodic integrity-enforcement schedule. A global policy (f, L, t0) zeroes
/// the whole attack vector for f consecutive steps starting at t0, t0+L, ...;
/// a sensor-wise policy does the same per sensor channel. Steps are 1-based;
/// t0 > 1 because the attack-start convention leaves step 1 unprotected.
struct EnforcementPolicy {
  enum class Kind { None, Global, SensorWise };

  struct Block {
    int f = 1;   ///< enforced steps per block
    int L = 1;   ///< distance between block starts
    int t0 = 2;  ///< first block start
  };
  struct SensorBlock : Block {
    int sensor = 0;  ///< 0-based channel
  };

  Kind kind = Kind::None;
  Block global;
  std::vector<SensorBlock> sensors;

  static EnforcementPolicy none() { return {}; }

  static EnforcementPolicy periodic_global(int f, int L, int t0 = -1) {
    EnforcementPolicy p;
    p.kind = Kind::Global;
    p.global = {f, L, t0 > 0 ? t0 : std::max(L, 2)};
    return p;
  }

  static EnforcementPolicy sensor_wise(std::vector<SensorBlock> blocks) {
    EnforcementPolicy p;
    p.kind = Kind::SensorWise;
    p.sensors = std::move(blocks);
    return p;
  }

  void validate(int p) const {
    auto check = [](const Block& b, const std::string& who) {
      if (b.f < 1) throw ValidationError(who + ": f must be >= 1");
      if (b.L < 1) throw ValidationError(who + ": L must be >= 1");
      if (b.t0 <= 1) throw ValidationError(who + ": t0 must be > 1");
    };
    if (kind == Kind::Global) check(global, "global policy");
    if (kind == Kind::SensorWise) {
      if (sensors.empty()) throw ValidationError("sensor-wise policy: empty schedule");
      for (const auto& s : sensors) {
        check(s, "sensor policy");
        if (s.sensor < 0 || s.sensor >= p) throw ValidationError("sensor policy: index out of range");
      }
    }
  }

  /// Continuous enforcement in the sense of overlapping blocks (L <= f).
  bool continuous() const { return kind == Kind::Global && global.L <= global.f; }

  static bool block_covers(const Block& b, int step) {
    if (step < b.t0) return false;
    return (step - b.t0) % b.L < b.f || b.f >= b.L;
  }

  bool sensor_enforced(int sensor, int step) const {
    switch (kind) {
      case Kind::None:
        return false;
      case Kind::Global:
        return block_covers(global, step);
      case Kind::SensorWise:
        for (const auto& s : sensors) {
          if (s.sensor == sensor && block_covers(s, step)) return true;
        }
        return false;
    }
    return false;
  }

  bool fully_enforced(int step, int p) const {
    for (int s = 0; s < p; ++s)
      if (!sensor_enforced(s, step)) return false;
    return true;
  }

  /// Next end of an enforcement block at or after step k (the attacker's
  /// planning horizon). For a global policy this is the earliest t with
  /// t - f + 1 in mu and t >= k. Without enforcement the horizon is k itself;
  /// sensor-wise schedules plan until every compromised channel has passed
  /// through one enforcement block.
  int anchor_after(int k, const std::vector<int>& compromised) const {
    if (kind == Kind::None || compromised.empty()) return k;
    if (kind == Kind::Global) {
      const int first_end = global.t0 + global.f - 1;
      if (k <= first_end) return first_end;
      const int periods = (k - first_end + global.L - 1) / global.L;
      return first_end + periods * global.L;
    }
    int anchor = k;
    for (int c : compromised) {
      int best = -1;
      for (const auto& s : sensors) {
        if (s.sensor != c) continue;
        const int first_end = s.t0 + s.f - 1;
        int end = first_end;
        if (k > first_end) end = first_end + ((k - first_end + s.L - 1) / s.L) * s.L;
        best = best < 0 ? end : std::min(best, end);
      }
      if (best > 0) anchor = std::max(anchor, best);
    }
    return anchor;
  }
};

/// Per-step compromised supports induced by a policy over a finite horizon,
/// with cumulative sizes |Q_k|. Continuous global policies are materialized as
/// the fully protected schedule (every support empty).
struct SupportPattern {
  int p = 0;
  std::vector<int> compromised;                 // sorted, 0-based
  std::vector<std::vector<int>> step_support;   // step j -> K~_j (0-based sensors)
  std::vector<int> cumulative;                  // step j -> |Q_j|
  std::vector<int> block_ends;                  // anchors inside the horizon

  int horizon() const { return static_cast<int>(step_support.size()); }
  int q_size(int k) const { return cumulative[static_cast<size_t>(k - 1)]; }
  const std::vector<int>& support_at(int k) const { return step_support[static_cast<size_t>(k - 1)]; }

  bool enforced_at(int k) const { return support_at(k).size() < compromised.size(); }

  int anchor_for(int k) const {
    for (int e : block_ends)
      if (e >= k) return e;
    return k;
  }

  static SupportPattern from_policy(const EnforcementPolicy& policy, std::vector<int> compromised,
                                    int p, int horizon) {
    policy.validate(p);
    std::sort(compromised.begin(), compromised.end());
    SupportPattern pat;
    pat.p = p;
    pat.compromised = compromised;
    pat.step_support.reserve(static_cast<size_t>(horizon));
    pat.cumulative.reserve(static_cast<size_t>(horizon));
    const bool continuous = policy.continuous();
    int cum = 0;
    for (int j = 1; j <= horizon; ++j) {
      std::vector<int> sup;
      if (!continuous) {
        for (int s : compromised)
          if (!policy.sensor_enforced(s, j)) sup.push_back(s);
      }
      cum += static_cast<int>(sup.size());
      pat.step_support.push_back(std::move(sup));
      pat.cumulative.push_back(cum);
    }
    if (policy.kind == EnforcementPolicy::Kind::Global && !continuous) {
      const auto& g = policy.global;
      for (int e = g.t0 + g.f - 1; e <= horizon; e += g.L) pat.block_ends.push_back(e);
    } else if (policy.kind == EnforcementPolicy::Kind::SensorWise) {
      int k = 1;
      while (k <= horizon) {
        const int a = policy.anchor_after(k, compromised);
        if (a > horizon || a == k) break;
        pat.block_ends.push_back(a);
        k = a + 1;
      }
    }
    return pat;
  }
};

}  // namespace intact

#endif  // INTACT_ENFORCEMENT_HPP
