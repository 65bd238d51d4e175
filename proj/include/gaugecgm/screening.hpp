#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "gaugecgm/atomic_sets.hpp"
#include "gaugecgm/scalar_transforms.hpp"

namespace gaugecgm {

/// Screening bookkeeping for one run. `survivors` is this iteration's
/// surviving set I^(t); `cumulative` is the best set so far: the running
/// intersection in the safe (convex) regime, the latest survivor set in the
/// heuristic regime (intermediate nonconvex removals are not safe, so
/// intersecting them would bake in mistakes).
struct ScreenSet {
  std::set<int> survivors;
  std::set<int> cumulative;
  std::map<int, double> per_atom_slack;
};

/// eps^(t) = eps0 / t; eps0 = 0 is the safe convex setting.
inline double epsilon_schedule(int t, double eps0) {
  return t >= 1 ? eps0 / static_cast<double>(t) : eps0;
}

inline double screen_threshold(double res, double L, double eps) {
  return eps + 2.0 * std::sqrt(L * std::max(res, 0.0) + eps);
}

/// Gap-based rule: removes every finite atom (group, for latent-group sets)
/// whose dual slack sigma_{P~}(grad f) + p^T grad f exceeds
/// eps + 2*sqrt(L*res + eps). `z` is the negative gradient at the current
/// point, with the recession component already minimized out. Safe for convex
/// penalties with eps = 0; removed atoms are then outside supp(x*).
inline std::set<int> screen(const Vector& z, const AtomSet& set, double res, double L,
                            double eps) {
  const std::vector<double> score = set.atom_scores(z);
  const double sigma = *std::max_element(score.begin(), score.end());
  const double thr = screen_threshold(res, L, eps);
  std::set<int> removed;
  for (int id = 0; id < static_cast<int>(score.size()); ++id) {
    if (sigma - score[id] > thr) removed.insert(id);
  }
  return removed;
}

struct SlackReport {
  std::map<int, double> per_atom;
  double delta_min = kInf;  // +inf when `support` covers every atom
};

/// delta_p = sigma_{P~}(grad f) + p^T grad f per finite atom, with delta_min
/// taken over atoms outside `support`. delta_min(x*) = 0 flags a degenerate
/// problem (no finite-time support identification).
inline SlackReport delta_slacks(const Vector& z, const AtomSet& set,
                                const std::set<int>& support) {
  const std::vector<double> score = set.atom_scores(z);
  const double sigma = *std::max_element(score.begin(), score.end());
  SlackReport rep;
  for (int id = 0; id < static_cast<int>(score.size()); ++id) {
    const double slack = sigma - score[id];
    rep.per_atom[id] = slack;
    if (!support.count(id)) rep.delta_min = std::min(rep.delta_min, slack);
  }
  return rep;
}

/// Reweighted variant for the nonconvex regime: scores divided by w_p first.
inline SlackReport delta_slacks(const Vector& z, const ReweightedAtomSet& rws,
                                const std::set<int>& support) {
  const std::vector<double> score = rws.base().atom_scores(z);
  std::vector<double> weighted(score.size());
  for (int id = 0; id < static_cast<int>(score.size()); ++id) {
    weighted[id] = score[id] / rws.weight(id);
  }
  const double sigma = *std::max_element(weighted.begin(), weighted.end());
  SlackReport rep;
  for (int id = 0; id < static_cast<int>(weighted.size()); ++id) {
    const double slack = sigma - weighted[id];
    rep.per_atom[id] = slack;
    if (!support.count(id)) rep.delta_min = std::min(rep.delta_min, slack);
  }
  return rep;
}

/// Harmonic mean of precision and recall; 1.0 when both sets are empty.
inline double f1_score(const std::set<int>& estimated, const std::set<int>& truth) {
  if (estimated.empty() && truth.empty()) return 1.0;
  std::size_t tp = 0;
  for (int id : estimated) tp += truth.count(id);
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / estimated.size();
  const double recall = static_cast<double>(tp) / truth.size();
  return 2.0 * precision * recall / (precision + recall);
}

/// Linearization error D(x) = r(x) - rbar(x;x) + rbar(x*;x) - r(x*), evaluated
/// on tracked coefficient maps (absent atoms carry weight gamma'(0)).
/// Nonnegative by concavity; identically zero for the identity transform.
inline double linearization_error(const CoeffMap& coeffs, const CoeffMap& coeffs_star,
                                  const GammaPenalty& gamma) {
  double d = 0.0;
  for (const auto& [id, c] : coeffs) {
    d += gamma.eval(c) - gamma.deriv(c) * c;
  }
  for (const auto& [id, cs] : coeffs_star) {
    d += gamma.deriv(coeffs.value(id)) * cs - gamma.eval(cs);
  }
  return d;
}

}  // namespace gaugecgm
