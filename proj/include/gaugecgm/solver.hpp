#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gaugecgm/atomic_sets.hpp"
#include "gaugecgm/losses.hpp"
#include "gaugecgm/scalar_transforms.hpp"
#include "gaugecgm/screening.hpp"

namespace gaugecgm {

// The P-CGM / RP-CGM iteration: reweight, min-majorization LMO step, merge,
// exact recession minimization, online residual, optional gap screening.

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ScreenMode { Off, Safe, Heuristic };

struct SolverState {
  Vector x;
  Vector y;  // recession component, kept separate from the conic part
  CoeffMap coeffs;
  std::vector<Vector> group_parts;  // latent-group component vectors
  int t = 0;
  double r0 = 0.0;       // r(x) - rbar(x;x) = sum gamma(c_p) - gamma'(c_p) c_p
  double r_gauge = 0.0;  // r_P(x) = sum gamma(c_p) over tracked coefficients
  std::map<int, double> weights;
};

struct IterationRecord {
  int t = 0;
  double objective = 0.0;  // F(x + y) after the merge of iteration t
  double residual = 0.0;   // res at the pre-step iterate, as are sigma/screen fields
  double sigma = 0.0;
  int atom_id = -1;
  double xi = 0.0;
  double screen_threshold = 0.0;
  int survivor_count = 0;
};

struct SolverConfig {
  int max_iter = 1000;
  // theta^(t); must stay in (0, 1] for t >= 1.
  std::function<double(int)> step_schedule = [](int t) { return 2.0 / (1.0 + t); };
  PhiPenalty phi = PhiPenalty::monomial(2.0);
  GammaPenalty gamma = GammaPenalty::identity();
  ScreenMode screen_mode = ScreenMode::Off;
  double epsilon0 = 0.0;
  bool record_history = true;
  // When false the reweighting stage is skipped outright (unit weights,
  // zero offset): the plain P-CGM path. With the identity transform both
  // paths produce bit-identical runs.
  bool reweighting_enabled = true;
  std::optional<Vector> x0;
  // Invoked at the end of every iteration with the just-recorded data and the
  // current screen bookkeeping; lets callers trace per-iteration support sets
  // without the run storing them all.
  std::function<void(const SolverState&, const IterationRecord&, const ScreenSet&)>
      on_iteration;
};

struct MinMajResult {
  Vector s;
  Atom atom;
  double xi = 0.0;
  double nu = 0.0;
};

// History cap; desk-scale memory bound.
inline constexpr std::size_t kMaxHistoryRecords = 1000000;
// Merged coefficients below this are dropped.
inline constexpr double kCoeffPruneEps = 1e-14;

/// Computes the majorant data at the current coefficients: weights
/// w_p = gamma'(c_p) (gamma_max off-support) and the offset r0. Also caches
/// r_P(x) = sum gamma(c_p) on the state.
inline void reweight_state(SolverState& state, const GammaPenalty& gamma) {
  state.weights.clear();
  double r = 0.0;
  double rbar = 0.0;
  for (const auto& [id, c] : state.coeffs) {
    const double w = gamma.deriv(c);
    state.weights[id] = w;
    r += gamma.eval(c);
    rbar += w * c;
  }
  state.r_gauge = r;
  state.r0 = r - rbar;
}

/// One (Min-Maj) step: s = xi * p / w_p where p maximizes the reweighted
/// support value nu = sigma_{P(x)}(z) and xi = max{0, (phi^*)'(nu) - r0}.
/// The clamp keeps s inside cone(P) when the concave offset exceeds the
/// unconstrained one-dimensional minimizer.
inline MinMajResult min_maj_from_lmo(const LmoResult& lm, const ReweightedAtomSet& rws,
                                     const PhiPenalty& phi, double r0) {
  MinMajResult r;
  r.atom = lm.atom;
  r.nu = std::max(lm.sigma, 0.0);
  r.xi = std::max(0.0, phi.conj_deriv(r.nu) - r0);
  r.s = (r.xi / rws.weight(lm.atom.id)) * r.atom.vector;
  return r;
}

inline MinMajResult min_maj_step(const Vector& z, const ReweightedAtomSet& rws,
                                 const PhiPenalty& phi, double r0) {
  return min_maj_from_lmo(rws.lmo(z), rws, phi, r0);
}

/// The (Merge) update x' = (1-theta) x + theta s with coefficient
/// bookkeeping: every tracked c_p scales by (1-theta) and the chosen atom
/// gains theta*xi/w_atom in original atom units, so x' = sum c'_p p exactly.
/// Latent-group runs accumulate per-group component vectors instead (the
/// coefficient is the l2 mass of the group part), since successive steps pick
/// different directions inside one group.
inline void merge_step(SolverState& state, const AtomSet& set, const MinMajResult& step,
                       double theta, double atom_weight) {
  state.x = (1.0 - theta) * state.x + theta * step.s;
  const double increment = theta * step.xi / atom_weight;
  if (set.kind() == GaugeKind::LatentGroup) {
    if (state.group_parts.empty()) {
      state.group_parts.assign(set.groups().size(), Vector::Zero(set.dim()));
    }
    for (auto& part : state.group_parts) part *= (1.0 - theta);
    if (increment > 0.0) {
      state.group_parts[static_cast<std::size_t>(step.atom.id)] += increment * step.atom.vector;
    }
    CoeffMap fresh;
    for (std::size_t k = 0; k < state.group_parts.size(); ++k) {
      const double c = state.group_parts[k].norm();
      if (c >= kCoeffPruneEps) fresh.set(static_cast<int>(k), c);
    }
    state.coeffs = std::move(fresh);
  } else {
    state.coeffs.scale_all(1.0 - theta);
    if (increment > 0.0) state.coeffs.add(step.atom.id, increment);
    state.coeffs.prune(kCoeffPruneEps);
  }
}

/// Online residual (the linearized duality gap at reference x):
///   res = -z^T(x+y) + phi(r_P(x)) + phi^*(nu) - r0 * nu,  nu = sigma_{P(x)}(z).
/// Requires y to be the exact recession minimizer so Fenchel-Young holds with
/// equality for f and z lies in K°. Nonnegative; zero exactly at stationary
/// points.
inline double residual(const SolverState& state, const QuadraticLoss& loss,
                       const PhiPenalty& phi, const ReweightedAtomSet& rws) {
  const Vector xy = state.x + state.y;
  const Vector z = -loss.grad(xy);
  const double nu = std::max(rws.support_value(z), 0.0);
  return -z.dot(xy) + phi.eval(state.r_gauge) + phi.conj(nu) - state.r0 * nu;
}

struct RunResult {
  SolverState state;
  std::vector<IterationRecord> history;
  ScreenSet screen;
  double L = 0.0;              // smoothness constant used by the screen rule
  double final_objective = 0.0;
};

namespace detail {

inline std::set<int> all_finite_ids(const AtomSet& set) {
  std::set<int> ids;
  for (int id = 0; id < set.finite_atom_count(); ++id) ids.insert(id);
  return ids;
}

}  // namespace detail

/// Runs RP-CGM (Algorithm: reweight, gradient, min-maj, merge, recession
/// minimization) for t = 1..max_iter. Deterministic given (config, set, loss).
inline RunResult run(const SolverConfig& config, const AtomSet& set,
                     const QuadraticLoss& loss) {
  if (loss.dim() != set.dim()) throw std::invalid_argument("run: dimension mismatch");
  if (!config.phi.convergence_supported()) {
    std::fprintf(stderr,
                 "gaugecgm: warning: monomial exponent %.4g is in (1,2); the "
                 "iteration may converge or diverge\n",
                 config.phi.alpha());
  }

  RunResult out;
  SolverState& st = out.state;
  st.x = Vector::Zero(set.dim());
  if (config.x0 && config.x0->lpNorm<1>() > 0.0) {
    st.x = *config.x0;
    Decomposition d = set.decompose(st.x);
    st.coeffs = std::move(d.coeffs);
    st.x -= d.recession_part;  // the recession share moves into y
    if (set.kind() == GaugeKind::LatentGroup) {
      st.group_parts = set.group_split(st.x);
    }
  }
  st.y = set.recession_minimize(loss, st.x);

  out.L = smoothness_constant(loss, set).L;
  const bool screening = config.screen_mode != ScreenMode::Off;
  if (screening) {
    out.screen.survivors = detail::all_finite_ids(set);
    out.screen.cumulative = out.screen.survivors;
  }

  if (config.record_history) {
    out.history.reserve(std::min<std::size_t>(config.max_iter, kMaxHistoryRecords));
  }

  for (int t = 1; t <= config.max_iter; ++t) {
    st.t = t;
    const double theta = config.step_schedule(t);
    if (!(theta > 0.0 && theta <= 1.0)) {
      throw std::invalid_argument("run: step schedule must stay in (0,1]");
    }

    if (config.reweighting_enabled) {
      reweight_state(st, config.gamma);
    } else {
      st.weights.clear();
      st.r0 = 0.0;
      st.r_gauge = st.coeffs.total();
    }
    const double default_w = config.reweighting_enabled ? config.gamma.gamma_max() : 1.0;
    ReweightedAtomSet rws(set, st.weights, default_w);

    const Vector xy = st.x + st.y;
    const Vector z = -loss.grad(xy);
    const LmoResult lm = rws.lmo(z);
    const double nu = std::max(lm.sigma, 0.0);
    const double res =
        -z.dot(xy) + config.phi.eval(st.r_gauge) + config.phi.conj(nu) - st.r0 * nu;

    IterationRecord rec;
    rec.t = t;
    rec.residual = res;
    rec.sigma = nu;
    rec.atom_id = lm.atom.id;

    if (screening) {
      const double eps = config.screen_mode == ScreenMode::Safe
                             ? 0.0
                             : epsilon_schedule(t, config.epsilon0);
      rec.screen_threshold = screen_threshold(res, out.L, eps);
      const std::set<int> removed = screen(z, set, res, out.L, eps);
      std::set<int> fresh;
      for (int id = 0; id < set.finite_atom_count(); ++id) {
        if (!removed.count(id)) fresh.insert(id);
      }
      out.screen.survivors = std::move(fresh);
      if (config.screen_mode == ScreenMode::Safe) {
        std::set<int> inter;
        std::set_intersection(out.screen.cumulative.begin(), out.screen.cumulative.end(),
                              out.screen.survivors.begin(), out.screen.survivors.end(),
                              std::inserter(inter, inter.begin()));
        out.screen.cumulative = std::move(inter);
      } else {
        out.screen.cumulative = out.screen.survivors;
      }
      rec.survivor_count = static_cast<int>(out.screen.survivors.size());
    } else {
      rec.survivor_count = set.finite_atom_count();
    }

    const MinMajResult step = min_maj_from_lmo(lm, rws, config.phi, st.r0);
    rec.xi = step.xi;

    merge_step(st, set, step, theta, rws.weight(lm.atom.id));
    st.y = set.recession_minimize(loss, st.x);

    double r_new = 0.0;
    for (const auto& [id, c] : st.coeffs) r_new += config.gamma.eval(c);
    if (!config.reweighting_enabled) r_new = st.coeffs.total();
    rec.objective = loss.eval(st.x + st.y) + config.phi.eval(r_new);
    if (!std::isfinite(rec.objective)) {
      throw DivergenceError("run: objective became non-finite at iteration " +
                            std::to_string(t));
    }

    if (config.record_history && out.history.size() < kMaxHistoryRecords) {
      out.history.push_back(rec);
    }
    out.final_objective = rec.objective;
    if (config.on_iteration) config.on_iteration(st, rec, out.screen);
  }

  // Leave the state's cached majorant data consistent with the final point.
  if (config.reweighting_enabled) {
    reweight_state(st, config.gamma);
  } else {
    st.r_gauge = st.coeffs.total();
    st.r0 = 0.0;
  }
  out.final_objective = loss.eval(st.x + st.y) + config.phi.eval(st.r_gauge);
  return out;
}

}  // namespace gaugecgm
