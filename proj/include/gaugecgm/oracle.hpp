#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <stdexcept>
#include <vector>

#include "gaugecgm/atomic_sets.hpp"
#include "gaugecgm/losses.hpp"
#include "gaugecgm/scalar_transforms.hpp"
#include "gaugecgm/screening.hpp"

namespace gaugecgm {

// Independent reference computations used to verify the solver path:
// a proximal-gradient convex solver, a dense two-phase simplex for gauge
// linear programs, brute-force LMO enumeration, grid biconjugates, and
// finite differences. Everything here deliberately avoids the conditional
// gradient code path.

struct MaxIterExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReferenceSolution {
  Vector x_star;
  Vector y_star;
  Vector gradient;  // grad f(x* + y*)
  double objective = 0.0;
  std::set<int> support;
  double delta_min = 0.0;
  double residual_at_solution = 0.0;
  long iterations = 0;
};

namespace detail {

// Dense two-phase simplex for  min c^T w  s.t.  E w = g, w >= 0.
// Bland's rule; desk scale only. Returns false when infeasible.
inline bool simplex_solve(const Matrix& E, const Vector& g, const Vector& c,
                          Vector* w_out, double* value_out) {
  const int m = static_cast<int>(E.rows());
  const int n = static_cast<int>(E.cols());
  Matrix A = E;
  Vector b = g;
  for (int i = 0; i < m; ++i) {
    if (b[i] < 0.0) {
      A.row(i) *= -1.0;
      b[i] *= -1.0;
    }
  }

  // Tableau with artificial variables appended.
  const int total = n + m;
  Matrix T(m + 1, total + 1);
  T.setZero();
  T.block(0, 0, m, n) = A;
  T.block(0, n, m, m) = Matrix::Identity(m, m);
  T.block(0, total, m, 1) = b;
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;

  auto pivot = [&](int row, int col) {
    T.row(row) /= T(row, col);
    for (int r = 0; r <= m; ++r) {
      if (r != row && T(r, col) != 0.0) T.row(r) -= T(r, col) * T.row(row);
    }
    basis[row] = col;
  };

  auto run_phase = [&](int limit_cols) -> void {
    for (int guard = 0; guard < 20000; ++guard) {
      int col = -1;
      for (int j = 0; j < limit_cols; ++j) {
        if (T(m, j) < -1e-11) {
          col = j;
          break;  // Bland: first improving column
        }
      }
      if (col < 0) return;
      int row = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (T(i, col) > 1e-11) {
          const double ratio = T(i, total) / T(i, col);
          if (ratio < best_ratio - 1e-12 ||
              (ratio < best_ratio + 1e-12 && (row < 0 || basis[i] < basis[row]))) {
            best_ratio = ratio;
            row = i;
          }
        }
      }
      if (row < 0) throw std::runtime_error("simplex: unbounded");
      pivot(row, col);
    }
    throw std::runtime_error("simplex: iteration guard tripped");
  };

  // Phase 1: minimize the sum of artificials.
  for (int j = 0; j < total; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += (basis[i] >= n) ? T(i, j) : 0.0;
    T(m, j) = (j >= n ? 1.0 : 0.0) - s;
  }
  double rhs = 0.0;
  for (int i = 0; i < m; ++i) rhs += b[i];
  T(m, total) = -rhs;
  run_phase(total);
  if (T(m, total) < -1e-7) return false;  // infeasible

  // Drive any artificial still in the basis out (degenerate rows).
  for (int i = 0; i < m; ++i) {
    if (basis[i] >= n) {
      int col = -1;
      for (int j = 0; j < n; ++j) {
        if (std::abs(T(i, j)) > 1e-9) {
          col = j;
          break;
        }
      }
      if (col >= 0) pivot(i, col);
    }
  }

  // Phase 2 objective.
  T.row(m).setZero();
  for (int j = 0; j < n; ++j) T(m, j) = c[j];
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n && T(m, basis[i]) != 0.0) T.row(m) -= T(m, basis[i]) * T.row(i);
  }
  run_phase(n);

  Vector w = Vector::Zero(n);
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) w[basis[i]] = T(i, total);
  }
  *w_out = w;
  *value_out = c.dot(w);
  return true;
}

inline Matrix atom_matrix(const std::vector<Atom>& atoms) {
  if (atoms.empty()) throw std::invalid_argument("oracle: empty atom list");
  Matrix P(atoms.front().vector.size(), static_cast<int>(atoms.size()));
  for (std::size_t j = 0; j < atoms.size(); ++j) P.col(static_cast<int>(j)) = atoms[j].vector;
  return P;
}

}  // namespace detail

struct GaugeLpResult {
  double value = 0.0;
  Vector coeffs;  // one entry per input atom
};

/// Gauge as a linear program: min sum c_p s.t. sum c_p p (+ alpha * line) = x,
/// c >= 0. `line` adds a free recession direction at zero cost. Throws
/// domain_error when x is not in cone(atoms) + span(line).
inline GaugeLpResult gauge_lp(const std::vector<Atom>& atoms, const Vector& x,
                              const Vector* line = nullptr) {
  const Matrix P = detail::atom_matrix(atoms);
  const int n = static_cast<int>(atoms.size());
  const int extra = line ? 2 : 0;
  Matrix E(P.rows(), n + extra);
  E.leftCols(n) = P;
  if (line) {
    E.col(n) = *line;
    E.col(n + 1) = -*line;
  }
  Vector cost = Vector::Zero(n + extra);
  cost.head(n).setOnes();
  Vector w;
  double value = 0.0;
  if (!detail::simplex_solve(E, x, cost, &w, &value)) {
    throw std::domain_error("gauge_lp: x is not in the conic hull of the atoms");
  }
  GaugeLpResult r;
  r.value = value;
  r.coeffs = w.head(n);
  return r;
}

/// Brute-force gauge for an atomic set's finite part (plus the recession line
/// for total variation); the LP oracle behind the closed forms.
inline double brute_force_gauge(const AtomSet& set, const Vector& x) {
  const std::vector<Atom> atoms = set.finite_atoms();
  if (set.kind() == GaugeKind::TotalVariation) {
    const Vector ones = Vector::Ones(set.dim());
    return gauge_lp(atoms, x, &ones).value;
  }
  return gauge_lp(atoms, x).value;
}

/// Brute-force LMO: full enumeration of the finite atom list with the same
/// lowest-id tie-break as the production oracle.
inline Atom brute_force_lmo(const AtomSet& set, const Vector& z) {
  int best = 0;
  double best_val = -kInf;
  if (set.kind() == GaugeKind::LatentGroup) {
    for (std::size_t k = 0; k < set.groups().size(); ++k) {
      double n2 = 0.0;
      for (int i : set.groups()[k]) n2 += z[i] * z[i];
      const double v = std::sqrt(n2);
      if (v > best_val) {
        best_val = v;
        best = static_cast<int>(k);
      }
    }
    Atom a;
    a.id = best;
    a.group = best;
    a.vector = Vector::Zero(set.dim());
    double n2 = 0.0;
    for (int i : set.groups()[best]) n2 += z[i] * z[i];
    if (n2 > 0.0) {
      for (int i : set.groups()[best]) a.vector[i] = z[i] / std::sqrt(n2);
    } else {
      a = set.atom(best);
    }
    return a;
  }
  const std::vector<Atom> atoms = set.finite_atoms();
  for (int id = 0; id < static_cast<int>(atoms.size()); ++id) {
    const double v = atoms[id].vector.dot(z);
    if (v > best_val) {
      best_val = v;
      best = id;
    }
  }
  return atoms[best];
}

/// Grid minimization of r_P(x) = min { sum gamma(c_p) : sum c_p p = x, c >= 0 }
/// for a concave transform handed in as a plain callable. Handles atom
/// matrices whose kernel is at most one-dimensional: the feasible coefficient
/// set is then a segment, swept with `resolution` points (endpoints included).
inline double min_concave_gauge_grid(const std::vector<Atom>& atoms, const Vector& x,
                                     const std::function<double(double)>& gamma,
                                     int resolution = 100001) {
  const GaugeLpResult base = gauge_lp(atoms, x);
  const Matrix P = detail::atom_matrix(atoms);
  Eigen::FullPivLU<Matrix> lu(P);
  lu.setThreshold(1e-10);
  const Matrix kernel = lu.kernel();
  const bool trivial_kernel = kernel.cols() == 0 ||
                              (kernel.cols() == 1 && kernel.col(0).norm() < 1e-12);
  auto value_at = [&](const Vector& c) {
    double s = 0.0;
    for (int i = 0; i < c.size(); ++i) s += gamma(std::max(c[i], 0.0));
    return s;
  };
  if (trivial_kernel) return value_at(base.coeffs);
  if (kernel.cols() > 1) {
    throw std::invalid_argument("min_concave_gauge_grid: kernel dimension > 1 unsupported");
  }
  const Vector dir = kernel.col(0) / kernel.col(0).norm();
  double t_lo = -kInf, t_hi = kInf;
  for (int i = 0; i < dir.size(); ++i) {
    if (dir[i] > 1e-14) t_lo = std::max(t_lo, -base.coeffs[i] / dir[i]);
    if (dir[i] < -1e-14) t_hi = std::min(t_hi, -base.coeffs[i] / dir[i]);
  }
  if (!(t_lo <= t_hi)) return value_at(base.coeffs);
  double best = kInf;
  for (int k = 0; k < resolution; ++k) {
    const double t = t_lo + (t_hi - t_lo) * k / (resolution - 1.0);
    best = std::min(best, value_at(base.coeffs + t * dir));
  }
  return best;
}

/// min cost^T x over the convex hull of the finite atoms: returns the centroid
/// of the maximizing atom face (within 1e-12 of the best inner product), which
/// is deterministic and exposes non-vertex optima.
inline Vector constrained_linear_min(const AtomSet& set, const Vector& cost) {
  const std::vector<Atom> atoms = set.finite_atoms();
  double best = -kInf;
  for (const Atom& a : atoms) best = std::max(best, -cost.dot(a.vector));
  Vector centroid = Vector::Zero(set.dim());
  int count = 0;
  for (const Atom& a : atoms) {
    if (-cost.dot(a.vector) >= best - 1e-12) {
      centroid += a.vector;
      ++count;
    }
  }
  return centroid / static_cast<double>(count);
}

/// Central finite differences per coordinate.
inline Vector finite_diff_grad(const QuadraticLoss& loss, const Vector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Vector g(x.size());
  Vector e = x;
  for (int i = 0; i < x.size(); ++i) {
    e[i] = x[i] + h;
    const double up = loss.eval(e);
    e[i] = x[i] - h;
    const double dn = loss.eval(e);
    e[i] = x[i];
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

/// Tabulated function on a uniform 1-D grid.
struct GridFunction {
  double lo = 0.0, hi = 0.0;
  std::vector<double> values;

  double x_at(int i) const {
    return lo + (hi - lo) * i / (static_cast<double>(values.size()) - 1.0);
  }
  double nearest(double x) const {
    const double step = (hi - lo) / (static_cast<double>(values.size()) - 1.0);
    const int i = std::clamp(static_cast<int>(std::lround((x - lo) / step)), 0,
                             static_cast<int>(values.size()) - 1);
    return values[static_cast<std::size_t>(i)];
  }
};

/// Grid conjugate h*(z) = max_x x z - h(x) over [lo, hi]; the dual grid uses
/// the same box unless overridden.
inline GridFunction grid_conjugate(const std::function<double(double)>& h, double lo,
                                   double hi, int resolution = 2001,
                                   double zlo = 0.0, double zhi = 0.0) {
  if (zlo == 0.0 && zhi == 0.0) {
    zlo = lo;
    zhi = hi;
  }
  std::vector<double> hx(static_cast<std::size_t>(resolution));
  std::vector<double> xs(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) {
    xs[i] = lo + (hi - lo) * i / (resolution - 1.0);
    hx[i] = h(xs[i]);
  }
  GridFunction out;
  out.lo = zlo;
  out.hi = zhi;
  out.values.resize(static_cast<std::size_t>(resolution));
  for (int j = 0; j < resolution; ++j) {
    const double z = zlo + (zhi - zlo) * j / (resolution - 1.0);
    double best = -kInf;
    for (int i = 0; i < resolution; ++i) best = std::max(best, xs[i] * z - hx[i]);
    out.values[static_cast<std::size_t>(j)] = best;
  }
  return out;
}

/// Grid biconjugate h**: two grid conjugations on [lo, hi]. Error is
/// O((hi-lo)/resolution) times the local curvature; the default 2001-point
/// grid on [-10, 10] keeps it well under 1e-2 for the shipped penalties.
inline GridFunction grid_biconjugate(const std::function<double(double)>& h, double lo,
                                     double hi, int resolution = 2001) {
  const GridFunction conj = grid_conjugate(h, lo, hi, resolution);
  auto conj_fn = [&](double z) { return conj.nearest(z); };
  return grid_conjugate(conj_fn, conj.lo, conj.hi, resolution, lo, hi);
}

/// Reference solve of the convex problem min f(x) + phi(kappa(x)) for the
/// identity transform, phi = (lambda/2) xi^2, and a basis-like gauge
/// (signed/mapped basis or total variation). Proximal gradient in the basis
/// where the gauge is the plain l1 norm, with the sort-based proximal operator
/// of (beta/2)||.||_1^2; iterates until the linearized duality gap drops to
/// `tol`. Fully independent of the conditional-gradient path.
inline ReferenceSolution reference_solve(const QuadraticLoss& loss, const PhiPenalty& phi,
                                         const AtomSet& set, double tol,
                                         long max_iter = 1000000) {
  if (phi.kind() != PhiKind::Monomial || phi.alpha() != 2.0) {
    throw std::invalid_argument("reference_solve: shipped path requires phi = (lambda/2) xi^2");
  }
  if (set.kind() == GaugeKind::LatentGroup) {
    throw std::invalid_argument("reference_solve: latent groups are out of scope");
  }
  const double lambda = phi.scale();
  const int d = set.dim();

  // Change of basis x = M v (+ free mean column for total variation) so the
  // penalty is (lambda/2)(sum |v_i| over the l1 block)^2.
  Matrix M;
  int l1_dim = d;
  switch (set.kind()) {
    case GaugeKind::SignedBasis:
      M = Matrix::Identity(d, d);
      break;
    case GaugeKind::MappedBasis:
      M = set.map_matrix();
      break;
    case GaugeKind::TotalVariation: {
      l1_dim = d - 1;
      M = Matrix(d, d);
      M.leftCols(d - 1) = set.diff_pinv();
      M.col(d - 1).setOnes();
      break;
    }
    default:
      throw std::invalid_argument("reference_solve: unsupported gauge kind");
  }
  const Matrix B = loss.A() * M;
  const double sn = spectral_norm(B);
  const double Lb = std::max(2.0 * loss.scale() * sn * sn, 1e-12);
  const double tau = 1.0 / Lb;

  // prox of (beta/2)(sum_i |v_i|)^2 over the l1 block: shrink against the
  // self-consistent total s = sum |result|, found by a descending scan.
  auto prox_sql1 = [&](Vector v, double beta) {
    std::vector<double> mags(static_cast<std::size_t>(l1_dim));
    for (int i = 0; i < l1_dim; ++i) mags[i] = std::abs(v[i]);
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double run = 0.0, s = 0.0;
    for (int k = 1; k <= l1_dim; ++k) {
      run += sorted[k - 1];
      const double cand = run / (1.0 + k * beta);
      const double next = k < l1_dim ? sorted[k] : 0.0;
      if (sorted[k - 1] > beta * cand - 1e-15 && beta * cand >= next - 1e-15) {
        s = cand;
        break;
      }
    }
    for (int i = 0; i < l1_dim; ++i) {
      const double m = std::max(mags[i] - beta * s, 0.0);
      v[i] = v[i] >= 0.0 ? m : -m;
    }
    return v;
  };

  Vector v = Vector::Zero(d);
  const GammaPenalty identity = GammaPenalty::identity();
  ReferenceSolution sol;
  auto residual_at = [&](const Vector& vv, double* res_out) {
    const Vector x_raw = M * vv;
    Decomposition dec = set.decompose(x_raw);
    const Vector x = x_raw - dec.recession_part;
    const Vector y = set.recession_minimize(loss, x);
    const Vector xy = x + y;
    const Vector z = -loss.grad(xy);
    const double kappa = dec.coeffs.total();
    const double sigma = std::max(set.support_value(z), 0.0);
    *res_out = -z.dot(xy) + phi.eval(kappa) + phi.conj(sigma);
    sol.x_star = x;
    sol.y_star = y;
    sol.gradient = -z;
    sol.objective = loss.eval(xy) + phi.eval(kappa);
    sol.support.clear();
    for (const auto& [id, c] : dec.coeffs) {
      if (c > 1e-9) sol.support.insert(id);
    }
  };

  double res = kInf;
  long it = 0;
  for (; it < max_iter; ++it) {
    const Vector grad_v = M.transpose() * loss.grad(M * v);
    v = prox_sql1(v - tau * grad_v, tau * lambda);
    if (it % 25 == 24 || it == max_iter - 1) {
      residual_at(v, &res);
      if (res <= tol) break;
    }
  }
  if (res > tol) {
    throw MaxIterExceeded("reference_solve: residual " + std::to_string(res) +
                          " stalled above tolerance");
  }
  sol.residual_at_solution = res;
  sol.iterations = it + 1;
  const SlackReport slacks = delta_slacks(-sol.gradient, set, sol.support);
  sol.delta_min = slacks.delta_min;
  return sol;
}

}  // namespace gaugecgm
