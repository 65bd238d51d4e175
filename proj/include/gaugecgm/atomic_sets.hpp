#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gaugecgm/scalar_transforms.hpp"

namespace gaugecgm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a gradient handed to the total-variation LMO is not in
/// range(D^T), i.e. the support function is +inf there.
struct TVInfeasibleGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Atom {
  int id = -1;
  Vector vector;
  int group = -1;  // group index for latent-group sets, -1 otherwise
};

struct LmoResult {
  Atom atom;
  double sigma = 0.0;  // attained (possibly reweighted) support value
};

/// Sparse nonnegative coefficient map over finite atom ids. Zero entries are
/// never stored; iteration order is id-ascending, which keeps every consumer
/// deterministic.
class CoeffMap {
 public:
  using const_iterator = std::map<int, double>::const_iterator;

  void set(int id, double c) {
    if (c > 0.0) {
      entries_[id] = c;
    } else {
      entries_.erase(id);
    }
  }

  void add(int id, double c) { set(id, value(id) + c); }

  double value(int id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? 0.0 : it->second;
  }

  bool contains(int id) const { return entries_.count(id) > 0; }

  void scale_all(double factor) {
    if (factor == 0.0) {
      entries_.clear();
      return;
    }
    for (auto& kv : entries_) kv.second *= factor;
  }

  void prune(double eps) {
    for (auto it = entries_.begin(); it != entries_.end();) {
      it = it->second < eps ? entries_.erase(it) : std::next(it);
    }
  }

  double total() const {
    double s = 0.0;
    for (const auto& kv : entries_) s += kv.second;
    return s;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const_iterator begin() const { return entries_.begin(); }
  const_iterator end() const { return entries_.end(); }

 private:
  std::map<int, double> entries_;
};

struct Decomposition {
  CoeffMap coeffs;
  Vector recession_part;
};

enum class GaugeKind { SignedBasis, MappedBasis, LatentGroup, TotalVariation };

inline const char* gauge_kind_name(GaugeKind k) {
  switch (k) {
    case GaugeKind::SignedBasis: return "signed_basis";
    case GaugeKind::MappedBasis: return "mapped_basis";
    case GaugeKind::LatentGroup: return "latent_group";
    case GaugeKind::TotalVariation: return "total_variation";
  }
  return "?";
}

/// An atomic gauge structure: the finite atom list P0' (enumerable by id), the
/// LMO / support function / gauge / decomposition that go with it, and the
/// recession cone K (the all-ones line for total variation, empty otherwise).
///
/// Atom id layout:
///   SignedBasis    +e_i -> i,        -e_i -> d + i
///   MappedBasis    +p_i -> i,        -p_i -> d + i
///   LatentGroup    group k -> k            (one id per group of ball atoms)
///   TotalVariation +b_k -> k,        -b_k -> (d-1) + k
///
/// Ties in any maximization are broken toward the lowest id.
class AtomSet {
 public:
  static AtomSet signed_basis(int dim) {
    AtomSet s;
    s.kind_ = GaugeKind::SignedBasis;
    s.dim_ = check_dim(dim, 1);
    return s;
  }

  /// Atoms are +-(columns of P); the gauge is ||P^-1 x||_1.
  static AtomSet mapped_basis(Matrix P) {
    AtomSet s;
    s.kind_ = GaugeKind::MappedBasis;
    if (P.rows() != P.cols() || P.rows() < 1) {
      throw std::invalid_argument("AtomSet: map matrix must be square");
    }
    s.dim_ = static_cast<int>(P.rows());
    s.map_lu_.compute(P);
    if (!s.map_lu_.isInvertible()) {
      throw std::invalid_argument("AtomSet: map matrix must be invertible");
    }
    s.map_ = std::move(P);
    return s;
  }

  /// Groups are 0-based index subsets; the atoms of group k are the unit
  /// l2-ball directions supported on G_k, screened as one unit.
  static AtomSet latent_group(int dim, std::vector<std::vector<int>> groups) {
    AtomSet s;
    s.kind_ = GaugeKind::LatentGroup;
    s.dim_ = check_dim(dim, 1);
    if (groups.empty()) throw std::invalid_argument("AtomSet: need at least one group");
    for (auto& g : groups) {
      if (g.empty()) throw std::invalid_argument("AtomSet: empty group");
      std::sort(g.begin(), g.end());
      g.erase(std::unique(g.begin(), g.end()), g.end());
      for (int i : g) {
        if (i < 0 || i >= dim) throw std::invalid_argument("AtomSet: group index out of range");
      }
    }
    s.groups_ = std::move(groups);
    return s;
  }

  /// kappa(x) = ||Dx||_1 with the mean-centered step atoms b_k and recession
  /// line span(1).
  static AtomSet total_variation(int dim) {
    AtomSet s;
    s.kind_ = GaugeKind::TotalVariation;
    s.dim_ = check_dim(dim, 2);
    const int d = dim;
    s.diff_ = Matrix::Zero(d - 1, d);
    for (int i = 0; i < d - 1; ++i) {
      s.diff_(i, i) = 1.0;
      s.diff_(i, i + 1) = -1.0;
    }
    s.gram_llt_.compute(s.diff_ * s.diff_.transpose());
    s.diff_pinv_ = s.diff_.transpose() * s.gram_llt_.solve(Matrix::Identity(d - 1, d - 1));
    return s;
  }

  GaugeKind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool has_recession() const { return kind_ == GaugeKind::TotalVariation; }
  const Matrix& map_matrix() const { return map_; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  const Matrix& diff_matrix() const { return diff_; }
  const Matrix& diff_pinv() const { return diff_pinv_; }

  int finite_atom_count() const {
    switch (kind_) {
      case GaugeKind::SignedBasis:
      case GaugeKind::MappedBasis:
        return 2 * dim_;
      case GaugeKind::LatentGroup:
        return static_cast<int>(groups_.size());
      case GaugeKind::TotalVariation:
        return 2 * (dim_ - 1);
    }
    return 0;
  }

  /// Materializes the atom vector for an id. For latent groups this is the
  /// representative e_{G_k}/sqrt(|G_k|); the LMO returns the gradient-aligned
  /// ball direction instead.
  Atom atom(int id) const {
    if (id < 0 || id >= finite_atom_count()) throw std::out_of_range("AtomSet: bad atom id");
    Atom a;
    a.id = id;
    switch (kind_) {
      case GaugeKind::SignedBasis: {
        a.vector = Vector::Zero(dim_);
        a.vector[id % dim_] = id < dim_ ? 1.0 : -1.0;
        break;
      }
      case GaugeKind::MappedBasis: {
        a.vector = (id < dim_ ? 1.0 : -1.0) * map_.col(id % dim_);
        break;
      }
      case GaugeKind::LatentGroup: {
        const auto& g = groups_[id];
        a.vector = Vector::Zero(dim_);
        const double v = 1.0 / std::sqrt(static_cast<double>(g.size()));
        for (int i : g) a.vector[i] = v;
        a.group = id;
        break;
      }
      case GaugeKind::TotalVariation: {
        const int k = id % (dim_ - 1);
        const double sgn = id < dim_ - 1 ? 1.0 : -1.0;
        a.vector = Vector::Zero(dim_);
        const double shift = static_cast<double>(k + 1) / dim_;
        for (int i = 0; i < dim_; ++i) a.vector[i] = sgn * ((i <= k ? 1.0 : 0.0) - shift);
        break;
      }
    }
    return a;
  }

  std::vector<Atom> finite_atoms() const {
    std::vector<Atom> out;
    out.reserve(finite_atom_count());
    for (int id = 0; id < finite_atom_count(); ++id) out.push_back(atom(id));
    return out;
  }

  /// p^T z per finite atom id (for latent groups, the best in-group value
  /// ||z_{G_k}||_2). The symmetrized support sigma_{P~}(z) is the max entry.
  std::vector<double> atom_scores(const Vector& z) const {
    check_dim_match(z);
    std::vector<double> s(static_cast<std::size_t>(finite_atom_count()), 0.0);
    switch (kind_) {
      case GaugeKind::SignedBasis:
        for (int i = 0; i < dim_; ++i) {
          s[i] = z[i];
          s[dim_ + i] = -z[i];
        }
        break;
      case GaugeKind::MappedBasis: {
        const Vector t = map_.transpose() * z;
        for (int i = 0; i < dim_; ++i) {
          s[i] = t[i];
          s[dim_ + i] = -t[i];
        }
        break;
      }
      case GaugeKind::LatentGroup:
        for (std::size_t k = 0; k < groups_.size(); ++k) {
          double n2 = 0.0;
          for (int i : groups_[k]) n2 += z[i] * z[i];
          s[k] = std::sqrt(n2);
        }
        break;
      case GaugeKind::TotalVariation: {
        const Vector u = tv_dual(z);  // throws if infeasible
        for (int k = 0; k < dim_ - 1; ++k) {
          s[k] = u[k];
          s[dim_ - 1 + k] = -u[k];
        }
        break;
      }
    }
    return s;
  }

  LmoResult lmo(const Vector& z) const { return lmo_weighted(z, {}, 1.0); }

  /// LMO over the reweighted finite part: maximizes p^T z / w_p. `weights`
  /// carries explicit per-id weights, `default_weight` applies elsewhere.
  LmoResult lmo_weighted(const Vector& z, const std::map<int, double>& weights,
                         double default_weight) const {
    const std::vector<double> score = atom_scores(z);
    int best = 0;
    double best_val = -kInf;
    for (int id = 0; id < static_cast<int>(score.size()); ++id) {
      auto it = weights.find(id);
      const double w = it == weights.end() ? default_weight : it->second;
      const double v = score[id] / w;
      if (v > best_val) {
        best_val = v;
        best = id;
      }
    }
    LmoResult r;
    r.sigma = best_val;
    if (kind_ == GaugeKind::LatentGroup) {
      r.atom = group_direction(best, z);
    } else {
      r.atom = atom(best);
    }
    return r;
  }

  /// sigma_P(z): +inf for total variation when z is not in range(D^T).
  double support_value(const Vector& z) const {
    if (kind_ == GaugeKind::TotalVariation) {
      check_dim_match(z);
      Vector u;
      if (!try_tv_dual(z, &u)) return kInf;
      return u.lpNorm<Eigen::Infinity>();
    }
    const std::vector<double> score = atom_scores(z);
    return *std::max_element(score.begin(), score.end());
  }

  /// kappa_P(x) via the closed forms (latent group via the inner solver).
  double gauge_value(const Vector& x) const {
    check_dim_match(x);
    switch (kind_) {
      case GaugeKind::SignedBasis:
        return x.lpNorm<1>();
      case GaugeKind::MappedBasis:
        return map_lu_.solve(x).lpNorm<1>();
      case GaugeKind::LatentGroup: {
        double total = 0.0;
        for (const auto& part : group_split(x)) total += part.norm();
        return total;
      }
      case GaugeKind::TotalVariation:
        return (diff_ * x).lpNorm<1>();
    }
    return 0.0;
  }

  /// Conic decomposition x = sum c_p p + recession_part. Unique and
  /// gauge-optimal for the basis-like kinds; the latent-group split is the
  /// minimizer found by the inner solver (coefficient c_k = ||s_k||_2).
  Decomposition decompose(const Vector& x) const {
    check_dim_match(x);
    Decomposition d;
    d.recession_part = Vector::Zero(dim_);
    switch (kind_) {
      case GaugeKind::SignedBasis:
        for (int i = 0; i < dim_; ++i) {
          if (x[i] > 0.0) d.coeffs.set(i, x[i]);
          if (x[i] < 0.0) d.coeffs.set(dim_ + i, -x[i]);
        }
        break;
      case GaugeKind::MappedBasis: {
        const Vector u = map_lu_.solve(x);
        for (int i = 0; i < dim_; ++i) {
          if (u[i] > 0.0) d.coeffs.set(i, u[i]);
          if (u[i] < 0.0) d.coeffs.set(dim_ + i, -u[i]);
        }
        break;
      }
      case GaugeKind::LatentGroup: {
        const auto parts = group_split(x);
        for (std::size_t k = 0; k < parts.size(); ++k) {
          const double c = parts[k].norm();
          if (c > 0.0) d.coeffs.set(static_cast<int>(k), c);
        }
        break;
      }
      case GaugeKind::TotalVariation: {
        const Vector u = diff_ * x;
        Vector combined = Vector::Zero(dim_);
        for (int k = 0; k < dim_ - 1; ++k) {
          if (u[k] > 0.0) d.coeffs.set(k, u[k]);
          if (u[k] < 0.0) d.coeffs.set(dim_ - 1 + k, -u[k]);
          if (u[k] != 0.0) combined += u[k] * atom(k).vector;
        }
        d.recession_part = x - combined;
        break;
      }
    }
    return d;
  }

  /// Latent-group split of x minimizing sum_k ||s_k||_2 subject to
  /// sum_k s_k = x, supp(s_k) in G_k. Iteratively reweighted least squares:
  /// for fixed eta the constrained quadratic splits coordinatewise as
  /// s_{k,i} = eta_k x_i / sum_{j covers i} eta_j, then eta_k <- ||s_k||.
  /// Stops when successive eta change <= 1e-9; throws after 1e4 sweeps.
  std::vector<Vector> group_split(const Vector& x) const {
    const int K = static_cast<int>(groups_.size());
    std::vector<std::vector<int>> covers(static_cast<std::size_t>(dim_));
    for (int k = 0; k < K; ++k) {
      for (int i : groups_[k]) covers[i].push_back(k);
    }
    for (int i = 0; i < dim_; ++i) {
      if (covers[i].empty() && std::abs(x[i]) > 1e-14) {
        throw std::domain_error("AtomSet: x has mass on an index no group covers");
      }
    }
    std::vector<Vector> parts(static_cast<std::size_t>(K), Vector::Zero(dim_));
    if (x.lpNorm<1>() == 0.0) return parts;
    std::vector<double> eta(static_cast<std::size_t>(K), 1.0);
    const double floor = 1e-14 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    for (int sweep = 0; sweep < 10000; ++sweep) {
      for (auto& p : parts) p.setZero();
      for (int i = 0; i < dim_; ++i) {
        if (covers[i].empty()) continue;
        double denom = 0.0;
        for (int k : covers[i]) denom += eta[k];
        if (denom <= 0.0) continue;
        for (int k : covers[i]) parts[k][i] = eta[k] / denom * x[i];
      }
      double change = 0.0;
      for (int k = 0; k < K; ++k) {
        const double nk = std::max(parts[k].norm(), floor);
        change = std::max(change, std::abs(nk - eta[k]));
        eta[k] = nk;
      }
      if (change <= 1e-9) {
        for (auto& p : parts) {
          if (p.norm() <= 2.0 * floor * std::sqrt(static_cast<double>(dim_))) p.setZero();
        }
        return parts;
      }
    }
    throw std::runtime_error("AtomSet: latent-group inner solver did not converge");
  }

  /// argmin_{y in K} f(x + y). K is empty except for total variation, whose
  /// line direction admits one exact Newton step for quadratic losses. The
  /// resulting gradient lies in the polar cone K° (zero mean for TV).
  template <class Loss>
  Vector recession_minimize(const Loss& loss, const Vector& x) const {
    if (kind_ != GaugeKind::TotalVariation) return Vector::Zero(dim_);
    const Vector ones = Vector::Ones(dim_);
    const double curv = loss.dir_curvature(ones);
    if (curv <= 1e-300) return Vector::Zero(dim_);  // A*1 = 0: any offset works
    const double slope = loss.grad(x).dot(ones);
    return (-slope / curv) * ones;
  }

 private:
  AtomSet() = default;

  static int check_dim(int dim, int least) {
    if (dim < least) throw std::invalid_argument("AtomSet: dimension too small");
    return dim;
  }

  void check_dim_match(const Vector& v) const {
    if (static_cast<int>(v.size()) != dim_) {
      throw std::invalid_argument("AtomSet: vector dimension mismatch");
    }
    if (!v.allFinite()) throw std::invalid_argument("AtomSet: non-finite vector");
  }

  Atom group_direction(int k, const Vector& z) const {
    Atom a;
    a.id = k;
    a.group = k;
    a.vector = Vector::Zero(dim_);
    double n2 = 0.0;
    for (int i : groups_[k]) n2 += z[i] * z[i];
    if (n2 > 0.0) {
      const double inv = 1.0 / std::sqrt(n2);
      for (int i : groups_[k]) a.vector[i] = inv * z[i];
    } else {
      a = atom(k);  // zero gradient on the group: any ball atom attains 0
    }
    return a;
  }

  bool try_tv_dual(const Vector& z, Vector* u) const {
    *u = gram_llt_.solve(diff_ * z);
    const double resid = (diff_.transpose() * (*u) - z).norm();
    return resid <= 1e-8 * (1.0 + z.norm());
  }

  Vector tv_dual(const Vector& z) const {
    Vector u;
    if (!try_tv_dual(z, &u)) {
      throw TVInfeasibleGradient(
          "total variation: gradient not in range(D^T); the LMO is undefined "
          "until the recession direction is minimized out");
    }
    return u;
  }

  GaugeKind kind_ = GaugeKind::SignedBasis;
  int dim_ = 0;
  Matrix map_;
  Eigen::FullPivLU<Matrix> map_lu_;
  std::vector<std::vector<int>> groups_;
  Matrix diff_;       // D, (d-1) x d
  Matrix diff_pinv_;  // D^+ = D^T (D D^T)^-1
  Eigen::LLT<Matrix> gram_llt_;
};

/// The reweighted atomic set P(x_bar): atom p carries weight w_p =
/// gamma'(c_p(x_bar)), absent atoms the default gamma'(0) = gamma_max.
class ReweightedAtomSet {
 public:
  ReweightedAtomSet(const AtomSet& base, std::map<int, double> weights,
                    double default_weight)
      : base_(&base), weights_(std::move(weights)), default_weight_(default_weight) {}

  const AtomSet& base() const { return *base_; }
  double default_weight() const { return default_weight_; }
  const std::map<int, double>& weights() const { return weights_; }

  double weight(int id) const {
    auto it = weights_.find(id);
    return it == weights_.end() ? default_weight_ : it->second;
  }

  LmoResult lmo(const Vector& z) const {
    return base_->lmo_weighted(z, weights_, default_weight_);
  }

  /// sigma_{P(x_bar)}(z) = max_p p^T z / w_p.
  double support_value(const Vector& z) const {
    if (base_->kind() == GaugeKind::TotalVariation &&
        base_->support_value(z) == kInf) {
      return kInf;
    }
    const std::vector<double> score = base_->atom_scores(z);
    double best = -kInf;
    for (int id = 0; id < static_cast<int>(score.size()); ++id) {
      best = std::max(best, score[id] / weight(id));
    }
    return best;
  }

  /// Weighted gauge kappa_{P(x_bar)}(x) evaluated on a known decomposition.
  double gauge_of_coeffs(const CoeffMap& coeffs) const {
    double s = 0.0;
    for (const auto& [id, c] : coeffs) s += weight(id) * c;
    return s;
  }

 private:
  const AtomSet* base_;
  std::map<int, double> weights_;
  double default_weight_;
};

/// Builds the reweighted set from a coefficient map: w_p = gamma'(c_p), and
/// gamma'(0) = gamma_max for atoms outside the support.
inline ReweightedAtomSet reweight(const AtomSet& set, const CoeffMap& coeffs,
                                  const GammaPenalty& gamma) {
  std::map<int, double> w;
  for (const auto& [id, c] : coeffs) w[id] = gamma.deriv(c);
  return ReweightedAtomSet(set, std::move(w), gamma.gamma_max());
}

}  // namespace gaugecgm
