#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gaugecgm/atomic_sets.hpp"

namespace gaugecgm {

/// f(x) = scale * ||Ax - b||_2^2. scale is 1/(2m) for the sensing experiments
/// and 1/2 for unit-scale problems.
class QuadraticLoss {
 public:
  QuadraticLoss(Matrix A, Vector b, double scale)
      : A_(std::move(A)), b_(std::move(b)), scale_(scale) {
    if (A_.rows() != b_.size()) throw std::invalid_argument("QuadraticLoss: A rows != b size");
    if (!(scale_ > 0.0)) throw std::invalid_argument("QuadraticLoss: scale must be > 0");
  }

  int dim() const { return static_cast<int>(A_.cols()); }
  int rows() const { return static_cast<int>(A_.rows()); }
  const Matrix& A() const { return A_; }
  const Vector& b() const { return b_; }
  double scale() const { return scale_; }

  double eval(const Vector& x) const { return scale_ * (A_ * x - b_).squaredNorm(); }

  Vector grad(const Vector& x) const {
    return 2.0 * scale_ * (A_.transpose() * (A_ * x - b_));
  }

  /// v^T (Hess f) v = 2 * scale * ||Av||^2, constant in x.
  double dir_curvature(const Vector& v) const {
    return 2.0 * scale_ * (A_ * v).squaredNorm();
  }

 private:
  Matrix A_;
  Vector b_;
  double scale_;
};

struct SmoothnessCertificate {
  std::string gauge_kind;
  double L = 0.0;
};

/// Largest singular value by power iteration on A^T A (200 iterations or
/// relative change < 1e-12).
inline double spectral_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  const int n = static_cast<int>(A.cols());
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double lam = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vector w = A.transpose() * (A * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    const double next = std::sqrt(nw);
    if (it > 0 && std::abs(next - lam) <= 1e-12 * std::max(1.0, lam)) {
      lam = next;
      break;
    }
    lam = next;
  }
  return lam;
}

enum class NormKind { L1, L2, Linf };

namespace detail {

inline double max_col_norm_sq(const Matrix& A) {
  double m = 0.0;
  for (int j = 0; j < A.cols(); ++j) m = std::max(m, A.col(j).squaredNorm());
  return m;
}

}  // namespace detail

/// Smoothness constant of the quadratic loss relative to a plain norm:
///   l1   -> (max_i ||A_:,i||)^2,  l2 -> ||A||_2^2,  linf -> (sum_i ||A_:,i||)^2,
/// each multiplied by 2*scale (the Hessian is 2*scale*A^T A).
inline SmoothnessCertificate smoothness_constant(const QuadraticLoss& loss, NormKind norm) {
  const double factor = 2.0 * loss.scale();
  switch (norm) {
    case NormKind::L1:
      return {"l1", factor * detail::max_col_norm_sq(loss.A())};
    case NormKind::L2: {
      const double s = spectral_norm(loss.A());
      return {"l2", factor * s * s};
    }
    case NormKind::Linf: {
      double sum = 0.0;
      for (int j = 0; j < loss.A().cols(); ++j) sum += loss.A().col(j).norm();
      return {"linf", factor * sum * sum};
    }
  }
  return {"?", 0.0};
}

/// Smoothness constant relative to the gauge of an atomic set:
///   signed basis     l1 constant of A
///   mapped basis     l1 constant of A*P
///   total variation  l1 constant of A*D^+ (centered subspace)
///   latent group     max_k ||A_{:,G_k}||_2^2
inline SmoothnessCertificate smoothness_constant(const QuadraticLoss& loss,
                                                 const AtomSet& set) {
  if (loss.dim() != set.dim()) {
    throw std::invalid_argument("smoothness_constant: dimension mismatch");
  }
  const double factor = 2.0 * loss.scale();
  switch (set.kind()) {
    case GaugeKind::SignedBasis:
      return {gauge_kind_name(set.kind()), factor * detail::max_col_norm_sq(loss.A())};
    case GaugeKind::MappedBasis:
      return {gauge_kind_name(set.kind()),
              factor * detail::max_col_norm_sq(loss.A() * set.map_matrix())};
    case GaugeKind::TotalVariation:
      return {gauge_kind_name(set.kind()),
              factor * detail::max_col_norm_sq(loss.A() * set.diff_pinv())};
    case GaugeKind::LatentGroup: {
      double L = 0.0;
      for (const auto& g : set.groups()) {
        Matrix sub(loss.A().rows(), static_cast<int>(g.size()));
        for (std::size_t j = 0; j < g.size(); ++j) sub.col(static_cast<int>(j)) = loss.A().col(g[j]);
        const double s = spectral_norm(sub);
        L = std::max(L, s * s);
      }
      return {gauge_kind_name(set.kind()), factor * L};
    }
  }
  return {"?", 0.0};
}

}  // namespace gaugecgm
