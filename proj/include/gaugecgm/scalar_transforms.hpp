#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gaugecgm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class PhiKind { Monomial, LogBarrier };

/// Outer convex transform phi applied to the gauge value, together with its
/// convex conjugate and the conjugate derivative map used by the solver step.
///
/// Supported families:
///   Monomial:   phi(xi) = xi^alpha / alpha, alpha > 1
///   LogBarrier: phi(xi) = -log(C - xi)/beta - xi/(C*beta) + log(C)/beta on [0, C)
///
/// A positive multiplier `scale` (the penalty weight lambda) acts as
/// (lambda*phi), with conjugate lambda*phi^*(nu/lambda).
class PhiPenalty {
 public:
  static PhiPenalty monomial(double alpha, double scale = 1.0) {
    if (!(alpha > 1.0)) {
      throw std::invalid_argument(
          "PhiPenalty: monomial exponent must be > 1 (alpha = 1 has an "
          "indicator-like conjugate and the iteration need not converge)");
    }
    if (!(scale > 0.0)) throw std::invalid_argument("PhiPenalty: scale must be > 0");
    PhiPenalty p;
    p.kind_ = PhiKind::Monomial;
    p.alpha_ = alpha;
    p.beta_ = alpha / (alpha - 1.0);
    p.scale_ = scale;
    if (alpha == 2.0) {
      p.mu_base_ = 0.5;
      p.phi0_base_ = 0.0;
      p.xi0_ = 0.0;
    } else if (alpha > 2.0) {
      // Quadratic lower bound fitted at the anchor xi_c = 1: mu = phi(1)/2.
      // The largest admissible offset is attained where mu*xi^2 - phi(xi)
      // peaks, which is also the touching point xi0.
      p.mu_base_ = 1.0 / (2.0 * alpha);
      const double xs = std::pow(2.0 * p.mu_base_, 1.0 / (alpha - 2.0));
      p.phi0_base_ = p.mu_base_ * xs * xs - std::pow(xs, alpha) / alpha;
      p.xi0_ = xs;
    } else {
      // 1 < alpha < 2: no quadratic lower bound exists; constructible, but the
      // solver is not guaranteed to converge.
      p.mu_base_ = 0.0;
      p.phi0_base_ = 0.0;
      p.xi0_ = 0.0;
    }
    return p;
  }

  static PhiPenalty log_barrier(double C, double beta, double scale = 1.0) {
    if (!(C > 0.0) || !(beta > 0.0)) {
      throw std::invalid_argument("PhiPenalty: log barrier needs C > 0, beta > 0");
    }
    if (!(scale > 0.0)) throw std::invalid_argument("PhiPenalty: scale must be > 0");
    PhiPenalty p;
    p.kind_ = PhiKind::LogBarrier;
    p.C_ = C;
    p.beta_ = beta;
    p.scale_ = scale;
    // phi = +inf past C, so any modulus certifies the quadratic bound there;
    // 1/(2C^2) is a conservative certificate on [0, C).
    p.mu_base_ = 1.0 / (2.0 * C * C);
    if (beta > 1.0) {
      const double xs = C * (1.0 - 1.0 / beta);
      p.phi0_base_ = std::max(0.0, p.mu_base_ * xs * xs - p.eval_base(xs));
    } else {
      p.phi0_base_ = 0.0;
    }
    p.xi0_ = C;  // (phi^*)' is bounded by C outright
    return p;
  }

  PhiKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double barrier_cap() const { return C_; }
  double scale() const { return scale_; }
  double mu() const { return scale_ * mu_base_; }
  double phi0() const { return scale_ * phi0_base_; }
  double xi0() const { return xi0_; }

  /// False only for monomials with 1 < alpha < 2 (no quadratic lower bound;
  /// the method may converge or diverge).
  bool convergence_supported() const {
    return kind_ == PhiKind::LogBarrier || alpha_ >= 2.0;
  }

  double eval(double xi) const {
    check_nonneg(xi, "phi argument");
    return scale_ * eval_base(xi);
  }

  double deriv(double xi) const {
    check_nonneg(xi, "phi argument");
    return scale_ * deriv_base(xi);
  }

  /// phi^*(nu) = sup_{xi >= 0} xi*nu - phi(xi).
  double conj(double nu) const {
    check_nonneg(nu, "phi conjugate argument");
    const double t = nu / scale_;
    switch (kind_) {
      case PhiKind::Monomial:
        return scale_ * std::pow(t, beta_) / beta_;
      case PhiKind::LogBarrier:
        return scale_ * (C_ * t - std::log(C_ * beta_ * t + 1.0) / beta_);
    }
    return 0.0;
  }

  /// The maximizer of xi*nu - phi(xi), i.e. (phi^*)'(nu).
  double conj_deriv(double nu) const {
    check_nonneg(nu, "phi conjugate argument");
    const double t = nu / scale_;
    switch (kind_) {
      case PhiKind::Monomial:
        return std::pow(t, 1.0 / (alpha_ - 1.0));
      case PhiKind::LogBarrier:
        return C_ * C_ * beta_ * t / (C_ * beta_ * t + 1.0);
    }
    return 0.0;
  }

  /// Bisection fallback for the conjugate-derivative map: solves
  /// phi'(xi) = nu on xi >= 0 to absolute tolerance 1e-12 (<= 200 iterations).
  /// Shipped kinds have closed forms; this is the generic route for penalties
  /// without one, and the reference the closed forms are tested against.
  double conj_deriv_bisect(double nu) const {
    check_nonneg(nu, "phi conjugate argument");
    if (nu == 0.0) return 0.0;
    double lo = 0.0;
    double hi = kind_ == PhiKind::LogBarrier ? C_ * (1.0 - 1e-15) : 1.0;
    if (kind_ != PhiKind::LogBarrier) {
      int grow = 0;
      while (deriv(hi) < nu) {
        hi *= 2.0;
        if (++grow > 1200) throw std::logic_error("PhiPenalty: bisection failed to bracket");
      }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      (deriv(mid) < nu ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  PhiPenalty() = default;

  static void check_nonneg(double v, const char* what) {
    if (!(v >= 0.0)) throw std::domain_error(std::string(what) + " must be >= 0");
  }

  double eval_base(double xi) const {
    switch (kind_) {
      case PhiKind::Monomial:
        return std::pow(xi, alpha_) / alpha_;
      case PhiKind::LogBarrier:
        if (xi >= C_) return kInf;
        return -std::log(C_ - xi) / beta_ - xi / (C_ * beta_) + std::log(C_) / beta_;
    }
    return 0.0;
  }

  double deriv_base(double xi) const {
    switch (kind_) {
      case PhiKind::Monomial:
        return std::pow(xi, alpha_ - 1.0);
      case PhiKind::LogBarrier:
        if (xi >= C_) return kInf;
        return xi / (beta_ * C_ * (C_ - xi));
    }
    return 0.0;
  }

  PhiKind kind_ = PhiKind::Monomial;
  double alpha_ = 2.0;
  double beta_ = 2.0;  // conjugate exponent (monomial) or barrier sharpness
  double C_ = 0.0;
  double scale_ = 1.0;
  double mu_base_ = 0.5;
  double phi0_base_ = 0.0;
  double xi0_ = 0.0;
};

enum class GammaKind { Identity, LSP, SCAD, MCP, Fractional };

/// Concave coefficient transform gamma with the affine tail extension: beyond
/// the boundary xi_bar the base penalty continues linearly with slope
/// gamma0'(xi_bar), which keeps gamma'(c) in [gamma_min, gamma_max] with
/// gamma_min > 0.
///
/// Base families (c >= 0):
///   LSP        log(1 + c/theta)
///   SCAD       Table-style spline, theta > 2
///   MCP        lambda*c - c^2/(2 theta), capped
///   Fractional ((c+theta)^q - theta^q)/q, 0 < q < 1
///
/// The fractional family is shifted by theta so that gamma'(0) = theta^(q-1)
/// stays finite; the plain power c^q/q has an unbounded slope at zero, which
/// the reweighting step cannot tolerate.
class GammaPenalty {
 public:
  static GammaPenalty identity() {
    GammaPenalty g;
    g.kind_ = GammaKind::Identity;
    g.xi_bar_ = kInf;
    g.gamma_min_ = 1.0;
    g.gamma_max_ = 1.0;
    return g;
  }

  static GammaPenalty lsp(double theta, double xi_bar) {
    if (!(theta > 0.0)) throw std::invalid_argument("GammaPenalty: LSP needs theta > 0");
    GammaPenalty g;
    g.kind_ = GammaKind::LSP;
    g.theta_ = theta;
    g.set_boundary(xi_bar);
    return g;
  }

  static GammaPenalty scad(double theta, double lambda, double xi_bar) {
    if (!(theta > 2.0)) throw std::invalid_argument("GammaPenalty: SCAD needs theta > 2");
    if (!(lambda > 0.0)) throw std::invalid_argument("GammaPenalty: SCAD needs lambda > 0");
    if (!(xi_bar < theta * lambda)) {
      throw std::invalid_argument(
          "GammaPenalty: SCAD boundary must satisfy xi_bar < theta*lambda "
          "(the base slope hits zero there)");
    }
    GammaPenalty g;
    g.kind_ = GammaKind::SCAD;
    g.theta_ = theta;
    g.lambda_ = lambda;
    g.set_boundary(xi_bar);
    return g;
  }

  static GammaPenalty mcp(double theta, double lambda, double xi_bar) {
    if (!(theta > 0.0)) throw std::invalid_argument("GammaPenalty: MCP needs theta > 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("GammaPenalty: MCP needs lambda > 0");
    if (!(xi_bar < theta * lambda)) {
      throw std::invalid_argument(
          "GammaPenalty: MCP boundary must satisfy xi_bar < theta*lambda");
    }
    GammaPenalty g;
    g.kind_ = GammaKind::MCP;
    g.theta_ = theta;
    g.lambda_ = lambda;
    g.set_boundary(xi_bar);
    return g;
  }

  static GammaPenalty fractional(double q, double theta, double xi_bar) {
    if (!(q > 0.0 && q < 1.0)) {
      throw std::invalid_argument("GammaPenalty: fractional exponent must be in (0,1)");
    }
    if (!(theta > 0.0)) throw std::invalid_argument("GammaPenalty: fractional needs theta > 0");
    GammaPenalty g;
    g.kind_ = GammaKind::Fractional;
    g.theta_ = theta;
    g.q_ = q;
    g.set_boundary(xi_bar);
    return g;
  }

  GammaKind kind() const { return kind_; }
  bool is_identity() const { return kind_ == GammaKind::Identity; }
  double theta() const { return theta_; }
  double lambda() const { return lambda_; }
  double q() const { return q_; }
  double xi_bar() const { return xi_bar_; }
  double gamma_min() const { return gamma_min_; }
  double gamma_max() const { return gamma_max_; }

  double eval(double c) const {
    check_nonneg(c);
    if (c <= xi_bar_) return eval_base(c);
    return eval_base(xi_bar_) + gamma_min_ * (c - xi_bar_);
  }

  /// gamma'(c); the value at 0 is the right limit gamma_max.
  double deriv(double c) const {
    check_nonneg(c);
    if (c >= xi_bar_) return gamma_min_;
    return deriv_base(c);
  }

 private:
  GammaPenalty() = default;

  static void check_nonneg(double c) {
    if (!(c >= 0.0)) throw std::domain_error("gamma argument must be >= 0");
  }

  void set_boundary(double xi_bar) {
    if (!(xi_bar > 0.0) || !std::isfinite(xi_bar)) {
      throw std::invalid_argument(
          "GammaPenalty: a finite boundary xi_bar > 0 is required so the "
          "affine tail keeps gamma_min > 0");
    }
    xi_bar_ = xi_bar;
    gamma_min_ = deriv_base(xi_bar);
    gamma_max_ = deriv_base(0.0);
  }

  double eval_base(double c) const {
    switch (kind_) {
      case GammaKind::Identity:
        return c;
      case GammaKind::LSP:
        return std::log1p(c / theta_);
      case GammaKind::SCAD:
        if (c <= lambda_) return lambda_ * c;
        if (c <= theta_ * lambda_) {
          return (-c * c + 2.0 * theta_ * lambda_ * c - lambda_ * lambda_) /
                 (2.0 * (theta_ - 1.0));
        }
        return (theta_ + 1.0) * lambda_ * lambda_ / 2.0;
      case GammaKind::MCP:
        if (c <= theta_ * lambda_) return lambda_ * c - c * c / (2.0 * theta_);
        return theta_ * lambda_ * lambda_ / 2.0;
      case GammaKind::Fractional:
        return (std::pow(c + theta_, q_) - std::pow(theta_, q_)) / q_;
    }
    return 0.0;
  }

  double deriv_base(double c) const {
    switch (kind_) {
      case GammaKind::Identity:
        return 1.0;
      case GammaKind::LSP:
        return 1.0 / (theta_ + c);
      case GammaKind::SCAD:
        if (c <= lambda_) return lambda_;
        if (c <= theta_ * lambda_) return (theta_ * lambda_ - c) / (theta_ - 1.0);
        return 0.0;
      case GammaKind::MCP:
        if (c <= theta_ * lambda_) return lambda_ - c / theta_;
        return 0.0;
      case GammaKind::Fractional:
        return std::pow(c + theta_, q_ - 1.0);
    }
    return 0.0;
  }

  GammaKind kind_ = GammaKind::Identity;
  double theta_ = 1.0;
  double lambda_ = 1.0;
  double q_ = 0.5;
  double xi_bar_ = kInf;
  double gamma_min_ = 1.0;
  double gamma_max_ = 1.0;
};

}  // namespace gaugecgm
