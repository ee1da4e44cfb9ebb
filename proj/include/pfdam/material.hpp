#pragma once

#include <Eigen/Dense>
#include <string>

#include "pfdam/piecewise.hpp"

namespace pfdam {

/// Penalty approximation of the indicator of (-inf, 0].
///
/// The default kind is the Moreau-Yosida regularization
///   value(x) = x^2 / (2 beta) for x > 0, 0 otherwise,
/// whose slope x+/beta plays the role of the constraint multiplier.  The
/// smooth kind replaces the slope kink at 0 by a quadratic spline of width
/// beta^2, giving a C^2 penalty while keeping value(x) = 0 for x <= 0.
struct Penalty {
  enum class Kind { moreau_yosida, smooth_variant };

  Real beta = 1e-3;
  Kind kind = Kind::moreau_yosida;

  static Penalty moreau_yosida(Real beta) { return {beta, Kind::moreau_yosida}; }
  static Penalty smooth_variant(Real beta) { return {beta, Kind::smooth_variant}; }
};

Real penalty_value(const Penalty& p, Real x);
Real penalty_slope(const Penalty& p, Real x);
/// Derivative of the slope where it exists (a.e.); used as the generalized
/// second derivative in the semismooth Newton step.
Real penalty_curvature(const Penalty& p, Real x);

/// Complementarity residual for the constraint rate <= 0 with multiplier xi:
/// max(rate, 0) + max(-xi, 0) + |xi * rate|, zero iff the triple
/// rate <= 0, xi >= 0, xi * rate = 0 holds.
Real subgradient_residual(Real rate, Real xi);

/// Constant symmetric positive definite fourth-order tensor in dim 1 or 2,
/// stored in Voigt form (engineering shear strain in 2D).
class StiffnessTensor {
public:
  static StiffnessTensor isotropic(int dim, Real lambda, Real mu);
  /// Explicit Voigt matrix: 1x1 in 1D, 3x3 in 2D ordered (11, 22, 12), acting
  /// on engineering strain (e11, e22, 2 e12) and returning (s11, s22, s12).
  /// The identity fourth-order tensor is diag(1, 1, 1/2) in this convention.
  /// Must be symmetric positive definite.
  static StiffnessTensor explicit_voigt(int dim, const Eigen::MatrixXd& voigt);

  int dim() const { return dim_; }
  int voigt_size() const { return dim_ == 1 ? 1 : 3; }
  const Eigen::MatrixXd& voigt() const { return voigt_; }

  /// Stress from a strain in Voigt components (engineering shear).
  Eigen::VectorXd stress(const Eigen::VectorXd& strain_voigt) const;
  /// Energy pairing strain : C strain.
  Real energy(const Eigen::VectorXd& strain_voigt) const;
  /// Coercivity constant: min of e:Ce over symmetric e with |e| = 1.
  Real coercivity() const { return eta_; }

private:
  StiffnessTensor(int dim, Eigen::MatrixXd voigt);
  int dim_;
  Eigen::MatrixXd voigt_;
  Real eta_;
};

/// Stress tensor C e for a symmetric strain tensor.
Eigen::Matrix2d apply_stiffness(const StiffnessTensor& C, const Eigen::Matrix2d& e);
Real apply_stiffness(const StiffnessTensor& C, Real e);

/// Split degradation pair produced by the convex/concave extension.
struct CoefficientSplit {
  PiecewisePoly convex;   // c1: convex, nondecreasing slope
  PiecewisePoly concave;  // c2: concave
  Real total(Real x) const { return convex(x) + concave(x); }
};

/// Extend a degradation function given on [0, 1] to the whole line.
///
/// Input: ctilde nonnegative on [0, 1] with ctilde'(0) = 0, and a ramp width
/// delta > 0.  The result is a convex/concave pair (c1, c2) with c1 + c2 =
/// ctilde on [0, 1], both constant on (-inf, 0], c1 convex and c2 concave on
/// the whole line with Lipschitz derivatives, and c1 + c2 constant beyond
/// 1 + delta.  Rejects inputs violating the preconditions and ramps that
/// would drag the sum negative.
CoefficientSplit extend_coefficient(const PiecewisePoly& ctilde, Real delta);

/// Material data for the damage / viscoelasticity system: degradation split
/// (c1, c2) for the elastic coupling, viscous degradation d, damage potential
/// f, stiffness C, and viscosity ratio mu (viscous tensor = mu * C).
class MaterialLaw {
public:
  MaterialLaw(CoefficientSplit c, PiecewisePoly f, PiecewisePoly d,
              StiffnessTensor stiffness, Real mu);

  Real c(Real x) const { return split_.total(x); }
  Real c1(Real x) const { return split_.convex(x); }
  Real c2(Real x) const { return split_.concave(x); }
  Real c1_prime(Real x) const { return c1p_(x); }
  Real c2_prime(Real x) const { return c2p_(x); }
  Real c1_second(Real x) const { return c1pp_(x); }

  Real f(Real x) const { return f_(x); }
  Real f_prime(Real x) const { return fp_(x); }
  Real f_second(Real x) const { return fpp_(x); }

  Real d(Real x) const { return d_(x); }
  bool viscous_coupling_is_unit() const { return d_unit_; }
  /// True when c1, c2, and d are all constant on the negative axis, so the
  /// pointwise truncation max(chi, 0) leaves every coefficient unchanged.
  bool truncation_safe() const { return trunc_safe_; }

  const StiffnessTensor& stiffness() const { return C_; }
  Real mu() const { return mu_; }
  /// Lipschitz constant of f' on the sampled range, recorded at construction.
  Real f_lipschitz() const { return f_lip_; }

  const CoefficientSplit& split() const { return split_; }

private:
  CoefficientSplit split_;
  PiecewisePoly c1p_, c2p_, c1pp_;
  PiecewisePoly f_, fp_, fpp_;
  PiecewisePoly d_;
  StiffnessTensor C_;
  Real mu_;
  Real f_lip_;
  bool d_unit_;
  bool trunc_safe_;
};

/// f(x) = (scale/2) (x - center)^2.
PiecewisePoly quadratic_well(Real center = 1.0, Real scale = 1.0);

}  // namespace pfdam
