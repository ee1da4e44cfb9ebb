#pragma once

#include <Eigen/Dense>
#include <vector>

namespace pfdam {

using Real = double;

/// Piecewise polynomial on the whole real line.
///
/// `knots` holds the N interior breakpoints in strictly increasing order and
/// splits the line into N+1 pieces; piece j lives on [knots[j-1], knots[j])
/// with the conventions knots[-1] = -inf and knots[N] = +inf.  Piece j stores
/// monomial coefficients in the shifted variable x - ref(j), where ref(j) is
/// the left endpoint of the piece (ref(0) = knots[0], or 0 for a single
/// global piece).  The shift keeps evaluation well conditioned away from the
/// origin.
class PiecewisePoly {
public:
  PiecewisePoly();
  /// Single global polynomial with the given monomial coefficients about 0.
  explicit PiecewisePoly(Eigen::VectorXd coeffs);
  PiecewisePoly(std::vector<Real> knots, std::vector<Eigen::VectorXd> pieces);

  static PiecewisePoly constant(Real value);

  Real operator()(Real x) const { return eval(x); }
  Real eval(Real x) const;
  Real eval_derivative(Real x, int order = 1) const;

  PiecewisePoly derivative() const;
  /// Antiderivative P with P(anchor) = value, continuous across knots.
  PiecewisePoly antiderivative(Real anchor, Real value) const;

  PiecewisePoly operator+(const PiecewisePoly& other) const;
  PiecewisePoly operator*(Real scale) const;

  /// max(p, 0) resp. min(p, 0); pieces are split at interior sign changes so
  /// the result is again piecewise polynomial.
  PiecewisePoly positive_part() const;
  PiecewisePoly negative_part() const;

  /// Restriction data: insert the given breakpoints as knots (no-op for
  /// values already present).
  PiecewisePoly with_knots(const std::vector<Real>& extra) const;

  const std::vector<Real>& knots() const { return knots_; }
  const std::vector<Eigen::VectorXd>& pieces() const { return pieces_; }
  int piece_index(Real x) const;
  Real piece_ref(int j) const;

  /// True if every piece left of `x0` (and the value at x0) is the same
  /// constant, i.e. the function is constant on (-inf, x0].
  bool is_constant_below(Real x0, Real tol = 1e-12) const;

private:
  std::vector<Real> knots_;
  std::vector<Eigen::VectorXd> pieces_;
  void normalize();
};

/// Real roots of the polynomial sum_i c[i] x^i inside the open interval
/// (lo, hi), via the companion matrix; multiple roots are deduplicated.
std::vector<Real> polynomial_roots(const Eigen::VectorXd& coeffs, Real lo, Real hi);

}  // namespace pfdam
