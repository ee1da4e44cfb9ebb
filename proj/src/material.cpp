#include "pfdam/material.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace pfdam {

Real penalty_value(const Penalty& p, Real x) {
  if (x <= 0.0) return 0.0;
  if (p.kind == Penalty::Kind::moreau_yosida) return x * x / (2.0 * p.beta);
  const Real w = p.beta * p.beta;
  if (x <= w) return x * x * x / (6.0 * w * p.beta);
  return (x - 0.5 * w) * (x - 0.5 * w) / (2.0 * p.beta) + w * w / (24.0 * p.beta);
}

Real penalty_slope(const Penalty& p, Real x) {
  if (x <= 0.0) return 0.0;
  if (p.kind == Penalty::Kind::moreau_yosida) return x / p.beta;
  const Real w = p.beta * p.beta;
  if (x <= w) return x * x / (2.0 * w * p.beta);
  return (x - 0.5 * w) / p.beta;
}

Real penalty_curvature(const Penalty& p, Real x) {
  if (x <= 0.0) return 0.0;
  if (p.kind == Penalty::Kind::moreau_yosida) return 1.0 / p.beta;
  const Real w = p.beta * p.beta;
  if (x <= w) return x / (w * p.beta);
  return 1.0 / p.beta;
}

Real subgradient_residual(Real rate, Real xi) {
  return std::max(rate, 0.0) + std::max(-xi, 0.0) + std::abs(xi * rate);
}

StiffnessTensor::StiffnessTensor(int dim, Eigen::MatrixXd voigt)
    : dim_(dim), voigt_(std::move(voigt)) {
  // Coercivity via the Mandel form, whose eigenvalues are exactly the
  // extrema of e:Ce over unit-norm symmetric e.
  Eigen::MatrixXd mandel = voigt_;
  if (dim_ == 2) {
    const Real s = std::sqrt(2.0);
    mandel(0, 2) *= s;
    mandel(1, 2) *= s;
    mandel(2, 0) *= s;
    mandel(2, 1) *= s;
    mandel(2, 2) *= 2.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mandel);
  eta_ = es.eigenvalues().minCoeff();
  if (eta_ <= 0.0)
    throw std::invalid_argument("StiffnessTensor: not positive definite");
}

StiffnessTensor StiffnessTensor::isotropic(int dim, Real lambda, Real mu) {
  if (dim == 1) {
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = lambda + 2.0 * mu;
    return StiffnessTensor(1, v);
  }
  if (dim != 2) throw std::invalid_argument("StiffnessTensor: dim must be 1 or 2");
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(3, 3);
  v(0, 0) = v(1, 1) = lambda + 2.0 * mu;
  v(0, 1) = v(1, 0) = lambda;
  v(2, 2) = mu;
  return StiffnessTensor(2, v);
}

StiffnessTensor StiffnessTensor::explicit_voigt(int dim, const Eigen::MatrixXd& voigt) {
  const int n = dim == 1 ? 1 : 3;
  if (dim != 1 && dim != 2) throw std::invalid_argument("StiffnessTensor: dim must be 1 or 2");
  if (voigt.rows() != n || voigt.cols() != n)
    throw std::invalid_argument("StiffnessTensor: wrong Voigt size");
  if (!voigt.isApprox(voigt.transpose(), 1e-12))
    throw std::invalid_argument("StiffnessTensor: Voigt matrix must be symmetric");
  return StiffnessTensor(dim, voigt);
}

Eigen::VectorXd StiffnessTensor::stress(const Eigen::VectorXd& strain_voigt) const {
  return voigt_ * strain_voigt;
}

Real StiffnessTensor::energy(const Eigen::VectorXd& strain_voigt) const {
  return strain_voigt.dot(voigt_ * strain_voigt);
}

Eigen::Matrix2d apply_stiffness(const StiffnessTensor& C, const Eigen::Matrix2d& e) {
  if (C.dim() != 2) throw std::invalid_argument("apply_stiffness: need a 2D tensor");
  if (!e.isApprox(e.transpose(), 1e-12))
    throw std::invalid_argument("apply_stiffness: strain must be symmetric");
  Eigen::Vector3d ev(e(0, 0), e(1, 1), 2.0 * e(0, 1));
  const Eigen::Vector3d sv = C.voigt() * ev;
  Eigen::Matrix2d s;
  s << sv[0], sv[2], sv[2], sv[1];
  return s;
}

Real apply_stiffness(const StiffnessTensor& C, Real e) {
  if (C.dim() != 1) throw std::invalid_argument("apply_stiffness: need a 1D tensor");
  return C.voigt()(0, 0) * e;
}

namespace {

void require_nonnegative(const PiecewisePoly& p, Real lo, Real hi, const char* what) {
  const int n = 512;
  for (int i = 0; i <= n; ++i) {
    const Real x = lo + (hi - lo) * i / n;
    if (p(x) < -1e-12) throw std::invalid_argument(std::string(what) + ": negative value");
  }
}

// One branch of the extension: constant below 0, the core on [0, 1), a
// quadratic ramp blending the slope from s1 to sf over [1, 1 + width), then
// a straight line with slope sf.  s1 == sf collapses the ramp.
PiecewisePoly extend_branch(const PiecewisePoly& core, Real s1, Real sf, Real width) {
  const Real v0 = core(0.0);
  const Real v1 = core(1.0);
  const PiecewisePoly cut = core.with_knots({0.0, 1.0});

  std::vector<Real> knots;
  std::vector<Eigen::VectorXd> pieces;
  Eigen::VectorXd cst(1);
  cst[0] = v0;
  knots.push_back(0.0);
  pieces.push_back(cst);

  // Core pieces covering [0, 1).
  const auto& ck = cut.knots();
  const auto& cp = cut.pieces();
  for (std::size_t j = 0; j < ck.size(); ++j) {
    if (ck[j] < 0.0 || ck[j] >= 1.0) continue;
    if (ck[j] > 0.0) knots.push_back(ck[j]);
    pieces.push_back(cp[j + 1]);  // piece starting at ck[j]
  }
  knots.push_back(1.0);

  const bool ramp = s1 != sf;
  if (ramp) {
    const Real q = (sf - s1) / (2.0 * width);
    Eigen::VectorXd rp(3);
    rp[0] = v1;
    rp[1] = s1;
    rp[2] = q;
    pieces.push_back(rp);
    knots.push_back(1.0 + width);
    Eigen::VectorXd lin(2);
    lin[0] = v1 + s1 * width + 0.5 * (sf - s1) * width;
    lin[1] = sf;
    pieces.push_back(lin);
  } else {
    Eigen::VectorXd lin(2);
    lin[0] = v1;
    lin[1] = sf;
    pieces.push_back(lin);
  }
  return PiecewisePoly(std::move(knots), std::move(pieces));
}

}  // namespace

CoefficientSplit extend_coefficient(const PiecewisePoly& ctilde, Real delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("extend_coefficient: delta must be positive");
  require_nonnegative(ctilde, 0.0, 1.0, "extend_coefficient: ctilde");
  if (std::abs(ctilde.eval_derivative(0.0)) > 1e-10)
    throw std::invalid_argument("extend_coefficient: ctilde'(0) must vanish");

  const PiecewisePoly base = ctilde.with_knots({0.0, 1.0});
  const PiecewisePoly curv = base.derivative().derivative();
  const PiecewisePoly curv_pos = curv.positive_part();
  const PiecewisePoly curv_neg = curv.negative_part();

  // Double antiderivatives anchored at 0: values ctilde(0) resp. 0, slopes 0.
  // Their sum reproduces ctilde on [0, 1] because ctilde'(0) = 0.
  const PiecewisePoly c1_core =
      curv_pos.antiderivative(0.0, 0.0).antiderivative(0.0, ctilde(0.0));
  const PiecewisePoly c2_core =
      curv_neg.antiderivative(0.0, 0.0).antiderivative(0.0, 0.0);

  const Real lam1 = c1_core.eval_derivative(1.0);
  const Real lam2 = -c2_core.eval_derivative(1.0);

  // Beyond 1 the sum must become constant while c1 stays convex (slope may
  // only grow) and c2 concave (slope may only shrink).  With terminal slopes
  // lam1 = c1'(1) >= 0 and -lam2 = c2'(1) <= 0 this forces the common
  // terminal slope magnitude to be max(lam1, lam2):
  //   lam1 <= lam2: ramp c1' up from lam1 to lam2 (quadratic piece with
  //     curvature (lam2-lam1)/delta >= 0), continue c2 linearly at -lam2;
  //   lam1 >  lam2: the mirrored case, c1 continues linearly at lam1 and
  //     c2' ramps down from -lam2 to -lam1 with curvature <= 0.
  // Either way c1' + c2' vanishes beyond 1 + delta.
  CoefficientSplit out;
  if (lam1 <= lam2) {
    out.convex = extend_branch(c1_core, lam1, lam2, delta);
    out.concave = extend_branch(c2_core, -lam2, -lam2, delta);
  } else {
    out.convex = extend_branch(c1_core, lam1, lam1, delta);
    out.concave = extend_branch(c2_core, -lam2, -lam1, delta);
  }

  require_nonnegative(out.convex + out.concave, -2.0, 3.0 + delta,
                      "extend_coefficient: extension dips negative, reduce delta");
  return out;
}

MaterialLaw::MaterialLaw(CoefficientSplit c, PiecewisePoly f, PiecewisePoly d,
                         StiffnessTensor stiffness, Real mu)
    : split_(std::move(c)),
      c1p_(split_.convex.derivative()),
      c2p_(split_.concave.derivative()),
      c1pp_(c1p_.derivative()),
      f_(std::move(f)),
      fp_(f_.derivative()),
      fpp_(fp_.derivative()),
      d_(std::move(d)),
      C_(std::move(stiffness)),
      mu_(mu) {
  if (!(mu_ > 0.0)) throw std::invalid_argument("MaterialLaw: mu must be positive");
  const PiecewisePoly c2pp = c2p_.derivative();
  Real dmin = std::numeric_limits<Real>::infinity();
  f_lip_ = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const Real x = -10.0 + 20.0 * i / 400.0;
    if (split_.total(x) < -1e-10)
      throw std::invalid_argument("MaterialLaw: c must be nonnegative");
    if (c1pp_(x) < -1e-10) throw std::invalid_argument("MaterialLaw: c1 must be convex");
    if (c2pp(x) > 1e-10) throw std::invalid_argument("MaterialLaw: c2 must be concave");
    dmin = std::min(dmin, d_(x));
    f_lip_ = std::max(f_lip_, std::abs(fpp_(x)));
  }
  if (!(dmin > 0.0)) throw std::invalid_argument("MaterialLaw: d must be strictly positive");
  if (!split_.convex.is_constant_below(0.0, 1e-10) ||
      !split_.concave.is_constant_below(0.0, 1e-10))
    throw std::invalid_argument("MaterialLaw: c must be constant on the negative axis");
  d_unit_ = true;
  for (int i = 0; i <= 100; ++i) {
    const Real x = -5.0 + 10.0 * i / 100.0;
    if (std::abs(d_(x) - 1.0) > 1e-12) d_unit_ = false;
  }
  trunc_safe_ = d_.is_constant_below(0.0, 1e-10);
}

PiecewisePoly quadratic_well(Real center, Real scale) {
  Eigen::VectorXd c(3);
  c[0] = 0.5 * scale * center * center;
  c[1] = -scale * center;
  c[2] = 0.5 * scale;
  return PiecewisePoly(c);
}

}  // namespace pfdam
