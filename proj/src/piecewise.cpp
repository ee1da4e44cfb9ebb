#include "pfdam/piecewise.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pfdam {

namespace {

Real horner(const Eigen::VectorXd& c, Real t) {
  Real r = 0.0;
  for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i) r = r * t + c[i];
  return r;
}

Eigen::VectorXd poly_derivative(const Eigen::VectorXd& c) {
  if (c.size() <= 1) return Eigen::VectorXd::Zero(1);
  Eigen::VectorXd d(c.size() - 1);
  for (int i = 1; i < c.size(); ++i) d[i - 1] = i * c[i];
  return d;
}

Eigen::VectorXd poly_antiderivative(const Eigen::VectorXd& c, Real constant) {
  Eigen::VectorXd a(c.size() + 1);
  a[0] = constant;
  for (int i = 0; i < c.size(); ++i) a[i + 1] = c[i] / (i + 1);
  return a;
}

// Re-expand a polynomial given about ref_old into powers of (x - ref_new).
Eigen::VectorXd poly_shift(const Eigen::VectorXd& c, Real ref_old, Real ref_new) {
  const Real s = ref_new - ref_old;  // new local var t' satisfies t = t' + s
  if (s == 0.0) return c;
  const int n = static_cast<int>(c.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  // Horner with polynomial coefficients: out(t') = c((t') + s)
  for (int i = n - 1; i >= 0; --i) {
    for (int k = n - 1; k >= 1; --k) out[k] = out[k - 1] + s * out[k];
    out[0] = c[i] + s * out[0];
    // shift multiply handled implicitly: out <- out * (t'+s) + c[i]
  }
  return out;
}

int true_degree(const Eigen::VectorXd& c, Real tol) {
  for (int i = static_cast<int>(c.size()) - 1; i >= 1; --i)
    if (std::abs(c[i]) > tol) return i;
  return 0;
}

}  // namespace

PiecewisePoly::PiecewisePoly() : pieces_{Eigen::VectorXd::Zero(1)} {}

PiecewisePoly::PiecewisePoly(Eigen::VectorXd coeffs) {
  if (coeffs.size() == 0) coeffs = Eigen::VectorXd::Zero(1);
  pieces_.push_back(std::move(coeffs));
}

PiecewisePoly::PiecewisePoly(std::vector<Real> knots, std::vector<Eigen::VectorXd> pieces)
    : knots_(std::move(knots)), pieces_(std::move(pieces)) {
  if (pieces_.size() != knots_.size() + 1)
    throw std::invalid_argument("PiecewisePoly: need one more piece than knots");
  if (!std::is_sorted(knots_.begin(), knots_.end()))
    throw std::invalid_argument("PiecewisePoly: knots must be increasing");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    if (knots_[i] == knots_[i - 1])
      throw std::invalid_argument("PiecewisePoly: duplicate knot");
  for (auto& p : pieces_)
    if (p.size() == 0) p = Eigen::VectorXd::Zero(1);
}

PiecewisePoly PiecewisePoly::constant(Real value) {
  Eigen::VectorXd c(1);
  c[0] = value;
  return PiecewisePoly(c);
}

int PiecewisePoly::piece_index(Real x) const {
  // piece j covers [knots[j-1], knots[j])
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  return static_cast<int>(it - knots_.begin());
}

Real PiecewisePoly::piece_ref(int j) const {
  if (knots_.empty()) return 0.0;
  return j == 0 ? knots_.front() : knots_[j - 1];
}

Real PiecewisePoly::eval(Real x) const {
  const int j = piece_index(x);
  return horner(pieces_[j], x - piece_ref(j));
}

Real PiecewisePoly::eval_derivative(Real x, int order) const {
  const int j = piece_index(x);
  Eigen::VectorXd c = pieces_[j];
  for (int k = 0; k < order; ++k) c = poly_derivative(c);
  return horner(c, x - piece_ref(j));
}

PiecewisePoly PiecewisePoly::derivative() const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(pieces_.size());
  for (const auto& p : pieces_) out.push_back(poly_derivative(p));
  return PiecewisePoly(knots_, std::move(out));
}

PiecewisePoly PiecewisePoly::antiderivative(Real anchor, Real value) const {
  std::vector<Eigen::VectorXd> out(pieces_.size());
  const int ja = piece_index(anchor);
  // Anchor piece: choose its constant so the value at `anchor` matches.
  {
    Eigen::VectorXd a = poly_antiderivative(pieces_[ja], 0.0);
    a[0] = value - horner(a, anchor - piece_ref(ja));
    out[ja] = std::move(a);
  }
  // Walk right, matching values at each knot.
  for (int j = ja + 1; j < static_cast<int>(pieces_.size()); ++j) {
    const Real xk = knots_[j - 1];
    const Real left_val = horner(out[j - 1], xk - piece_ref(j - 1));
    Eigen::VectorXd a = poly_antiderivative(pieces_[j], 0.0);
    a[0] = left_val - horner(a, xk - piece_ref(j));
    out[j] = std::move(a);
  }
  // Walk left likewise.
  for (int j = ja - 1; j >= 0; --j) {
    const Real xk = knots_[j];
    const Real right_val = horner(out[j + 1], xk - piece_ref(j + 1));
    Eigen::VectorXd a = poly_antiderivative(pieces_[j], 0.0);
    a[0] = right_val - horner(a, xk - piece_ref(j));
    out[j] = std::move(a);
  }
  return PiecewisePoly(knots_, std::move(out));
}

PiecewisePoly PiecewisePoly::with_knots(const std::vector<Real>& extra) const {
  std::vector<Real> merged = knots_;
  for (Real x : extra) {
    auto it = std::lower_bound(merged.begin(), merged.end(), x);
    if (it != merged.end() && *it == x) continue;
    merged.insert(it, x);
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(merged.size() + 1);
  for (std::size_t j = 0; j <= merged.size(); ++j) {
    const Real probe = j == 0          ? (merged.empty() ? 0.0 : merged[0] - 1.0)
                       : j == merged.size() ? merged.back()
                                            : merged[j - 1];
    const int src = piece_index(probe);
    const Real new_ref = merged.empty() ? 0.0 : (j == 0 ? merged.front() : merged[j - 1]);
    out.push_back(poly_shift(pieces_[src], piece_ref(src), new_ref));
  }
  return PiecewisePoly(std::move(merged), std::move(out));
}

PiecewisePoly PiecewisePoly::operator+(const PiecewisePoly& other) const {
  PiecewisePoly a = with_knots(other.knots_);
  PiecewisePoly b = other.with_knots(knots_);
  std::vector<Eigen::VectorXd> out(a.pieces_.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto& pa = a.pieces_[j];
    const auto& pb = b.pieces_[j];
    Eigen::VectorXd s = Eigen::VectorXd::Zero(std::max(pa.size(), pb.size()));
    s.head(pa.size()) += pa;
    s.head(pb.size()) += pb;
    out[j] = std::move(s);
  }
  return PiecewisePoly(a.knots_, std::move(out));
}

PiecewisePoly PiecewisePoly::operator*(Real scale) const {
  std::vector<Eigen::VectorXd> out = pieces_;
  for (auto& p : out) p *= scale;
  return PiecewisePoly(knots_, std::move(out));
}

namespace {

PiecewisePoly signed_part(const PiecewisePoly& p, bool positive) {
  // Split every piece at its interior roots, then zero out the pieces with
  // the unwanted sign.
  std::vector<Real> splits;
  const auto& knots = p.knots();
  const auto& pieces = p.pieces();
  const Real span = 1.0;
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    const Real lo = j == 0 ? (knots.empty() ? -1e30 : knots.front() - span) : knots[j - 1];
    const Real hi = j == knots.size() ? (knots.empty() ? 1e30 : knots.back() + span) : knots[j];
    // Roots of interior pieces only; the unbounded end pieces keep the sign
    // they have adjacent to the knot range for the use cases here (their
    // roots, if any, still get found because we probe a finite window).
    const Real ref = p.piece_ref(static_cast<int>(j));
    for (Real r : polynomial_roots(pieces[j], lo - ref, hi - ref)) splits.push_back(r + ref);
  }
  PiecewisePoly q = p.with_knots(splits);
  std::vector<Eigen::VectorXd> out = q.pieces();
  const auto& qk = q.knots();
  for (std::size_t j = 0; j < out.size(); ++j) {
    // Probe the sign at the midpoint of the piece.
    Real a = j == 0 ? (qk.empty() ? 0.0 : qk.front() - 1.0) : qk[j - 1];
    Real b = j == qk.size() ? (qk.empty() ? 0.0 : qk.back() + 1.0) : qk[j];
    const Real mid = 0.5 * (a + b);
    const Real v = q.eval(mid);
    const bool keep = positive ? v > 0.0 : v < 0.0;
    if (!keep) out[j] = Eigen::VectorXd::Zero(1);
  }
  return PiecewisePoly(qk, std::move(out));
}

}  // namespace

PiecewisePoly PiecewisePoly::positive_part() const { return signed_part(*this, true); }
PiecewisePoly PiecewisePoly::negative_part() const { return signed_part(*this, false); }

bool PiecewisePoly::is_constant_below(Real x0, Real tol) const {
  const Real v = eval(x0);
  // Structural check on every piece that intersects (-inf, x0].
  for (std::size_t j = 0; j < pieces_.size(); ++j) {
    const Real lo = j == 0 ? -std::numeric_limits<Real>::infinity() : knots_[j - 1];
    if (lo > x0) break;
    const Real hi = j == knots_.size() ? std::numeric_limits<Real>::infinity() : knots_[j];
    (void)hi;
    const auto& c = pieces_[j];
    if (std::abs(c[0] - v) > tol * (1.0 + std::abs(v))) return false;
    for (int i = 1; i < c.size(); ++i) {
      // Higher coefficients must vanish unless the piece only touches x0 at
      // its left endpoint.
      if (lo >= x0) break;
      if (std::abs(c[i]) > tol) return false;
    }
  }
  return true;
}

std::vector<Real> polynomial_roots(const Eigen::VectorXd& coeffs, Real lo, Real hi) {
  std::vector<Real> out;
  const Real scale = coeffs.cwiseAbs().maxCoeff();
  if (scale == 0.0) return out;  // identically zero: no sign change
  const int deg = true_degree(coeffs, 1e-14 * scale);
  if (deg == 0) return out;
  if (deg == 1) {
    const Real r = -coeffs[0] / coeffs[1];
    if (r > lo && r < hi) out.push_back(r);
    return out;
  }
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -coeffs[i] / coeffs[deg];
  companion.block(1, 0, deg - 1, deg - 1).setIdentity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
  const Real imag_tol = 1e-9 * std::max(1.0, std::abs(hi - lo));
  for (int i = 0; i < deg; ++i) {
    const auto ev = es.eigenvalues()[i];
    if (std::abs(ev.imag()) > imag_tol) continue;
    const Real r = ev.real();
    if (r <= lo || r >= hi) continue;
    bool dup = false;
    for (Real q : out)
      if (std::abs(q - r) < 1e-12 * std::max(1.0, std::abs(r))) dup = true;
    if (!dup) out.push_back(r);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void PiecewisePoly::normalize() {}

}  // namespace pfdam
