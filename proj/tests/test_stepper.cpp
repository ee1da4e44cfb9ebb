#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "pfdam/stepper.hpp"

using namespace pfdam;

namespace {

const Real kPi = std::acos(-1.0);

PiecewisePoly monomial(int degree, double scale = 1.0) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(degree + 1);
  c[degree] = scale;
  return PiecewisePoly(c);
}

PiecewisePoly shifted_square(double base) {  // base + x^2
  Eigen::VectorXd c(3);
  c << base, 0.0, 1.0;
  return PiecewisePoly(c);
}

PiecewisePoly smooth_hump() {  // 3x^2 - 2x^3, zero slope at 0
  Eigen::VectorXd c(4);
  c << 0.0, 0.0, 3.0, -2.0;
  return PiecewisePoly(c);
}

MaterialLaw quadratic_material(int dim, PiecewisePoly f) {
  return MaterialLaw(extend_coefficient(monomial(2), 1.0), std::move(f),
                     PiecewisePoly::constant(1.0), StiffnessTensor::isotropic(dim, 1.0, 1.0),
                     1.0);
}

State flat_state(const Grid& g, double chi0) {
  State s;
  const Eigen::Index n = g.node_count();
  s.u = FieldVector::Zero(n * g.dim());
  s.u_prev = s.u;
  s.v = s.u;
  s.chi = FieldScalar::Constant(n, chi0);
  s.chi_prev = s.chi;
  s.xi = FieldScalar::Zero(n);
  return s;
}

// Bisection root of a strictly increasing function; the independent check
// for the spatially homogeneous damage step.
template <typename F>
Real bisect_root(F f, Real lo, Real hi) {
  Real flo = f(lo);
  REQUIRE(flo < 0.0);
  REQUIRE(f(hi) > 0.0);
  for (int i = 0; i < 200; ++i) {
    const Real mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

FieldScalar nodal_scalar(const Grid& g, const std::function<Real(Real, Real)>& f) {
  FieldScalar out(g.node_count());
  for (int i = 0; i < g.node_count(); ++i) {
    const auto p = g.node_coord(i);
    out[i] = f(p[0], p[1]);
  }
  return out;
}

}  // namespace

TEST_CASE("damage step holds a stationary flat state") {
  Grid g = Grid::rectangle(1.0, 0.75, 4, 3);
  MaterialLaw m = quadratic_material(2, PiecewisePoly::constant(0.0));
  State s = flat_state(g, 0.7);
  StepConfig cfg;
  cfg.tau = 0.1;

  DamageResult r = damage_step(s, m, Penalty::moreau_yosida(1e-2), g, cfg);
  CHECK(r.iterations == 0);
  CHECK((r.chi.array() - 0.7).abs().maxCoeff() == 0.0);
  CHECK(r.xi.norm() == 0.0);
  CHECK(r.residual <= 1e-12);
}

TEST_CASE("homogeneous damage step matches a scalar bisection oracle") {
  // 1D ramp with slope 1/sqrt(C) so C eps:eps = 1 at every quadrature point;
  // every node then solves r + xi_beta(r) + chi = 0 with r = (chi - 0.5)/tau.
  Grid g = Grid::interval(1.0, 8);
  MaterialLaw m = quadratic_material(1, PiecewisePoly::constant(0.0));
  const Real slope = 1.0 / std::sqrt(3.0);
  State s = flat_state(g, 0.5);
  s.u = nodal_scalar(g, [&](Real x, Real) { return slope * x; });
  s.u_prev = s.u;

  StepConfig cfg;
  cfg.tau = 0.1;
  Penalty pen = Penalty::moreau_yosida(0.2);
  cfg.beta = pen;

  const Real root = bisect_root(
      [&](Real chi) {
        const Real rate = (chi - 0.5) / cfg.tau;
        return rate + penalty_slope(pen, rate) + chi;
      },
      0.5 - 10.0, 0.5 + 10.0);
  CHECK(root == doctest::Approx(5.0 / 11.0).epsilon(1e-12));

  DamageResult r = damage_step(s, m, pen, g, cfg);
  CHECK((r.chi.array() - root).abs().maxCoeff() <= 1e-10);
  CHECK(r.xi.norm() == 0.0);  // rate is negative, feasible side

  // Minimization property: the functional never increases from the start.
  const Real f_prev = damage_functional(s, m, pen, g, cfg.tau, s.chi);
  const Real f_now = damage_functional(s, m, pen, g, cfg.tau, r.chi);
  CHECK(f_now <= f_prev + 1e-12 * (1.0 + std::abs(f_prev)));
}

TEST_CASE("penalty beta controls the healing overshoot") {
  Grid g = Grid::interval(1.0, 6);
  MaterialLaw m = quadratic_material(1, quadratic_well(1.0));
  StepConfig cfg;
  cfg.tau = 0.1;

  Real prev_over = std::numeric_limits<Real>::infinity();
  for (const Real beta : {1e-1, 1e-3, 1e-5}) {
    Penalty pen = Penalty::moreau_yosida(beta);
    cfg.beta = pen;
    State s = flat_state(g, 0.5);
    DamageResult r = damage_step(s, m, pen, g, cfg);

    const Real over = (r.chi.array() - 0.5).max(0.0).maxCoeff();
    CHECK(over > 0.0);
    CHECK(over < prev_over);
    prev_over = over;

    const Real root = bisect_root(
        [&](Real chi) {
          const Real rate = (chi - 0.5) / cfg.tau;
          return rate + penalty_slope(pen, rate) + (chi - 1.0);
        },
        0.5 - 10.0, 0.5 + 10.0);
    CHECK((r.chi.array() - root).abs().maxCoeff() <= 1e-10);
    CHECK(r.xi.minCoeff() >= 0.0);
    CHECK(r.xi.maxCoeff() > 0.0);  // constraint active while healing
  }
  CHECK(prev_over <= 1e-5);
}

TEST_CASE("elasticity step returns zero for zero data") {
  Grid g = Grid::rectangle(1.0, 1.0, 3, 3);
  MaterialLaw m = quadratic_material(2, quadratic_well(1.0));
  State s = flat_state(g, 0.6);
  StepConfig cfg;
  cfg.tau = 0.05;

  FieldVector u = elasticity_step(s, m, g, zero_boundary(g), FieldVector(), cfg);
  CHECK(u.norm() == 0.0);
}

TEST_CASE("steady pull matches a fine-grid bar oracle") {
  // Balanced end tractions (+g right, -g left; a one-sided pull has no
  // steady state under pure Neumann data).  Viscosity damps the transient;
  // the limit strain is g/C uniform.
  Grid g = Grid::interval(1.0, 16);
  MaterialLaw m = MaterialLaw(extend_coefficient(PiecewisePoly::constant(1.0), 1.0),
                              PiecewisePoly::constant(0.0), PiecewisePoly::constant(1.0),
                              StiffnessTensor::isotropic(1, 1.0, 1.0), 1.0);
  const Real gpull = 0.3;

  Forcing forcing;
  forcing.traction = [&g, gpull](Real) {
    FieldVector b = FieldVector::Zero(g.node_count());
    b[0] = -gpull;
    b[g.node_count() - 1] = gpull;
    return boundary_everywhere(g, b);
  };

  InitialData init;
  init.u0 = FieldVector::Zero(g.node_count());
  init.v0 = init.u0;
  init.chi0 = FieldScalar::Constant(g.node_count(), 1.0);

  StepConfig cfg;
  cfg.tau = 0.05;
  cfg.T = 25.0;
  Trajectory tr = run(init, forcing, m, g, cfg);
  REQUIRE(tr.complete());
  CHECK(tr.v_level(tr.steps).cwiseAbs().maxCoeff() <= 1e-8);  // stationary

  // Independent two-point BVP oracle at 10x resolution: hand-assembled
  // tridiagonal stiffness, point tractions, one pinned node.
  const int nf = 161;
  const Real hf = 1.0 / (nf - 1), Cmod = 3.0;
  Eigen::MatrixXd Kf = Eigen::MatrixXd::Zero(nf, nf);
  for (int e = 0; e + 1 < nf; ++e) {
    Kf(e, e) += Cmod / hf;
    Kf(e + 1, e + 1) += Cmod / hf;
    Kf(e, e + 1) -= Cmod / hf;
    Kf(e + 1, e) -= Cmod / hf;
  }
  Eigen::VectorXd Lf = Eigen::VectorXd::Zero(nf);
  Lf[0] = -gpull;
  Lf[nf - 1] = gpull;
  Kf.row(0).setZero();
  Kf(0, 0) = 1.0;
  Lf[0] = 0.0;
  Eigen::VectorXd uf = Kf.partialPivLu().solve(Lf);

  Real eps_oracle = 0.0;
  for (int j = 0; j + 1 < nf; ++j) {
    const Real e = (uf[j + 1] - uf[j]) / hf;
    if (j == 0)
      eps_oracle = e;
    else
      CHECK(std::abs(e - eps_oracle) <= 1e-9);  // oracle strain is uniform
  }
  CHECK(eps_oracle == doctest::Approx(gpull / Cmod).epsilon(1e-10));

  auto eps = strain_at_quadrature(g, tr.u_level(tr.steps));
  for (const auto& e : eps) CHECK(std::abs(e[0] - eps_oracle) <= 1e-6);
}

TEST_CASE("mirroring the traction mirrors the solution") {
  Grid g = Grid::rectangle(1.0, 0.75, 4, 3);
  MaterialLaw m(extend_coefficient(monomial(2), 1.0), quadratic_well(1.0),
                PiecewisePoly::constant(1.0), StiffnessTensor::isotropic(2, 1.0, 1.0), 0.5);
  const int n = g.node_count();

  auto edge_traction = [&](int side) {
    // x-component flips with the side, y-component does not.
    const Real sign = side == 1 ? 1.0 : -1.0;
    const Real edge_x = side == 1 ? 1.0 : 0.0;
    auto facets = edge_facets(g, 0, side);
    return [&g, facets, sign, edge_x](Real) {
      FieldVector b = FieldVector::Zero(2 * g.node_count());
      for (int i = 0; i < g.node_count(); ++i) {
        const auto p = g.node_coord(i);
        if (std::abs(p[0] - edge_x) > 1e-12) continue;
        b[2 * i] = sign * (0.4 + 0.1 * p[1]);
        b[2 * i + 1] = 0.2 - 0.3 * p[1];
      }
      return BoundaryField{b, facets};
    };
  };

  InitialData init;
  init.u0 = FieldVector::Zero(2 * n);
  init.v0 = init.u0;
  init.chi0 = FieldScalar::Constant(n, 0.9);

  StepConfig cfg;
  cfg.tau = 0.05;
  cfg.T = 0.15;
  cfg.beta = Penalty::moreau_yosida(1e-2);
  cfg.newton_tol = 1e-12;

  Forcing fa, fb;
  fa.traction = edge_traction(1);
  fb.traction = edge_traction(-1);
  Trajectory ta = run(init, fa, m, g, cfg);
  Trajectory tb = run(init, fb, m, g, cfg);
  REQUIRE(ta.complete());
  REQUIRE(tb.complete());

  const FieldVector& ua = ta.u_level(ta.steps);
  const FieldVector& ub = tb.u_level(tb.steps);
  const FieldScalar& ca = ta.chi[ta.steps];
  const FieldScalar& cb = tb.chi[tb.steps];
  CHECK(ua.cwiseAbs().maxCoeff() > 1e-5);  // forcing actually moved something

  for (int i = 0; i < n; ++i) {
    const auto p = g.node_coord(i);
    int j = -1;
    for (int cand = 0; cand < n; ++cand) {
      const auto q = g.node_coord(cand);
      if (std::abs(q[0] - (1.0 - p[0])) < 1e-12 && std::abs(q[1] - p[1]) < 1e-12) j = cand;
    }
    REQUIRE(j >= 0);
    CHECK(std::abs(ub[2 * j] + ua[2 * i]) <= 1e-12);
    CHECK(std::abs(ub[2 * j + 1] - ua[2 * i + 1]) <= 1e-12);
    CHECK(std::abs(cb[j] - ca[i]) <= 1e-12);
  }
}

TEST_CASE("advance keeps an equilibrium zero state at zero") {
  Grid g = Grid::interval(1.0, 5);
  MaterialLaw m = quadratic_material(1, quadratic_well(0.0));  // f'(0) = 0
  State s = flat_state(g, 0.0);
  StepConfig cfg;
  cfg.tau = 0.1;

  for (int k = 0; k < 3; ++k) {
    s = advance(s, m, g, zero_boundary(g), FieldVector(), cfg);
    CHECK(s.u.norm() == 0.0);
    CHECK(s.v.norm() == 0.0);
    CHECK(s.chi.norm() == 0.0);
    CHECK(s.xi.norm() == 0.0);
  }
  CHECK(s.k == 3);
}

TEST_CASE("advance composes the damage and displacement sub-steps") {
  Grid g = Grid::rectangle(1.0, 0.8, 3, 2);
  Eigen::VectorXd dcoef(2);
  dcoef << 2.0, 0.1;  // nonconstant viscous degradation
  MaterialLaw m(extend_coefficient(monomial(2), 1.0), quadratic_well(1.0),
                PiecewisePoly(dcoef), StiffnessTensor::isotropic(2, 1.0, 1.0), 0.7);
  const int n = g.node_count();

  StepConfig cfg;
  cfg.tau = 0.05;
  cfg.beta = Penalty::moreau_yosida(1e-2);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<Real> small(-0.01, 0.01);
  State s;
  s.k = 3;
  s.t = 3 * cfg.tau;
  s.u = FieldVector::NullaryExpr(2 * n, [&](Eigen::Index) { return small(rng); });
  s.u_prev = FieldVector::NullaryExpr(2 * n, [&](Eigen::Index) { return small(rng); });
  s.v = (s.u - s.u_prev) / cfg.tau;
  s.chi = nodal_scalar(g, [](Real x, Real y) { return 0.7 + 0.05 * std::sin(2.0 * x + y); });
  s.chi_prev = s.chi;
  s.xi = FieldScalar::Zero(n);

  FieldVector bn = FieldVector::Zero(2 * n);
  for (int i = 0; i < n; ++i) {
    if (std::abs(g.node_coord(i)[0] - 1.0) > 1e-12) continue;
    bn[2 * i] = 0.2;
    bn[2 * i + 1] = 0.1;
  }
  BoundaryField b{bn, edge_facets(g, 0, 1)};
  FieldVector ell = FieldVector::Zero(2 * n);
  for (int i = 0; i < n; ++i) ell[2 * i] = 0.05;

  State adv = advance(s, m, g, b, ell, cfg);

  DamageResult dmg = damage_step(s, m, cfg.beta, g, cfg);
  State mid = s;
  mid.chi_prev = s.chi;
  mid.chi = dmg.chi;
  mid.xi = dmg.xi;
  FieldVector u2 = elasticity_step(mid, m, g, b, ell, cfg);

  CHECK((adv.chi - dmg.chi).norm() == 0.0);
  CHECK((adv.xi - dmg.xi).norm() == 0.0);
  CHECK((adv.u - u2).norm() == 0.0);
  CHECK((adv.v - (u2 - s.u) / cfg.tau).norm() == 0.0);
  CHECK(adv.k == 4);
}

TEST_CASE("terminal error halves with the time step") {
  Grid g = Grid::interval(1.0, 8);
  MaterialLaw m = quadratic_material(1, quadratic_well(1.0, 0.5));
  const int n = g.node_count();

  Forcing forcing;
  forcing.traction = [&g](Real t) {
    FieldVector b = FieldVector::Zero(g.node_count());
    const Real gm = 0.3 * std::sin(kPi * t);
    b[0] = -gm;
    b[g.node_count() - 1] = gm;
    return boundary_everywhere(g, b);
  };

  InitialData init;
  init.u0 = FieldVector::Zero(n);
  init.v0 = init.u0;
  init.chi0 = FieldScalar::Constant(n, 0.9);

  SparseMat Ms = assemble_mass(g, 1);
  auto terminal = [&](Real tau) {
    StepConfig cfg;
    cfg.tau = tau;
    cfg.T = 0.4;
    cfg.beta = Penalty::moreau_yosida(1e-2);
    Trajectory tr = run(init, forcing, m, g, cfg);
    REQUIRE(tr.complete());
    return std::make_pair(tr.u_level(tr.steps), tr.chi[tr.steps]);
  };

  const auto ref = terminal(1.0 / 160.0);
  auto err = [&](Real tau) {
    const auto sol = terminal(tau);
    FieldVector du = sol.first - ref.first;
    FieldScalar dc = sol.second - ref.second;
    return std::sqrt(du.dot(Ms * du) + dc.dot(Ms * dc));
  };

  const Real e1 = err(1.0 / 10.0), e2 = err(1.0 / 20.0), e3 = err(1.0 / 40.0);
  CHECK(e1 > e2);
  CHECK(e2 > e3);
  const Real r12 = e1 / e2, r23 = e2 / e3;
  CHECK(r12 >= 1.6);
  CHECK(r12 <= 2.6);
  CHECK(r23 >= 1.6);
  CHECK(r23 <= 2.6);
}

TEST_CASE("time interpolants hit grid levels and blend linearly") {
  Grid g = Grid::interval(1.0, 4);
  MaterialLaw m = quadratic_material(1, quadratic_well(1.0));
  const int n = g.node_count();

  Forcing forcing;
  forcing.traction = [&g](Real t) {
    FieldVector b = FieldVector::Zero(g.node_count());
    b[0] = -0.4 * t;
    b[g.node_count() - 1] = 0.4 * t;
    return boundary_everywhere(g, b);
  };

  InitialData init;
  init.u0 = FieldVector::Zero(n);
  init.v0 = FieldVector::Constant(n, 0.1);
  init.chi0 = FieldScalar::Constant(n, 0.8);

  StepConfig cfg;
  cfg.tau = 0.1;
  cfg.T = 0.4;
  std::ostringstream csv;
  Trajectory tr = run(init, forcing, m, g, cfg, &csv);
  REQUIRE(tr.complete());
  REQUIRE(tr.steps == 4);

  // Levels differ, otherwise the interpolation checks are vacuous.
  CHECK((tr.chi[2] - tr.chi[3]).norm() > 0.0);
  CHECK((tr.u_level(2) - tr.u_level(3)).norm() > 0.0);

  for (int k = 0; k <= 4; ++k) {
    const Real t = 0.1 * k;
    for (auto kind : {Interp::right_constant, Interp::left_constant, Interp::linear}) {
      CHECK((tr.chi_at(t, kind) - tr.chi[k]).norm() == 0.0);
      CHECK((tr.u_at(t, kind) - tr.u_level(k)).norm() == 0.0);
    }
  }

  // Strictly inside ((k-1) tau, k tau] the right-constant interpolant holds
  // level k, the left-constant one level k-1.
  for (const Real t : {0.21, 0.25, 0.29999}) {
    CHECK((tr.chi_at(t, Interp::right_constant) - tr.chi[3]).norm() == 0.0);
    CHECK((tr.chi_at(t, Interp::left_constant) - tr.chi[2]).norm() == 0.0);
  }
  FieldScalar mid = 0.5 * (tr.chi[2] + tr.chi[3]);
  CHECK((tr.chi_at(0.25, Interp::linear) - mid).norm() == 0.0);
  FieldVector umid = 0.5 * (tr.u_level(2) + tr.u_level(3));
  CHECK((tr.u_at(0.25, Interp::linear) - umid).norm() == 0.0);

  // Clamped outside [0, T]; v_level(0) recovers the initial velocity.
  CHECK((tr.chi_at(-0.3, Interp::linear) - tr.chi[0]).norm() == 0.0);
  CHECK((tr.chi_at(9.0, Interp::right_constant) - tr.chi[4]).norm() == 0.0);
  CHECK((tr.v_level(0) - init.v0).norm() <= 1e-15);

  // CSV: pinned header, one row per level.
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line ==
        "k,t,kinetic,elastic,gradient,potential,dissipation_increment,penalty_mass,"
        "free_energy,slack");
  int rows = 0;
  while (std::getline(lines, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("energy audit certifies pure dissipation without input") {
  // Constant coupling and chi at the potential minimum: damage is exactly
  // stationary, displacement oscillates and decays viscously.
  Grid g = Grid::interval(1.0, 10);
  MaterialLaw m(extend_coefficient(PiecewisePoly::constant(1.0), 1.0), quadratic_well(1.0),
                PiecewisePoly::constant(1.0), StiffnessTensor::isotropic(1, 1.0, 1.0), 1.0);
  const int n = g.node_count();

  InitialData init;
  init.u0 = nodal_scalar(g, [](Real x, Real) { return 0.05 * std::sin(2.0 * kPi * x); });
  init.v0 = FieldVector::Zero(n);
  init.chi0 = FieldScalar::Constant(n, 1.0);

  StepConfig cfg;
  cfg.tau = 0.02;
  cfg.T = 1.0;
  Forcing none;
  Trajectory tr = run(init, none, m, g, cfg);
  REQUIRE(tr.complete());
  CHECK((tr.chi[tr.steps].array() - 1.0).abs().maxCoeff() == 0.0);

  EnergyAudit audit = energy_audit(tr, m, g, none);
  CHECK(audit.all_ok);
  REQUIRE(static_cast<int>(audit.rows.size()) == tr.steps);
  for (const auto& row : audit.rows) {
    CHECK(row.kinetic_slack >= 0.0);
    CHECK(row.elastic_slack >= 0.0);
    CHECK(row.gradient_slack >= 0.0);
    CHECK(row.f_slack >= -1e-12);
    CHECK(row.cc_slack == 0.0);  // c is constant: the splitting is exact
  }
  for (int k = 1; k <= tr.steps; ++k) {
    const Real e_prev = tr.energy[k - 1].kinetic + tr.energy[k - 1].free_energy;
    const Real e_now = tr.energy[k].kinetic + tr.energy[k].free_energy;
    CHECK(e_now <= e_prev + 1e-9 * (1.0 + std::abs(e_prev)));
    CHECK(tr.energy[k].dissipation_increment >= 0.0);
    CHECK(tr.energy[k].penalty_mass == 0.0);
    CHECK(tr.energy[k].free_energy ==
          tr.energy[k].elastic + tr.energy[k].gradient + tr.energy[k].potential);
  }
  // Something actually moved, otherwise the audit is vacuous.
  CHECK(tr.energy[0].free_energy > 1e-4);
  CHECK(tr.energy[tr.steps].kinetic + tr.energy[tr.steps].free_energy <
        tr.energy[0].kinetic + tr.energy[0].free_energy);
}

TEST_CASE("energy audit slack stays nonnegative under active damage") {
  Grid g = Grid::rectangle(1.0, 1.0, 16, 16);
  MaterialLaw m = quadratic_material(2, quadratic_well(1.0));
  const int n = g.node_count();

  auto right = edge_facets(g, 0, 1);
  Forcing forcing;
  forcing.traction = [&g, right](Real t) {
    FieldVector b = FieldVector::Zero(2 * g.node_count());
    const Real gm = 2.0 * std::sin(2.0 * kPi * t);
    for (int i = 0; i < g.node_count(); ++i)
      if (std::abs(g.node_coord(i)[0] - 1.0) <= 1e-12) b[2 * i] = gm;
    return BoundaryField{b, right};
  };

  InitialData init;
  init.u0 = FieldVector::Zero(2 * n);
  init.v0 = init.u0;
  init.chi0 = FieldScalar::Constant(n, 1.0);

  StepConfig cfg;
  cfg.tau = 0.02;
  cfg.T = 1.0;
  cfg.beta = Penalty::moreau_yosida(1e-3);
  Trajectory tr = run(init, forcing, m, g, cfg);
  REQUIRE(tr.complete());

  Real chi_min = 1.0;
  for (const auto& c : tr.chi) chi_min = std::min(chi_min, c.minCoeff());
  CHECK(chi_min < 0.995);  // the load actually damages the material

  EnergyAudit audit = energy_audit(tr, m, g, forcing);
  CHECK(audit.all_ok);
  CHECK(audit.worst_violation == 0.0);
  REQUIRE(static_cast<int>(audit.rows.size()) == tr.steps);
  for (const auto& row : audit.rows) {
    CHECK(row.slack >= -1e-12);
    CHECK(row.kinetic_slack >= 0.0);
    CHECK(row.elastic_slack >= 0.0);
    CHECK(row.cc_slack >= -1e-12);
    CHECK(row.gradient_slack >= 0.0);
    CHECK(row.f_slack >= -1e-12);
  }
  for (int k = 0; k <= tr.steps; ++k) {
    CHECK(tr.xi[k].minCoeff() >= 0.0);
    if (k > 0) CHECK(tr.energy[k].dissipation_increment >= 0.0);
  }

  // Complementarity of (rate, xi) against the run-wide largest rate; the
  // bound tightens as beta shrinks.
  Real max_rate = 0.0;
  for (int k = 1; k <= tr.steps; ++k)
    max_rate = std::max(max_rate, ((tr.chi[k] - tr.chi[k - 1]) / tr.tau).cwiseAbs().maxCoeff());
  Real worst = 0.0;
  for (int k = 1; k <= tr.steps; ++k) {
    FieldScalar rate = (tr.chi[k] - tr.chi[k - 1]) / tr.tau;
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, subgradient_residual(rate[i], tr.xi[k][i]));
  }
  CHECK(worst <= 2.0 * cfg.beta.beta * max_rate);
}

TEST_CASE("damage functional gradient matches central differences") {
  // Cubic coupling so the third derivative is nonzero and the quadratic
  // finite-difference error is visible; rates kept away from the penalty
  // kink at zero.
  Grid g = Grid::interval(1.0, 8);
  MaterialLaw m(extend_coefficient(smooth_hump(), 1.0), quadratic_well(1.0),
                PiecewisePoly::constant(1.0), StiffnessTensor::isotropic(1, 1.0, 1.0), 1.0);
  Penalty pen = Penalty::moreau_yosida(0.05);
  const Real tau = 0.1;

  State s = flat_state(g, 0.2);
  s.u = nodal_scalar(g, [](Real x, Real) { return 0.8 * x; });
  s.u_prev = s.u;
  s.chi = nodal_scalar(g, [](Real x, Real) { return 0.2 + 0.05 * std::sin(2.0 * kPi * x); });

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<Real> unif(0.0, 1.0);
  FieldScalar x = s.chi;
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += tau * (0.3 + 0.5 * unif(rng));

  FieldScalar grad = damage_functional_gradient(s, m, pen, g, tau, x);
  auto value = [&](const FieldScalar& y) { return damage_functional(s, m, pen, g, tau, y); };

  for (int trial = 0; trial < 10; ++trial) {
    FieldScalar d(x.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = 2.0 * unif(rng) - 1.0;
    d /= d.cwiseAbs().maxCoeff();
    const Real exact = grad.dot(d);

    auto fd_error = [&](Real h) {
      const Real fd = (value(x + h * d) - value(x - h * d)) / (2.0 * h);
      return std::abs(fd - exact);
    };
    const Real e1 = fd_error(1e-3);
    const Real e2 = fd_error(5e-4);
    CHECK(e1 <= 1e-3 * (1.0 + std::abs(exact)));
    CHECK(e2 <= 0.35 * e1 + 1e-12 * (1.0 + std::abs(exact)));
  }

  // The solver's minimizer does not increase the functional.
  StepConfig cfg;
  cfg.tau = tau;
  cfg.beta = pen;
  DamageResult dmg = damage_step(s, m, pen, g, cfg);
  CHECK(dmg.residual <= cfg.newton_tol);
  CHECK(value(dmg.chi) <= value(s.chi) + 1e-12 * (1.0 + std::abs(value(s.chi))));
}

TEST_CASE("truncation maps nodal values and reports zero deltas") {
  // Hand-built two-node trajectory pinning the map {-0.2, 0.5} -> {0, 0.5}.
  Grid g = Grid::interval(1.0, 1);
  MaterialLaw m(extend_coefficient(shifted_square(0.2), 1.0), quadratic_well(1.0),
                PiecewisePoly::constant(1.0), StiffnessTensor::isotropic(1, 1.0, 1.0), 1.0);
  REQUIRE(m.truncation_safe());

  Trajectory tr;
  tr.tau = 1.0;
  tr.steps = 1;
  tr.u_stride = 1;
  FieldScalar c0(2), c1(2);
  c0 << 0.3, 0.5;
  c1 << -0.2, 0.5;
  tr.chi = {c0, c1};
  tr.xi = {FieldScalar::Zero(2), FieldScalar::Zero(2)};
  tr.u = {FieldVector::Zero(2), FieldVector::Zero(2)};
  tr.u_minus1 = FieldVector::Zero(2);

  Forcing none;
  TruncationReport rep = truncate_chi(tr, m, g, none);
  REQUIRE(rep.chi_plus.size() == 2);
  CHECK(rep.chi_plus[0][0] == 0.3);
  CHECK(rep.chi_plus[0][1] == 0.5);
  CHECK(rep.chi_plus[1][0] == 0.0);
  CHECK(rep.chi_plus[1][1] == 0.5);
  CHECK(rep.max_elasticity_delta == 0.0);
  CHECK(rep.max_damage_delta == 0.0);
  // The single cell holds a negative quadrature value, so no damage row has
  // an all-positive patch at both levels.
  CHECK(rep.compared_rows == 0);
}

TEST_CASE("truncation leaves both equations invariant on a real run") {
  Grid g = Grid::interval(1.0, 12);
  // Coupling constant below zero with value 0.2, so the material stays
  // coercive while the potential drags chi negative.
  MaterialLaw m(extend_coefficient(shifted_square(0.2), 1.0), quadratic_well(-0.5),
                PiecewisePoly::constant(1.0), StiffnessTensor::isotropic(1, 1.0, 1.0), 1.0);
  REQUIRE(m.truncation_safe());
  const int n = g.node_count();

  Forcing forcing;
  forcing.traction = [&g](Real t) {
    FieldVector b = FieldVector::Zero(g.node_count());
    const Real gm = 0.15 * std::sin(2.0 * kPi * t);
    b[0] = -gm;
    b[g.node_count() - 1] = gm;
    return boundary_everywhere(g, b);
  };

  InitialData init;
  init.u0 = FieldVector::Zero(n);
  init.v0 = init.u0;
  init.chi0 = FieldScalar::Constant(n, 0.3);

  StepConfig cfg;
  cfg.tau = 0.05;
  cfg.T = 1.0;
  Trajectory tr = run(init, forcing, m, g, cfg);
  REQUIRE(tr.complete());

  Real chi_min = 1.0;
  for (const auto& c : tr.chi) chi_min = std::min(chi_min, c.minCoeff());
  CHECK(chi_min < -0.1);  // truncation is actually exercised

  TruncationReport rep = truncate_chi(tr, m, g, forcing);
  CHECK(rep.max_elasticity_delta <= 1e-12);
  CHECK(rep.max_damage_delta <= 1e-12);
  CHECK(rep.compared_rows > 0);
  for (int k = 0; k <= tr.steps; ++k)
    for (int i = 0; i < n; ++i)
      CHECK(rep.chi_plus[k][i] == std::max(tr.chi[k][i], 0.0));

  // A viscous coupling that varies below zero is rejected.
  Eigen::VectorXd dvar(2);
  dvar << 2.0, 0.1;
  MaterialLaw mvar(extend_coefficient(shifted_square(0.2), 1.0), quadratic_well(-0.5),
                   PiecewisePoly(dvar), StiffnessTensor::isotropic(1, 1.0, 1.0), 1.0);
  CHECK(!mvar.truncation_safe());
  CHECK_THROWS_AS(truncate_chi(tr, mvar, g, forcing), std::invalid_argument);
}

TEST_CASE("solver failures surface as markers, bad configs throw") {
  Grid g = Grid::interval(1.0, 6);
  MaterialLaw m = quadratic_material(1, quadratic_well(1.0));
  const int n = g.node_count();

  StepConfig cfg;
  cfg.tau = 0.1;
  cfg.T = 0.3;
  cfg.beta = Penalty::moreau_yosida(1e-5);
  cfg.newton_tol = 1e-16;  // unreachable
  cfg.newton_max_iter = 1;

  State s = flat_state(g, 0.5);
  try {
    damage_step(s, m, cfg.beta, g, cfg);
    FAIL("expected a damage solve failure");
  } catch (const NewtonFailure& nf) {
    CHECK(nf.residual > 0.0);
  }

  InitialData init;
  init.u0 = FieldVector::Zero(n);
  init.v0 = init.u0;
  init.chi0 = FieldScalar::Constant(n, 0.5);
  Forcing none;
  Trajectory tr = run(init, none, m, g, cfg);
  CHECK(!tr.complete());
  CHECK(tr.failed_at == 1);
  CHECK(tr.chi.size() == 1);
  CHECK(tr.energy.size() == 1);
  CHECK(!tr.failure.empty());

  StepConfig bad = cfg;
  bad.tau = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.beta = Penalty{0.0, Penalty::Kind::moreau_yosida};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.T = 0.01;  // shorter than one step
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.u_stride = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  // Initial damage with a nonzero boundary normal derivative is rejected.
  StepConfig ok;
  ok.tau = 0.1;
  ok.T = 0.3;
  InitialData sloped = init;
  sloped.chi0 = nodal_scalar(g, [](Real x, Real) { return 0.2 + 0.5 * x; });
  CHECK_THROWS_AS(run(sloped, none, m, g, ok), std::invalid_argument);
}
