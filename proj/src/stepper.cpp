#include "pfdam/stepper.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <ostream>

#include "pfdam/util.hpp"

namespace pfdam {

namespace {

using Chol = Eigen::SimplicialLDLT<SparseMat>;

std::vector<Real> strain_energy_density(const Grid& grid, const StiffnessTensor& C,
                                        const FieldVector& u) {
  auto eps = strain_at_quadrature(grid, u);
  std::vector<Real> W(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) W[i] = C.energy(eps[i]);
  return W;
}

/// The damage functional of one step at fixed previous level, with its
/// Euler-Lagrange residual and generalized Hessian.  All nonlinear
/// compositions are evaluated at quadrature points of the interpolated
/// field; the energy-balance audit relies on exactly this convention.
struct DamageProblem {
  const Grid& grid;
  const MaterialLaw& m;
  Penalty beta;
  Real tau;
  const FieldScalar& chi_prev;
  std::vector<Real> chi_prev_qp;
  std::vector<Real> c2p_prev_qp;
  std::vector<Real> W;  // C eps(u_prev) : eps(u_prev), per quadrature point
  SparseMat A, M, MA;
  Chol ma;

  DamageProblem(const Grid& g, const MaterialLaw& mat, const Penalty& b, Real tau_,
                const FieldScalar& chi_prev_, const FieldVector& u_prev)
      : grid(g), m(mat), beta(b), tau(tau_), chi_prev(chi_prev_) {
    chi_prev_qp = field_at_quadrature(grid, chi_prev);
    c2p_prev_qp.resize(chi_prev_qp.size());
    for (std::size_t i = 0; i < chi_prev_qp.size(); ++i)
      c2p_prev_qp[i] = m.c2_prime(chi_prev_qp[i]);
    W = strain_energy_density(grid, m.stiffness(), u_prev);
    A = assemble_scalar_laplace(grid);
    M = assemble_mass(grid, 1);
    MA = M + A;
    ma.compute(MA);
    if (ma.info() != Eigen::Success)
      throw std::runtime_error("damage_step: mass+laplace factorization failed");
  }

  Real value(const FieldScalar& x) const {
    FieldScalar r = (x - chi_prev) / tau;
    const Real quad = 0.5 * x.dot(A * x) + 0.5 * tau * r.dot(MA * r);
    auto xq = field_at_quadrature(grid, x);
    std::vector<Real> s(xq.size());
    for (std::size_t i = 0; i < xq.size(); ++i) {
      const Real rq = (xq[i] - chi_prev_qp[i]) / tau;
      s[i] = 0.5 * m.c1(xq[i]) * W[i] + 0.5 * c2p_prev_qp[i] * xq[i] * W[i] + m.f(xq[i]) +
             tau * penalty_value(beta, rq);
    }
    return quad + quadrature_integral(grid, s);
  }

  FieldScalar residual(const FieldScalar& x) const {
    FieldScalar r = (x - chi_prev) / tau;
    auto xq = field_at_quadrature(grid, x);
    std::vector<Real> s(xq.size());
    for (std::size_t i = 0; i < xq.size(); ++i) {
      const Real rq = (xq[i] - chi_prev_qp[i]) / tau;
      s[i] = 0.5 * (m.c1_prime(xq[i]) + c2p_prev_qp[i]) * W[i] + m.f_prime(xq[i]) +
             penalty_slope(beta, rq);
    }
    return A * x + MA * r + assemble_scalar_load(grid, s);
  }

  SparseMat hessian(const FieldScalar& x) const {
    auto xq = field_at_quadrature(grid, x);
    std::vector<Real> h(xq.size());
    for (std::size_t i = 0; i < xq.size(); ++i) {
      const Real rq = (xq[i] - chi_prev_qp[i]) / tau;
      h[i] = 0.5 * m.c1_second(xq[i]) * W[i] + m.f_second(xq[i]) +
             penalty_curvature(beta, rq) / tau;
    }
    return A + SparseMat((1.0 / tau) * MA) + assemble_weighted_mass(grid, h);
  }

  Real dual_norm(const FieldScalar& g) const { return std::sqrt(g.dot(ma.solve(g))); }
};

EnergyRecord level_record(const State& s, const MaterialLaw& m, const Grid& grid) {
  EnergyRecord r;
  r.k = s.k;
  r.t = s.t;
  SparseMat Mv = assemble_mass(grid, grid.dim());
  SparseMat A = assemble_scalar_laplace(grid);
  auto chiq = field_at_quadrature(grid, s.chi);
  auto W = strain_energy_density(grid, m.stiffness(), s.u);
  std::vector<Real> el(chiq.size()), pot(chiq.size());
  for (std::size_t i = 0; i < chiq.size(); ++i) {
    el[i] = 0.5 * m.c(chiq[i]) * W[i];
    pot[i] = m.f(chiq[i]);
  }
  r.kinetic = 0.5 * s.v.dot(Mv * s.v);
  r.elastic = quadrature_integral(grid, el);
  r.gradient = 0.5 * s.chi.dot(A * s.chi);
  r.potential = quadrature_integral(grid, pot);
  r.free_energy = r.elastic + r.gradient + r.potential;
  return r;
}

/// Energy bookkeeping of the step prev -> now, including the five slack
/// components whose pointwise nonnegativity (for convex f) is the discrete
/// energy estimate, and the residual of the exact step balance
/// dE + dissipation + slack - work = 0.
EnergyRecord make_record(const State& prev, const State& now, const MaterialLaw& m,
                         const Grid& grid, const BoundaryField& b_k, const FieldVector& ell_k,
                         const StepConfig& cfg, EnergyAuditRow* row = nullptr) {
  const Real tau = cfg.tau;
  SparseMat Mv = assemble_mass(grid, grid.dim());
  SparseMat A = assemble_scalar_laplace(grid);
  SparseMat Ms = assemble_mass(grid, 1);

  auto chin = field_at_quadrature(grid, now.chi);
  auto chip = field_at_quadrature(grid, prev.chi);
  auto Wnow = strain_energy_density(grid, m.stiffness(), now.u);
  auto Wprev = strain_energy_density(grid, m.stiffness(), prev.u);
  auto Wdu = strain_energy_density(grid, m.stiffness(), FieldVector(now.u - prev.u));
  auto Wv = strain_energy_density(grid, m.stiffness(), now.v);

  const std::size_t nq = chin.size();
  std::vector<Real> el_now(nq), el_prev(nq), pot_now(nq), pot_prev(nq);
  std::vector<Real> visc(nq), rate_pen(nq), pen_mass(nq);
  std::vector<Real> el_slack(nq), cc_slack(nq), f_slack(nq);
  for (std::size_t i = 0; i < nq; ++i) {
    const Real xn = chin[i], xp = chip[i];
    const Real rq = (xn - xp) / tau;
    el_now[i] = 0.5 * m.c(xn) * Wnow[i];
    el_prev[i] = 0.5 * m.c(xp) * Wprev[i];
    pot_now[i] = m.f(xn);
    pot_prev[i] = m.f(xp);
    visc[i] = m.mu() * m.d(xn) * Wv[i];
    rate_pen[i] = penalty_slope(cfg.beta, rq) * rq;
    pen_mass[i] = penalty_value(cfg.beta, rq);
    el_slack[i] = 0.5 * m.c(xn) * Wdu[i];
    cc_slack[i] = (0.5 * (m.c1_prime(xn) + m.c2_prime(xp)) * (xn - xp) -
                   0.5 * (m.c(xn) - m.c(xp))) *
                  Wprev[i];
    f_slack[i] = m.f_prime(xn) * (xn - xp) - (pot_now[i] - pot_prev[i]);
  }

  EnergyRecord r;
  r.k = now.k;
  r.t = now.t;
  r.kinetic = 0.5 * now.v.dot(Mv * now.v);
  r.elastic = quadrature_integral(grid, el_now);
  r.gradient = 0.5 * now.chi.dot(A * now.chi);
  r.potential = quadrature_integral(grid, pot_now);
  r.free_energy = r.elastic + r.gradient + r.potential;

  FieldScalar rate = (now.chi - prev.chi) / tau;
  r.dissipation_increment = tau * (quadrature_integral(grid, visc) + rate.dot(Ms * rate) +
                                   rate.dot(A * rate) + quadrature_integral(grid, rate_pen));
  r.penalty_mass = quadrature_integral(grid, pen_mass);

  FieldVector load = assemble_boundary_load(grid, b_k);
  if (ell_k.size() > 0) load += assemble_body_load(grid, ell_k);
  r.work_increment = tau * load.dot(now.v);

  const Real kinetic_slack = 0.5 * (now.v - prev.v).dot(Mv * (now.v - prev.v));
  const Real elastic_slack = quadrature_integral(grid, el_slack);
  const Real cc = quadrature_integral(grid, cc_slack);
  FieldScalar dchi = now.chi - prev.chi;
  const Real gradient_slack = 0.5 * dchi.dot(A * dchi);
  const Real fs = quadrature_integral(grid, f_slack);
  r.slack = kinetic_slack + elastic_slack + cc + gradient_slack + fs;

  const Real kinetic_prev = 0.5 * prev.v.dot(Mv * prev.v);
  const Real elastic_prev = quadrature_integral(grid, el_prev);
  const Real gradient_prev = 0.5 * prev.chi.dot(A * prev.chi);
  const Real potential_prev = quadrature_integral(grid, pot_prev);
  const Real e_now = r.kinetic + r.free_energy;
  const Real e_prev = kinetic_prev + elastic_prev + gradient_prev + potential_prev;
  r.identity_residual = (e_now - e_prev) + r.dissipation_increment + r.slack - r.work_increment;

  if (row) {
    row->k = now.k;
    row->kinetic_slack = kinetic_slack;
    row->elastic_slack = elastic_slack;
    row->cc_slack = cc;
    row->gradient_slack = gradient_slack;
    row->f_slack = fs;
    row->slack = r.slack;
    row->identity_residual = r.identity_residual;
    const Real scale = 1.0 + std::abs(e_now) + std::abs(e_prev) +
                       std::abs(r.dissipation_increment) + std::abs(r.work_increment);
    row->ok = r.slack >= -1e-8 * scale && std::abs(r.identity_residual) <= 1e-8 * scale;
  }
  return r;
}

}  // namespace

void StepConfig::validate() const {
  if (!(tau > 0.0) || !(T > 0.0) || tau > T * (1.0 + 1e-12))
    throw std::invalid_argument("StepConfig: need 0 < tau <= T");
  if (!(beta.beta > 0.0)) throw std::invalid_argument("StepConfig: penalty beta must be > 0");
  if (!(newton_tol > 0.0) || !(linear_tol > 0.0))
    throw std::invalid_argument("StepConfig: tolerances must be > 0");
  if (newton_max_iter < 1 || u_stride < 1)
    throw std::invalid_argument("StepConfig: iteration and stride counts must be >= 1");
}

Real damage_functional(const State& state, const MaterialLaw& material, const Penalty& penalty,
                       const Grid& grid, Real tau, const FieldScalar& x) {
  return DamageProblem(grid, material, penalty, tau, state.chi, state.u).value(x);
}

FieldScalar damage_functional_gradient(const State& state, const MaterialLaw& material,
                                       const Penalty& penalty, const Grid& grid, Real tau,
                                       const FieldScalar& x) {
  return DamageProblem(grid, material, penalty, tau, state.chi, state.u).residual(x);
}

DamageResult damage_step(const State& state, const MaterialLaw& material,
                         const Penalty& penalty, const Grid& grid, const StepConfig& cfg) {
  cfg.validate();
  DamageProblem p(grid, material, penalty, cfg.tau, state.chi, state.u);

  FieldScalar x = state.chi;  // feasible start: zero rate
  Real fx = p.value(x);
  FieldScalar g = p.residual(x);
  Real rnorm = p.dual_norm(g);
  int iterations = 0;

  // Armijo backtracking along d; on success commits x and fx.  A trial that
  // no longer differs from x in floating point is a failure, not progress.
  auto line_search = [&](const FieldScalar& d) -> bool {
    const Real slope = g.dot(d);
    if (!(slope < 0.0)) return false;
    Real s = 1.0;
    for (int ls = 0; ls < 40; ++ls, s *= 0.5) {
      FieldScalar trial = x + s * d;
      if ((trial.array() == x.array()).all()) return false;
      const Real ft = p.value(trial);
      if (std::isfinite(ft) && ft <= fx + 1e-4 * s * slope) {
        x = std::move(trial);
        fx = ft;
        return true;
      }
    }
    return false;
  };

  // Near the minimum the functional is flat to double precision while the
  // residual is still above tolerance (the penalty curvature 1/(beta tau)
  // makes the fp-flat neighborhood wide in the dual norm).  There, accept
  // damped Newton steps on residual decrease alone: the semismooth
  // quadratic tail needs no functional comparisons.
  auto residual_step = [&](const FieldScalar& d) -> bool {
    for (const Real s : {1.0, 0.5, 0.25}) {
      FieldScalar trial = x + s * d;
      if ((trial.array() == x.array()).all()) return false;
      FieldScalar gt = p.residual(trial);
      const Real rt = p.dual_norm(gt);
      if (std::isfinite(rt) && rt <= 0.95 * rnorm) {
        x = std::move(trial);
        fx = p.value(x);
        g = std::move(gt);
        rnorm = rt;
        return true;
      }
    }
    return false;
  };

  while (rnorm > cfg.newton_tol) {
    if (iterations >= cfg.newton_max_iter)
      throw NewtonFailure("damage_step: no convergence after " +
                              std::to_string(cfg.newton_max_iter) +
                              " iterations, residual " + format_exact(rnorm),
                          rnorm);
    ++iterations;
    bool stepped = false;
    Chol hs;
    hs.compute(p.hessian(x));
    if (hs.info() == Eigen::Success) {
      FieldScalar d = hs.solve(-g);
      if (hs.info() == Eigen::Success) {
        stepped = line_search(d);
        if (!stepped && residual_step(d)) continue;
      }
    }
    if (!stepped) {
      // Stalled Newton: preconditioned gradient descent, then try again.
      bool progress = false;
      for (int fb = 0; fb < 50; ++fb) {
        FieldScalar d = -p.ma.solve(g);
        if (!line_search(d)) break;
        progress = true;
        g = p.residual(x);
        rnorm = p.dual_norm(g);
        if (rnorm <= cfg.newton_tol) break;
      }
      if (!progress)
        throw NewtonFailure("damage_step: line search stalled at residual " +
                                format_exact(rnorm),
                            rnorm);
      continue;
    }
    g = p.residual(x);
    rnorm = p.dual_norm(g);
  }

  DamageResult out;
  out.xi.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out.xi[i] = penalty_slope(penalty, (x[i] - state.chi[i]) / cfg.tau);
  out.chi = std::move(x);
  out.iterations = iterations;
  out.residual = rnorm;
  return out;
}

FieldVector elasticity_step(const State& state, const MaterialLaw& material, const Grid& grid,
                            const BoundaryField& b_k, const FieldVector& ell_k,
                            const StepConfig& cfg) {
  cfg.validate();
  const Real tau = cfg.tau;
  auto chiq = field_at_quadrature(grid, state.chi);
  std::vector<Real> w_lhs(chiq.size()), w_visc(chiq.size());
  for (std::size_t i = 0; i < chiq.size(); ++i) {
    w_visc[i] = material.d(chiq[i]);
    w_lhs[i] = tau * tau * material.c(chiq[i]) + tau * material.mu() * w_visc[i];
  }
  SparseMat Mv = assemble_mass(grid, grid.dim());
  SparseMat K = assemble_weighted_elasticity_qp(grid, material.stiffness(), w_lhs);
  SparseMat Kd = assemble_weighted_elasticity_qp(grid, material.stiffness(), w_visc);
  SparseMat lhs = Mv + K;

  FieldVector rhs = Mv * (2.0 * state.u - state.u_prev) + tau * material.mu() * (Kd * state.u);
  if (ell_k.size() > 0) rhs += tau * tau * assemble_body_load(grid, ell_k);
  rhs += tau * tau * assemble_boundary_load(grid, b_k);

  Chol solver;
  solver.compute(lhs);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("elasticity_step: factorization failed");
  FieldVector u = solver.solve(rhs);
  const Real scale = std::max(1.0, rhs.norm());
  Real resid = (lhs * u - rhs).norm();
  if (resid > cfg.linear_tol * scale) {
    u += solver.solve(rhs - lhs * u);  // one refinement pass
    resid = (lhs * u - rhs).norm();
    if (resid > cfg.linear_tol * scale)
      throw std::runtime_error("elasticity_step: linear residual " + format_exact(resid) +
                               " exceeds tolerance");
  }
  return u;
}

State advance(const State& state, const MaterialLaw& material, const Grid& grid,
              const BoundaryField& b_k, const FieldVector& ell_k, const StepConfig& cfg,
              EnergyRecord* record) {
  DamageResult dmg = damage_step(state, material, cfg.beta, grid, cfg);

  State mid = state;
  mid.chi_prev = state.chi;
  mid.chi = dmg.chi;
  mid.xi = dmg.xi;
  FieldVector u_new = elasticity_step(mid, material, grid, b_k, ell_k, cfg);

  State out;
  out.k = state.k + 1;
  out.t = out.k * cfg.tau;
  out.u_prev = state.u;
  out.v = (u_new - state.u) / cfg.tau;
  out.u = std::move(u_new);
  out.chi_prev = state.chi;
  out.chi = std::move(dmg.chi);
  out.xi = std::move(dmg.xi);
  if (record) *record = make_record(state, out, material, grid, b_k, ell_k, cfg);
  return out;
}

int interp_level(Real tau, int levels, Real t, Interp kind) {
  if (levels <= 0) throw std::invalid_argument("interp_level: empty sequence");
  const int last = levels - 1;
  Real s = t / tau;
  const Real snapped = std::round(s);
  if (std::abs(s - snapped) <= 1e-9 * std::max(1.0, std::abs(s))) s = snapped;
  if (s <= 0.0) return 0;
  if (s >= static_cast<Real>(last)) return last;
  switch (kind) {
    case Interp::right_constant:
      return static_cast<int>(std::ceil(s));
    case Interp::left_constant:
    case Interp::linear:
      return static_cast<int>(std::floor(s));
  }
  return 0;
}

Real interp_blend(Real tau, int levels, Real t) {
  const int last = levels - 1;
  Real s = t / tau;
  const Real snapped = std::round(s);
  if (std::abs(s - snapped) <= 1e-9 * std::max(1.0, std::abs(s))) s = snapped;
  if (s <= 0.0 || s >= static_cast<Real>(last)) return 0.0;
  return s - std::floor(s);
}

const FieldVector& Trajectory::u_level(int k) const {
  if (k < 0 || k > steps) throw std::out_of_range("u_level: level out of range");
  if (k % u_stride != 0) throw std::invalid_argument("u_level: level thinned away");
  return u[static_cast<std::size_t>(k / u_stride)];
}

FieldVector Trajectory::v_level(int k) const {
  if (k == 0) return (u_level(0) - u_minus1) / tau;
  return (u_level(k) - u_level(k - 1)) / tau;
}

FieldScalar Trajectory::chi_at(Real t, Interp kind) const {
  return interp_sequence(chi, tau, t, kind);
}

FieldVector Trajectory::u_at(Real t, Interp kind) const {
  if (!has_all_u()) throw std::invalid_argument("u_at: displacement levels were thinned");
  return interp_sequence(u, tau, t, kind);
}

BoundaryField zero_boundary(const Grid& grid) {
  return {FieldVector::Zero(static_cast<Eigen::Index>(grid.node_count()) * grid.dim()), {}};
}

void write_energy_csv_header(std::ostream& out) {
  out << "k,t,kinetic,elastic,gradient,potential,dissipation_increment,penalty_mass,"
         "free_energy,slack\n";
}

void write_energy_csv_row(std::ostream& out, const EnergyRecord& r) {
  out << r.k << ',' << format_exact(r.t) << ',' << format_exact(r.kinetic) << ','
      << format_exact(r.elastic) << ',' << format_exact(r.gradient) << ','
      << format_exact(r.potential) << ',' << format_exact(r.dissipation_increment) << ','
      << format_exact(r.penalty_mass) << ',' << format_exact(r.free_energy) << ','
      << format_exact(r.slack) << '\n';
}

Trajectory run(const InitialData& initial, const Forcing& forcing, const MaterialLaw& material,
               const Grid& grid, const StepConfig& cfg, std::ostream* energy_csv) {
  cfg.validate();
  const Eigen::Index n = grid.node_count();
  const Eigen::Index nv = n * grid.dim();
  if (initial.u0.size() != nv || initial.v0.size() != nv || initial.chi0.size() != n)
    throw std::invalid_argument("run: initial data sized for a different grid");

  const Real steps_real = cfg.T / cfg.tau;
  const int M = static_cast<int>(std::llround(steps_real));
  if (M < 1 || std::abs(steps_real - M) > 1e-9 * std::max(1.0, steps_real))
    throw std::invalid_argument("run: T must be an integral multiple of tau");
  if (max_normal_derivative(grid, initial.chi0) > cfg.initial_flatness_tol)
    throw std::invalid_argument(
        "run: chi0 violates the flat-boundary requirement (nonzero discrete normal "
        "derivative)");

  Trajectory tr;
  tr.tau = cfg.tau;
  tr.steps = M;
  tr.u_stride = cfg.u_stride;
  tr.beta = cfg.beta;

  State s;
  s.k = 0;
  s.t = 0.0;
  s.u = initial.u0;
  s.u_prev = initial.u0 - cfg.tau * initial.v0;  // u^{-1} seeding
  s.v = initial.v0;
  s.chi = initial.chi0;
  s.chi_prev = initial.chi0;
  s.xi = FieldScalar::Zero(n);

  tr.u_minus1 = s.u_prev;
  tr.chi.push_back(s.chi);
  tr.xi.push_back(s.xi);
  tr.u.push_back(s.u);
  tr.energy.push_back(level_record(s, material, grid));
  if (energy_csv) {
    write_energy_csv_header(*energy_csv);
    write_energy_csv_row(*energy_csv, tr.energy.back());
  }

  for (int k = 1; k <= M; ++k) {
    BoundaryField b = forcing.traction ? forcing.traction(k * cfg.tau) : zero_boundary(grid);
    FieldVector ell = forcing.body ? forcing.body(k * cfg.tau) : FieldVector();
    try {
      EnergyRecord rec;
      s = advance(s, material, grid, b, ell, cfg, &rec);
      tr.chi.push_back(s.chi);
      tr.xi.push_back(s.xi);
      if (k % cfg.u_stride == 0) tr.u.push_back(s.u);
      tr.energy.push_back(rec);
      if (energy_csv) write_energy_csv_row(*energy_csv, rec);
    } catch (const std::exception& ex) {
      tr.failed_at = k;
      tr.failure = ex.what();
      break;
    }
  }
  return tr;
}

EnergyAudit energy_audit(const Trajectory& tr, const MaterialLaw& material, const Grid& grid,
                         const Forcing& forcing) {
  if (!tr.has_all_u())
    throw std::invalid_argument("energy_audit: requires every displacement level");
  StepConfig cfg;
  cfg.tau = tr.tau;
  cfg.T = tr.steps * tr.tau;
  // Penalty parameters only enter the dissipation bookkeeping.
  cfg.beta = tr.beta;

  EnergyAudit audit;
  const int upto = tr.complete() ? tr.steps : tr.failed_at - 1;
  for (int k = 1; k <= upto; ++k) {
    State prev;
    prev.k = k - 1;
    prev.t = (k - 1) * tr.tau;
    prev.u = tr.u_level(k - 1);
    prev.u_prev = k >= 2 ? tr.u_level(k - 2) : tr.u_minus1;
    prev.v = tr.v_level(k - 1);
    prev.chi = tr.chi[k - 1];
    prev.chi_prev = tr.chi[k >= 2 ? k - 2 : 0];
    prev.xi = tr.xi[k - 1];

    State now;
    now.k = k;
    now.t = k * tr.tau;
    now.u = tr.u_level(k);
    now.u_prev = prev.u;
    now.v = tr.v_level(k);
    now.chi = tr.chi[k];
    now.chi_prev = prev.chi;
    now.xi = tr.xi[k];

    BoundaryField b = forcing.traction ? forcing.traction(k * tr.tau) : zero_boundary(grid);
    FieldVector ell = forcing.body ? forcing.body(k * tr.tau) : FieldVector();

    EnergyAuditRow row;
    make_record(prev, now, material, grid, b, ell, cfg, &row);
    if (!row.ok) {
      audit.all_ok = false;
      const Real viol = std::min(row.slack, -std::abs(row.identity_residual));
      audit.worst_violation = std::min(audit.worst_violation, viol);
    }
    audit.rows.push_back(row);
  }
  return audit;
}

namespace {

/// Damage residual assembled purely from quadrature samples, so that the
/// same arithmetic path serves the raw and the pointwise-truncated field.
FieldScalar damage_residual_qp(const Grid& grid, const MaterialLaw& m, const Penalty& beta,
                               Real tau, const std::vector<Real>& xq,
                               const std::vector<Real>& pq,
                               const std::vector<Eigen::Vector2d>& gxq,
                               const std::vector<Eigen::Vector2d>& gpq,
                               const std::vector<Real>& W) {
  const std::size_t nq = xq.size();
  std::vector<Real> s(nq);
  std::vector<Eigen::Vector2d> flux(nq);
  for (std::size_t i = 0; i < nq; ++i) {
    const Real rq = (xq[i] - pq[i]) / tau;
    s[i] = rq + 0.5 * (m.c1_prime(xq[i]) + m.c2_prime(pq[i])) * W[i] + m.f_prime(xq[i]) +
           penalty_slope(beta, rq);
    flux[i] = gxq[i] + (gxq[i] - gpq[i]) / tau;
  }
  return assemble_scalar_load(grid, s) + assemble_flux_load(grid, flux);
}

}  // namespace

TruncationReport truncate_chi(const Trajectory& tr, const MaterialLaw& material,
                              const Grid& grid, const Forcing& forcing) {
  if (!material.truncation_safe())
    throw std::invalid_argument(
        "truncate_chi: c and d must be constant on the negative axis for truncation to "
        "preserve the equations");
  if (tr.chi.empty()) throw std::invalid_argument("truncate_chi: empty trajectory");
  if (tr.chi[0].minCoeff() < -1e-12 || tr.chi[0].maxCoeff() > 1.0 + 1e-12)
    throw std::invalid_argument("truncate_chi: chi0 must take values in [0, 1]");
  if (!tr.has_all_u())
    throw std::invalid_argument("truncate_chi: requires every displacement level");

  TruncationReport rep;
  rep.chi_plus.reserve(tr.chi.size());
  for (const auto& c : tr.chi) rep.chi_plus.push_back(c.cwiseMax(0.0));

  const Real tau = tr.tau;
  const int dim = grid.dim();
  SparseMat Mv = assemble_mass(grid, dim);
  const int nq_cell = grid.quad_per_cell();
  const int upto = tr.complete() ? tr.steps : tr.failed_at - 1;

  for (int k = 1; k <= upto; ++k) {
    auto xq = field_at_quadrature(grid, tr.chi[k]);
    auto pq = field_at_quadrature(grid, tr.chi[k - 1]);
    std::vector<Real> xq_t(xq.size()), pq_t(pq.size());
    for (std::size_t i = 0; i < xq.size(); ++i) {
      xq_t[i] = std::max(xq[i], 0.0);
      pq_t[i] = std::max(pq[i], 0.0);
    }

    // Displacement equation: residual with raw vs truncated coefficients.
    auto elasticity_residual = [&](const std::vector<Real>& chiq) {
      std::vector<Real> w_lhs(chiq.size()), w_visc(chiq.size());
      for (std::size_t i = 0; i < chiq.size(); ++i) {
        w_visc[i] = material.d(chiq[i]);
        w_lhs[i] = tau * tau * material.c(chiq[i]) + tau * material.mu() * w_visc[i];
      }
      SparseMat K = assemble_weighted_elasticity_qp(grid, material.stiffness(), w_lhs);
      SparseMat Kd = assemble_weighted_elasticity_qp(grid, material.stiffness(), w_visc);
      const FieldVector& uk = tr.u_level(k);
      const FieldVector& ukm1 = tr.u_level(k - 1);
      const FieldVector& ukm2 = k >= 2 ? tr.u_level(k - 2) : tr.u_minus1;
      FieldVector rhs =
          Mv * (2.0 * ukm1 - ukm2) + tau * material.mu() * (Kd * ukm1);
      BoundaryField b = forcing.traction ? forcing.traction(k * tau) : zero_boundary(grid);
      FieldVector ell = forcing.body ? forcing.body(k * tau) : FieldVector();
      if (ell.size() > 0) rhs += tau * tau * assemble_body_load(grid, ell);
      rhs += tau * tau * assemble_boundary_load(grid, b);
      return FieldVector(Mv * uk + K * uk - rhs);
    };
    FieldVector er_raw = elasticity_residual(xq);
    FieldVector er_trunc = elasticity_residual(xq_t);
    rep.max_elasticity_delta =
        std::max(rep.max_elasticity_delta, (er_trunc - er_raw).cwiseAbs().maxCoeff());

    // Damage rows, compared where every quadrature value in the node's
    // support patch is positive at both levels (there truncation changes
    // nothing pointwise).
    auto W = strain_energy_density(grid, material.stiffness(), tr.u_level(k - 1));
    auto gx = gradient_at_quadrature(grid, tr.chi[k]);
    auto gp = gradient_at_quadrature(grid, tr.chi[k - 1]);
    std::vector<Eigen::Vector2d> gx_t(gx.size()), gp_t(gp.size());
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx_t[i] = xq[i] > 0.0 ? gx[i] : Eigen::Vector2d::Zero();
      gp_t[i] = pq[i] > 0.0 ? gp[i] : Eigen::Vector2d::Zero();
    }
    FieldScalar dr_raw =
        damage_residual_qp(grid, material, tr.beta, tau, xq, pq, gx, gp, W);
    FieldScalar dr_trunc =
        damage_residual_qp(grid, material, tr.beta, tau, xq_t, pq_t, gx_t, gp_t, W);

    std::vector<char> positive(grid.node_count(), 1);
    for (int cell = 0; cell < grid.cell_count(); ++cell) {
      bool all_pos = true;
      for (int q = 0; q < nq_cell; ++q) {
        const std::size_t i = static_cast<std::size_t>(cell) * nq_cell + q;
        if (xq[i] <= 0.0 || pq[i] <= 0.0) all_pos = false;
      }
      if (!all_pos) {
        const auto nodes = grid.cell_nodes(cell);
        for (int a = 0; a < grid.nodes_per_cell(); ++a) positive[nodes[a]] = 0;
      }
    }
    for (int i = 0; i < grid.node_count(); ++i) {
      if (!positive[i]) continue;
      ++rep.compared_rows;
      rep.max_damage_delta =
          std::max(rep.max_damage_delta, std::abs(dr_trunc[i] - dr_raw[i]));
    }
  }
  return rep;
}

}  // namespace pfdam
