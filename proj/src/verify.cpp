#include "pfdam/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "pfdam/util.hpp"

namespace pfdam {

namespace {

Real quadratic_norm(const SparseMat& S, const Eigen::VectorXd& x) {
  return std::sqrt(std::max(0.0, x.dot(S * x)));
}

int checked_steps(Real T, Real tau) {
  const Real steps_real = T / tau;
  const int M = static_cast<int>(std::llround(steps_real));
  if (M < 1 || std::abs(steps_real - M) > 1e-9 * std::max(1.0, steps_real))
    throw std::invalid_argument("sweep: T must be an integral multiple of every step size");
  return M;
}

std::vector<int> merge_facets(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out = a;
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::function<BoundaryField(Real)> shift_traction(const std::function<BoundaryField(Real)>& base,
                                                  const std::function<BoundaryField(Real)>& dir,
                                                  Real delta) {
  if (!dir) return base;
  return [base, dir, delta](Real t) {
    BoundaryField shift = dir(t);
    shift.nodal *= delta;
    if (!base) return shift;
    BoundaryField out = base(t);
    out.nodal += shift.nodal;
    out.facets = merge_facets(out.facets, shift.facets);
    return out;
  };
}

std::function<FieldVector(Real)> shift_body(const std::function<FieldVector(Real)>& base,
                                            const std::function<FieldVector(Real)>& dir,
                                            Real delta) {
  if (!dir) return base;
  return [base, dir, delta](Real t) {
    FieldVector shift = delta * dir(t);
    if (!base) return shift;
    return FieldVector(base(t) + shift);
  };
}

Scenario shifted_scenario(const PerturbationSpec& spec, Real delta) {
  Scenario out = spec.base;
  const InitialData& d = spec.initial_direction;
  if (d.u0.size()) out.initial.u0 += delta * d.u0;
  if (d.v0.size()) out.initial.v0 += delta * d.v0;
  if (d.chi0.size()) out.initial.chi0 += delta * d.chi0;
  out.forcing.traction = shift_traction(spec.base.forcing.traction,
                                        spec.forcing_direction.traction, delta);
  out.forcing.body = shift_body(spec.base.forcing.body, spec.forcing_direction.body, delta);
  return out;
}

/// Runs one scenario per entry of cfgs into disjoint slots; exceptions
/// become failure markers so worker threads never unwind.
std::vector<Trajectory> run_batch(const std::vector<Scenario>& scenarios,
                                  const std::vector<StepConfig>& cfgs,
                                  const MaterialLaw& material, const Grid& grid) {
  std::vector<Trajectory> out(scenarios.size());
  parallel_for(static_cast<std::int64_t>(scenarios.size()),
               [&](std::int64_t b, std::int64_t e) {
                 for (std::int64_t i = b; i < e; ++i) {
                   try {
                     out[i] = run(scenarios[i].initial, scenarios[i].forcing, material, grid,
                                  cfgs[i]);
                   } catch (const std::exception& ex) {
                     out[i].failed_at = 0;
                     out[i].failure = ex.what();
                   }
                 }
               });
  return out;
}

/// Least-squares slope of log y against log x; 0 when fewer than two points
/// or any value is not strictly positive (nothing to fit).
Real fit_loglog(const std::vector<Real>& x, const std::vector<Real>& y) {
  if (x.size() != y.size() || x.size() < 2) return 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return 0.0;
  const auto n = static_cast<Real>(x.size());
  Real sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real lx = std::log(x[i]);
    const Real ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const Real det = n * sxx - sx * sx;
  if (!(std::abs(det) > 0.0)) return 0.0;
  return (n * sxy - sx * sy) / det;
}

bool nonincreasing(const std::vector<Real>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] * (1.0 + 1e-9) + 1e-15) return false;
  return true;
}

/// Terminal-state gap sqrt(||du(T)||_M^2 + ||dchi(T)||_M^2).
Real terminal_distance(const Trajectory& a, const Trajectory& b, const SparseMat& M1,
                       const SparseMat& Mv) {
  const Eigen::VectorXd du = a.u.back() - b.u.back();
  const Eigen::VectorXd dchi = a.chi.back() - b.chi.back();
  return std::sqrt(std::max(0.0, du.dot(Mv * du) + dchi.dot(M1 * dchi)));
}

SweepPoint measure_run(const Trajectory& tr, Real parameter, const SparseMat& M1,
                       const SparseMat& Mv) {
  SweepPoint p;
  p.parameter = parameter;
  const Real tau = tr.tau;
  for (int k = 1; k <= tr.steps; ++k) {
    const Eigen::VectorXd rate = (tr.chi[k] - tr.chi[k - 1]) / tau;
    const Eigen::VectorXd& xi = tr.xi[k];
    for (Eigen::Index i = 0; i < rate.size(); ++i) {
      p.healing_max = std::max(p.healing_max, rate[i]);
      p.rate_max = std::max(p.rate_max, std::abs(rate[i]));
      p.xi_max = std::max(p.xi_max, std::abs(xi[i]));
      p.complementarity = std::max(p.complementarity, subgradient_residual(rate[i], xi[i]));
    }
    p.dissipation += tr.energy[k].dissipation_increment;
    p.penalty_mass += tau * tr.energy[k].penalty_mass;
  }
  p.healing_max = std::max(p.healing_max, 0.0);
  p.final_free_energy = tr.energy.back().free_energy;
  p.terminal_u = quadratic_norm(Mv, tr.u.back());
  p.terminal_chi = quadratic_norm(M1, tr.chi.back());
  return p;
}

std::string escape_json(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

const char* json_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

Real scalar_oracle(const HomogeneousStep& in, const MaterialLaw& material, Real resolution) {
  if (!(in.tau > 0.0) || !std::isfinite(in.chi_prev) || !(in.strain_energy >= 0.0) ||
      !(resolution > 0.0))
    throw std::invalid_argument("scalar_oracle: malformed step inputs");
  const Real W = in.strain_energy;
  const auto g = [&](Real x) {
    const Real r = (x - in.chi_prev) / in.tau;
    return r + penalty_slope(in.beta, r) +
           0.5 * (material.c1_prime(x) + material.c2_prime(in.chi_prev)) * W +
           material.f_prime(x);
  };
  Real lo = in.chi_prev - 10.0;
  Real hi = in.chi_prev + 10.0;
  Real glo = g(lo);
  const Real ghi = g(hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  if (glo * ghi > 0.0)
    throw std::invalid_argument("scalar_oracle: no sign change on the bracket");
  while (hi - lo > resolution) {
    const Real mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // interval below one ulp
    const Real gm = g(mid);
    if (gm == 0.0) return mid;
    if (glo * gm < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      glo = gm;
    }
  }
  return 0.5 * (lo + hi);
}

Real dependence_distance(const Trajectory& a, const Trajectory& b, const Grid& grid) {
  if (a.steps != b.steps || a.tau != b.tau)
    throw std::invalid_argument("dependence_distance: runs use different time grids");
  if (!a.complete() || !b.complete())
    throw std::invalid_argument("dependence_distance: needs two completed runs");
  if (!a.has_all_u() || !b.has_all_u())
    throw std::invalid_argument("dependence_distance: needs every displacement level");
  const SparseMat M1 = assemble_mass(grid, 1);
  const SparseMat A1 = assemble_scalar_laplace(grid);
  const SparseMat Mv = assemble_mass(grid, grid.dim());
  const SparseMat Av = assemble_laplace(grid, grid.dim());
  const Real tau = a.tau;

  // Level 0 velocities come from the seeded pre-initial displacement.
  const Eigen::VectorXd dv0 =
      ((a.u[0] - a.u_minus1) - (b.u[0] - b.u_minus1)) / tau;
  Real sup_u = quadratic_norm(Mv, a.u[0] - b.u[0]);
  Real sup_v = quadratic_norm(Mv, dv0);
  Real sum_u = 0.0;
  Real sum_chi = 0.0;
  for (int k = 1; k <= a.steps; ++k) {
    const Eigen::VectorXd du = a.u_level(k) - b.u_level(k);
    const Eigen::VectorXd dv = a.v_level(k) - b.v_level(k);
    sup_u = std::max(sup_u, quadratic_norm(Mv, du));
    sup_v = std::max(sup_v, quadratic_norm(Mv, dv));
    sum_u += tau * (du.dot(Mv * du) + du.dot(Av * du) + dv.dot(Mv * dv) + dv.dot(Av * dv));

    const Eigen::VectorXd dchi = a.chi[k] - b.chi[k];
    const Eigen::VectorXd drate =
        ((a.chi[k] - a.chi[k - 1]) - (b.chi[k] - b.chi[k - 1])) / tau;
    sum_chi += tau * (dchi.dot(M1 * dchi) + dchi.dot(A1 * dchi) + drate.dot(M1 * drate) +
                      drate.dot(A1 * drate));
  }
  return sup_u + sup_v + std::sqrt(std::max(0.0, sum_u)) + std::sqrt(std::max(0.0, sum_chi));
}

Real data_distance(const Scenario& a, const Scenario& b, const Grid& grid, Real tau, int steps) {
  if (!(tau > 0.0) || steps < 1) throw std::invalid_argument("data_distance: bad time grid");
  const SparseMat M1 = assemble_mass(grid, 1);
  const SparseMat A1 = assemble_scalar_laplace(grid);
  const SparseMat Mv = assemble_mass(grid, grid.dim());
  const SparseMat Av = assemble_laplace(grid, grid.dim());
  const SparseMat Mb = assemble_boundary_mass(grid, grid.dim());
  const Eigen::Index nv = grid.node_count() * static_cast<Eigen::Index>(grid.dim());

  const Eigen::VectorXd du0 = a.initial.u0 - b.initial.u0;
  const Eigen::VectorXd dv0 = a.initial.v0 - b.initial.v0;
  const Eigen::VectorXd dchi0 = a.initial.chi0 - b.initial.chi0;
  Real out = std::sqrt(std::max(0.0, du0.dot(Mv * du0) + du0.dot(Av * du0)));
  out += quadratic_norm(Mv, dv0);
  out += std::sqrt(std::max(0.0, dchi0.dot(M1 * dchi0) + dchi0.dot(A1 * dchi0)));

  const auto traction_at = [&](const Scenario& s, Real t) -> FieldVector {
    if (!s.forcing.traction) return FieldVector::Zero(nv);
    return s.forcing.traction(t).nodal;
  };
  const auto body_at = [&](const Scenario& s, Real t) -> FieldVector {
    if (!s.forcing.body) return FieldVector::Zero(nv);
    return s.forcing.body(t);
  };
  Real sum_b = 0.0;
  Real sum_ell = 0.0;
  for (int k = 1; k <= steps; ++k) {
    const Real t = k * tau;
    const Eigen::VectorXd db = traction_at(a, t) - traction_at(b, t);
    const Eigen::VectorXd dell = body_at(a, t) - body_at(b, t);
    sum_b += tau * db.dot(Mb * db);
    sum_ell += tau * dell.dot(Mv * dell);
  }
  return out + std::sqrt(std::max(0.0, sum_ell)) + std::sqrt(std::max(0.0, sum_b));
}

void PerturbationSpec::validate() const {
  if (deltas.empty()) throw std::invalid_argument("perturbation: no magnitudes given");
  Real prev = 0.0;
  for (Real d : deltas) {
    if (!(d > prev) || !std::isfinite(d))
      throw std::invalid_argument("perturbation: magnitudes must be positive and increasing");
    prev = d;
  }
  const bool has_direction = initial_direction.u0.size() || initial_direction.v0.size() ||
                             initial_direction.chi0.size() || forcing_direction.traction ||
                             forcing_direction.body;
  if (!has_direction) throw std::invalid_argument("perturbation: direction is empty");
}

RatioTable continuous_dependence_test(const PerturbationSpec& spec, const MaterialLaw& material,
                                      const Grid& grid, const StepConfig& cfg) {
  spec.validate();
  if (!material.viscous_coupling_is_unit())
    throw std::invalid_argument(
        "continuous_dependence_test: the two-run stability bound needs unit viscous "
        "coupling (d == 1)");
  StepConfig c = cfg;
  c.u_stride = 1;
  c.validate();
  const int steps = checked_steps(c.T, c.tau);

  std::vector<Scenario> scenarios;
  scenarios.reserve(spec.deltas.size() + 1);
  scenarios.push_back(spec.base);
  for (Real d : spec.deltas) scenarios.push_back(shifted_scenario(spec, d));
  const std::vector<StepConfig> cfgs(scenarios.size(), c);
  const std::vector<Trajectory> runs = run_batch(scenarios, cfgs, material, grid);

  RatioTable table;
  for (const Trajectory& tr : runs) {
    if (!tr.complete()) {
      table.failure = tr.failure;
      table.passed = false;
      return table;
    }
  }
  for (std::size_t i = 0; i < spec.deltas.size(); ++i) {
    RatioRow row;
    row.delta = spec.deltas[i];
    row.lhs = dependence_distance(runs[0], runs[i + 1], grid);
    row.rhs = data_distance(spec.base, scenarios[i + 1], grid, c.tau, steps);
    row.ratio = row.rhs > 0.0 ? row.lhs / row.rhs
                              : std::numeric_limits<Real>::infinity();
    table.rows.push_back(row);
  }
  Real rmin = std::numeric_limits<Real>::infinity();
  Real rmax = 0.0;
  bool finite = true;
  bool lhs_monotone = true;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const RatioRow& row = table.rows[i];
    finite = finite && std::isfinite(row.ratio) && row.ratio >= 0.0;
    rmin = std::min(rmin, row.ratio);
    rmax = std::max(rmax, row.ratio);
    if (i > 0 && row.lhs * (1.0 + 1e-9) + 1e-15 < table.rows[i - 1].lhs) lhs_monotone = false;
  }
  table.spread = (finite && rmin > 0.0) ? rmax / rmin
                                        : std::numeric_limits<Real>::infinity();
  table.passed = finite && table.spread <= 10.0 && lhs_monotone;
  return table;
}

void RatioTable::write_csv(std::ostream& out) const {
  out << "delta,lhs,rhs,ratio\n";
  for (const RatioRow& r : rows)
    out << format_exact(r.delta) << ',' << format_exact(r.lhs) << ',' << format_exact(r.rhs)
        << ',' << format_exact(r.ratio) << '\n';
}

void RatioTable::write_summary(std::ostream& out) const {
  out << "{\n"
      << "  \"report\": \"perturbation_ratios\",\n"
      << "  \"rows\": " << rows.size() << ",\n"
      << "  \"ratio_spread\": " << format_exact(spread) << ",\n";
  if (!failure.empty()) out << "  \"failure\": \"" << escape_json(failure) << "\",\n";
  out << "  \"passed\": " << json_bool(passed) << "\n}\n";
}

SweepReport beta_sweep(const Scenario& problem, const std::vector<Real>& betas,
                       const MaterialLaw& material, const Grid& grid, StepConfig cfg) {
  if (betas.empty()) throw std::invalid_argument("beta_sweep: empty parameter list");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0) || !std::isfinite(betas[i]))
      throw std::invalid_argument("beta_sweep: parameters must be positive");
    if (i > 0 && !(betas[i] < betas[i - 1]))
      throw std::invalid_argument("beta_sweep: parameters must decrease strictly");
  }
  cfg.u_stride = 1;
  cfg.validate();
  checked_steps(cfg.T, cfg.tau);

  std::vector<StepConfig> cfgs(betas.size(), cfg);
  for (std::size_t i = 0; i < betas.size(); ++i) cfgs[i].beta = Penalty{betas[i], cfg.beta.kind};
  const std::vector<Scenario> scenarios(betas.size(), problem);
  const std::vector<Trajectory> runs = run_batch(scenarios, cfgs, material, grid);

  SweepReport report;
  report.parameter_name = "beta";
  const SparseMat M1 = assemble_mass(grid, 1);
  const SparseMat Mv = assemble_mass(grid, grid.dim());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i].complete()) {
      report.partial = true;
      report.failure = runs[i].failure;
      break;
    }
    report.points.push_back(measure_run(runs[i], betas[i], M1, Mv));
    if (i > 0) report.distances.push_back(dependence_distance(runs[i - 1], runs[i], grid));
  }

  std::vector<Real> params, healing;
  for (const SweepPoint& p : report.points) {
    params.push_back(p.parameter);
    healing.push_back(p.healing_max);
  }
  report.fitted_rate = fit_loglog(params, healing);
  report.passed = !report.partial && nonincreasing(healing) && nonincreasing(report.distances);
  return report;
}

SweepReport tau_sweep(const Scenario& problem, const std::vector<Real>& taus, Real tau_ref,
                      const MaterialLaw& material, const Grid& grid, StepConfig cfg) {
  if (taus.empty()) throw std::invalid_argument("tau_sweep: empty parameter list");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0) || !std::isfinite(taus[i]))
      throw std::invalid_argument("tau_sweep: parameters must be positive");
    if (i > 0 && std::abs(taus[i] * 2.0 - taus[i - 1]) > 1e-12 * taus[i - 1])
      throw std::invalid_argument("tau_sweep: step sizes must halve");
  }
  if (!(tau_ref > 0.0) || !(tau_ref < taus.back()))
    throw std::invalid_argument("tau_sweep: reference step must be finer than the sweep");
  cfg.u_stride = 1;
  for (Real t : taus) checked_steps(cfg.T, t);
  checked_steps(cfg.T, tau_ref);

  std::vector<StepConfig> cfgs(taus.size() + 1, cfg);
  for (std::size_t i = 0; i < taus.size(); ++i) cfgs[i].tau = taus[i];
  cfgs.back().tau = tau_ref;
  for (StepConfig& c : cfgs) c.validate();
  const std::vector<Scenario> scenarios(cfgs.size(), problem);
  const std::vector<Trajectory> runs = run_batch(scenarios, cfgs, material, grid);

  SweepReport report;
  report.parameter_name = "tau";
  const SparseMat M1 = assemble_mass(grid, 1);
  const SparseMat Mv = assemble_mass(grid, grid.dim());
  if (!runs.back().complete()) {
    report.partial = true;
    report.failure = runs.back().failure;
    report.passed = false;
    return report;
  }
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!runs[i].complete()) {
      report.partial = true;
      report.failure = runs[i].failure;
      break;
    }
    SweepPoint p = measure_run(runs[i], taus[i], M1, Mv);
    p.error = terminal_distance(runs[i], runs.back(), M1, Mv);
    report.points.push_back(p);
    if (i > 0) report.distances.push_back(terminal_distance(runs[i - 1], runs[i], M1, Mv));
  }

  std::vector<Real> params, errors;
  for (const SweepPoint& p : report.points) {
    params.push_back(p.parameter);
    errors.push_back(p.error);
  }
  report.fitted_rate = fit_loglog(params, errors);
  const bool exact = !errors.empty() &&
                     *std::max_element(errors.begin(), errors.end()) <= 1e-12;
  report.passed = !report.partial && (report.fitted_rate >= 0.8 || exact);
  return report;
}

void SweepReport::write_csv(std::ostream& out) const {
  out << "parameter,healing_max,rate_max,complementarity,terminal_u,terminal_chi,xi_max,"
         "dissipation,penalty_mass,final_free_energy,error,distance_to_prev\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const SweepPoint& p = points[i];
    const Real dist = i == 0 ? 0.0 : distances[i - 1];
    out << format_exact(p.parameter) << ',' << format_exact(p.healing_max) << ','
        << format_exact(p.rate_max) << ',' << format_exact(p.complementarity) << ','
        << format_exact(p.terminal_u) << ',' << format_exact(p.terminal_chi) << ','
        << format_exact(p.xi_max) << ',' << format_exact(p.dissipation) << ','
        << format_exact(p.penalty_mass) << ',' << format_exact(p.final_free_energy) << ','
        << format_exact(p.error) << ',' << format_exact(dist) << '\n';
  }
}

void SweepReport::write_summary(std::ostream& out) const {
  std::vector<Real> healing;
  for (const SweepPoint& p : points) healing.push_back(p.healing_max);
  out << "{\n"
      << "  \"report\": \"sweep\",\n"
      << "  \"parameter\": \"" << escape_json(parameter_name) << "\",\n"
      << "  \"points\": " << points.size() << ",\n"
      << "  \"partial\": " << json_bool(partial) << ",\n"
      << "  \"fitted_rate\": " << format_exact(fitted_rate) << ",\n"
      << "  \"healing_nonincreasing\": " << json_bool(nonincreasing(healing)) << ",\n"
      << "  \"distances_nonincreasing\": " << json_bool(nonincreasing(distances)) << ",\n";
  if (!failure.empty()) out << "  \"failure\": \"" << escape_json(failure) << "\",\n";
  out << "  \"passed\": " << json_bool(passed) << "\n}\n";
}

}  // namespace pfdam
