#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pfdam/stepper.hpp"

namespace pfdam {

/// One damage step on spatially homogeneous data: every field is constant
/// in space, gradient terms vanish, and stationarity of the step functional
/// reduces to a single scalar equation in chi.
struct HomogeneousStep {
  Real chi_prev = 0.0;
  Real strain_energy = 0.0;  ///< W = C eps(u_prev) : eps(u_prev), one number
  Real tau = 0.1;
  Penalty beta = Penalty::moreau_yosida(1e-3);
};

/// Brute-force ground truth for damage_step on homogeneous data: bisection
/// root of
///   (x - chi_prev)/tau + slope_beta((x - chi_prev)/tau)
///     + (c1'(x) + c2'(chi_prev)) W / 2 + f'(x) = 0
/// over [chi_prev - 10, chi_prev + 10], narrowed to `resolution`.  Throws
/// if the bracket has no sign change.
Real scalar_oracle(const HomogeneousStep& in, const MaterialLaw& material,
                   Real resolution = 1e-12);

/// Initial data plus forcing: the scenario a sweep or perturbation study
/// reruns under varying parameters.
struct Scenario {
  InitialData initial;
  Forcing forcing;
};

/// Distance between two completed runs on the same grid and time step, in
/// the norms of the stability estimate:
///   max_k ||du^k||_L2 + max_k ||dv^k||_L2
///     + (sum_k tau (||du^k||_H1^2 + ||dv^k||_H1^2))^{1/2}
///     + (sum_k tau (||dchi^k||_H1^2 + ||drate^k||_H1^2))^{1/2}
/// with mass-matrix L2 and per-component stiffness H1 norms.  Symmetric in
/// its arguments; needs every displacement level (u_stride == 1).
Real dependence_distance(const Trajectory& a, const Trajectory& b, const Grid& grid);

/// Distance between the data of two scenarios on the time grid (tau, steps):
/// H1 norms of the initial differences, velocity in L2, and discrete
/// L2-in-time norms of the body and traction differences (traction measured
/// in the boundary mass norm).  Symmetric in its arguments.
Real data_distance(const Scenario& a, const Scenario& b, const Grid& grid, Real tau, int steps);

/// A perturbation study: the base scenario reruns with data shifted by
/// delta * direction for each listed magnitude.  Empty / null direction
/// members leave that datum alone.
struct PerturbationSpec {
  Scenario base;
  InitialData initial_direction;  // fields sized like the base data, or empty
  Forcing forcing_direction;      // null members: unperturbed
  std::vector<Real> deltas;       // positive, strictly increasing

  void validate() const;
};

struct RatioRow {
  Real delta = 0.0;
  Real lhs = 0.0;    ///< dependence_distance(base run, perturbed run)
  Real rhs = 0.0;    ///< data_distance(base, perturbed)
  Real ratio = 0.0;  ///< lhs / rhs
};

/// Ratio table of a perturbation study, one row per delta in input order.
struct RatioTable {
  std::vector<RatioRow> rows;
  Real spread = 0.0;  ///< max ratio / min ratio over the rows
  bool passed = false;
  std::string failure;  // nonempty if a run did not complete

  void write_csv(std::ostream& out) const;
  void write_summary(std::ostream& out) const;
};

/// Stability harness: reruns the base scenario under scaled data
/// perturbations and tabulates solution distance over data distance.
/// Passes when every ratio is finite, the ratios stay within a factor 10
/// of each other, and the solution distance shrinks with delta.  The
/// two-run estimate it checks holds for unit viscous coupling only, so
/// materials with d != 1 are rejected.
RatioTable continuous_dependence_test(const PerturbationSpec& spec, const MaterialLaw& material,
                                      const Grid& grid, const StepConfig& cfg);

/// Monitors recorded from one run of a sweep.  All entries are finite.
struct SweepPoint {
  Real parameter = 0.0;
  Real healing_max = 0.0;      ///< max over steps and nodes of max(rate, 0)
  Real rate_max = 0.0;         ///< max over steps and nodes of |rate|
  Real complementarity = 0.0;  ///< max subgradient_residual(rate, xi)
  Real terminal_u = 0.0;       ///< ||u^M||_L2
  Real terminal_chi = 0.0;     ///< ||chi^M||_L2
  Real xi_max = 0.0;           ///< max |xi| over steps and nodes
  Real dissipation = 0.0;      ///< summed dissipation increments
  Real penalty_mass = 0.0;     ///< tau-weighted sum of the penalty integrals
  Real final_free_energy = 0.0;
  Real error = 0.0;  ///< step-size sweep: terminal distance to the reference run
};

/// Sweep outcome: per-parameter monitors, consecutive-run distances, and a
/// fitted log-log rate (0 when the data cannot be fitted).  A failed run
/// truncates the points at the failure and marks the report partial.
struct SweepReport {
  std::string parameter_name;  // "beta" or "tau"
  std::vector<SweepPoint> points;
  std::vector<Real> distances;  ///< between consecutive runs; size points-1
  Real fitted_rate = 0.0;
  bool passed = false;
  bool partial = false;
  std::string failure;

  void write_csv(std::ostream& out) const;
  void write_summary(std::ostream& out) const;
};

/// Reruns the scenario along a decreasing list of penalty parameters.
/// Records the healing overshoot max(chi_t, 0), complementarity residuals,
/// and full trajectory distances between consecutive runs.  Passes when the
/// overshoot is nonincreasing and the distances are nonincreasing (the
/// discrete Cauchy surrogate for the vanishing-penalty limit).
SweepReport beta_sweep(const Scenario& problem, const std::vector<Real>& betas,
                       const MaterialLaw& material, const Grid& grid, StepConfig cfg);

/// Reruns the scenario along a halving list of step sizes plus a finer
/// reference step, recording terminal-state errors against the reference
/// and the fitted self-convergence rate.  Passes when the rate is at least
/// 0.8, or when every error sits at the floating-point floor (an exactly
/// reproduced solution has no rate to fit).  Distances hold the terminal
/// gaps between consecutive step sizes.
SweepReport tau_sweep(const Scenario& problem, const std::vector<Real>& taus, Real tau_ref,
                      const MaterialLaw& material, const Grid& grid, StepConfig cfg);

}  // namespace pfdam
