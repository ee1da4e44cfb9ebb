#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfdam/grid.hpp"
#include "pfdam/material.hpp"

namespace pfdam {

/// Settings for one time-discrete run.
struct StepConfig {
  Real tau = 0.01;
  Real T = 1.0;
  Penalty beta = Penalty::moreau_yosida(1e-3);
  Real newton_tol = 1e-10;  // damage residual in the (mass+laplace)^-1 norm
  int newton_max_iter = 50;
  Real linear_tol = 1e-12;  // relative residual of the displacement solve
  int u_stride = 1;         // keep every m-th displacement level
  Real initial_flatness_tol = 1e-9;  // normal-derivative gate on chi0

  void validate() const;
};

/// One time level.  v always equals (u - u_prev) / tau; it is recomputed
/// from the displacements each step, never integrated separately.
struct State {
  int k = 0;
  Real t = 0.0;
  FieldVector u, u_prev;
  FieldVector v;
  FieldScalar chi, chi_prev;
  FieldScalar xi;  // penalty slope at the nodal rate, >= 0
};

/// Initial displacement, velocity, and damage.  chi0 must have vanishing
/// discrete normal derivative on the boundary; named profiles achieve this
/// by being constant in a margin near the boundary.
struct InitialData {
  FieldVector u0, v0;
  FieldScalar chi0;
};

/// Per-step energy bookkeeping.  free_energy = elastic + gradient +
/// potential always; slack is the convex-splitting surplus of the step
/// balance (sum of five individually nonnegative terms for convex f).
struct EnergyRecord {
  int k = 0;
  Real t = 0.0;
  Real kinetic = 0.0;
  Real elastic = 0.0;
  Real gradient = 0.0;
  Real potential = 0.0;
  Real dissipation_increment = 0.0;
  Real penalty_mass = 0.0;
  Real free_energy = 0.0;
  Real slack = 0.0;
  Real work_increment = 0.0;
  Real identity_residual = 0.0;
};

/// Damage solve failure; carries the last residual so the caller can react
/// (typically by cutting tau).
struct NewtonFailure : std::runtime_error {
  NewtonFailure(const std::string& what, Real r) : std::runtime_error(what), residual(r) {}
  Real residual;
};

struct DamageResult {
  FieldScalar chi;
  FieldScalar xi;
  int iterations = 0;
  Real residual = 0.0;
};

/// Step 1: minimize the damage functional given the previous level's
/// displacement and damage.  Semismooth Newton with Armijo backtracking on
/// the functional value, preconditioned gradient fallback on stall.
DamageResult damage_step(const State& state, const MaterialLaw& material,
                         const Penalty& penalty, const Grid& grid, const StepConfig& cfg);

/// Value and Euler-Lagrange gradient of the one-step damage functional at
/// nodal x, with previous level taken from state (diagnostics; damage_step
/// minimizes exactly this functional).
Real damage_functional(const State& state, const MaterialLaw& material, const Penalty& penalty,
                       const Grid& grid, Real tau, const FieldScalar& x);
FieldScalar damage_functional_gradient(const State& state, const MaterialLaw& material,
                                       const Penalty& penalty, const Grid& grid, Real tau,
                                       const FieldScalar& x);

/// Step 2: solve the displacement system for the level whose damage is
/// already stored in state.chi.  The system matrix is mass +
/// (tau^2 c(chi) + tau mu d(chi))-weighted elasticity, symmetric positive
/// definite for any admissible material.
FieldVector elasticity_step(const State& state, const MaterialLaw& material, const Grid& grid,
                            const BoundaryField& b_k, const FieldVector& ell_k,
                            const StepConfig& cfg);

/// One full step k: damage then elasticity, invariants restored.  If record
/// is non-null it receives the energy bookkeeping of the step.
State advance(const State& state, const MaterialLaw& material, const Grid& grid,
              const BoundaryField& b_k, const FieldVector& ell_k, const StepConfig& cfg,
              EnergyRecord* record = nullptr);

/// Time interpolation of a level sequence: piecewise constant from the right
/// level, from the left level, or linear.  All three return level k exactly
/// at t = k tau.
enum class Interp { right_constant, left_constant, linear };

/// Time-dependent data for a run; null members mean zero.
struct Forcing {
  std::function<BoundaryField(Real)> traction;
  std::function<FieldVector(Real)> body;
};

/// A completed (or failed-partway) run: all damage levels, displacement
/// levels at the configured stride, and per-step energy records
/// (energy[0] holds the initial energies with zero increments).
struct Trajectory {
  Real tau = 0.0;
  int steps = 0;
  int u_stride = 1;
  Penalty beta = Penalty::moreau_yosida(1e-3);
  int failed_at = -1;  // -1: complete; otherwise first failed step
  std::string failure;
  std::vector<FieldScalar> chi;  // levels 0..steps
  std::vector<FieldScalar> xi;   // levels 0..steps, xi[0] = 0
  std::vector<FieldVector> u;    // levels 0, stride, 2*stride, ...
  FieldVector u_minus1;          // seeded level u^0 - tau v^0
  std::vector<EnergyRecord> energy;  // levels 0..steps

  bool complete() const { return failed_at < 0; }
  Real time(int k) const { return k * tau; }
  int stored_levels() const { return static_cast<int>(chi.size()); }
  bool has_all_u() const { return u_stride == 1 && !u.empty(); }
  const FieldVector& u_level(int k) const;
  FieldVector v_level(int k) const;  // (u^k - u^{k-1}) / tau, k >= 1

  FieldScalar chi_at(Real t, Interp kind) const;
  FieldVector u_at(Real t, Interp kind) const;
};

/// Index of the level an interpolation draws from at time t (for linear,
/// the left level); grid times snap to their own level.
int interp_level(Real tau, int levels, Real t, Interp kind);
Real interp_blend(Real tau, int levels, Real t);  // linear weight in [0, 1]

template <typename Vec>
Vec interp_sequence(const std::vector<Vec>& levels, Real tau, Real t, Interp kind) {
  const int n = static_cast<int>(levels.size());
  const int k = interp_level(tau, n, t, kind);
  if (kind != Interp::linear || k + 1 >= n) return levels[k];
  const Real w = interp_blend(tau, n, t);
  if (w == 0.0) return levels[k];
  return (1.0 - w) * levels[k] + w * levels[k + 1];
}

/// Run the scheme from t = 0 to T.  Solver failures do not throw: the
/// returned trajectory carries the partial result and a failure marker.
/// If energy_csv is non-null, energy records stream to it as CSV.
Trajectory run(const InitialData& initial, const Forcing& forcing, const MaterialLaw& material,
               const Grid& grid, const StepConfig& cfg, std::ostream* energy_csv = nullptr);

void write_energy_csv_header(std::ostream& out);
void write_energy_csv_row(std::ostream& out, const EnergyRecord& r);

/// Per-step verdict of the discrete energy balance: the identity residual
/// (solver-tolerance sized when the scheme is implemented right) and the
/// convex-splitting slack with its five components.
struct EnergyAuditRow {
  int k = 0;
  Real kinetic_slack = 0.0;
  Real elastic_slack = 0.0;
  Real cc_slack = 0.0;
  Real gradient_slack = 0.0;
  Real f_slack = 0.0;
  Real slack = 0.0;
  Real identity_residual = 0.0;
  bool ok = true;
};

struct EnergyAudit {
  std::vector<EnergyAuditRow> rows;
  bool all_ok = true;
  Real worst_violation = 0.0;  // most negative normalized slack / residual
};

/// Recompute the per-step energy balance from the stored levels (requires
/// every displacement level) and flag violations beyond 1e-8 relative.
EnergyAudit energy_audit(const Trajectory& tr, const MaterialLaw& material, const Grid& grid,
                         const Forcing& forcing);

/// Pointwise truncation chi+ = max(chi, 0) and the residual check that
/// truncation leaves the displacement equation invariant (c and d constant
/// on the negative axis) and the damage residual unchanged on patches whose
/// quadrature values stay positive at both levels.
struct TruncationReport {
  std::vector<FieldScalar> chi_plus;
  Real max_elasticity_delta = 0.0;
  Real max_damage_delta = 0.0;
  long compared_rows = 0;
};

TruncationReport truncate_chi(const Trajectory& tr, const MaterialLaw& material,
                              const Grid& grid, const Forcing& forcing);

/// Zero traction on no facets; the zero element for boundary data.
BoundaryField zero_boundary(const Grid& grid);

}  // namespace pfdam
