#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pfdam/control.hpp"
#include "pfdam/grid.hpp"
#include "pfdam/material.hpp"
#include "pfdam/stepper.hpp"
#include "pfdam/verify.hpp"

namespace pfdam {

/// Configuration failure with a location anchor: either file line:column (for
/// malformed text) or the dotted key path of the offending entry.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct GeometryConfig {
  int dim = 2;
  std::vector<Real> extents{1.0, 1.0};
  std::vector<int> cells{16, 16};
};

/// Material block.  The coupling is named ("quadratic" = x^2, "constant" = 1,
/// "smoothstep" = 3x^2 - 2x^3) or given as monomial coefficients of a custom
/// polynomial on [0, 1]; either way it runs through the convex/concave
/// extension with ramp width delta.  The potential is the quadratic well
/// (scale/2)(x - center)^2 or a custom polynomial.
struct MaterialConfig {
  std::string coupling = "quadratic";
  std::vector<Real> coupling_coeffs;  // used when coupling == "custom"
  Real delta = 1.0;
  std::string potential = "well";
  Real well_center = 1.0;
  Real well_scale = 1.0;
  std::vector<Real> potential_coeffs;  // used when potential == "custom"
  Real lame_lambda = 1.0;
  Real lame_mu = 1.0;
  Real viscosity = 1.0;       // viscous tensor = viscosity * C
  Real viscous_coupling = 1.0;  // the constant d
};

struct TimeConfig {
  Real T = 0.5;
  Real tau = 0.01;
  Real beta = 1e-3;
  std::string penalty = "moreau_yosida";  // or "smooth"
};

/// Initial data: "uniform" is flat damage chi0 with zero displacement and
/// velocity; "uniform_velocity" adds a constant initial velocity vector.
struct InitialConfig {
  std::string profile = "uniform";
  Real chi0 = 0.95;
  std::vector<Real> v0;  // sized dim for uniform_velocity
};

/// Fixed external load.  Tractions act on one whole edge (axis, side) with a
/// constant spatial amplitude vector and a named time course: "constant",
/// "sine" (amplitude * sin(2 pi t / period)), or "pulse" (piecewise-linear
/// hat rising on [t_on, t_peak], falling on [t_peak, t_off]).
struct ForcingConfig {
  std::string traction = "none";
  int axis = 0;
  int side = 1;
  std::vector<Real> amplitude;  // sized dim
  Real period = 1.0;
  Real t_on = 0.0;
  Real t_peak = 0.0;
  Real t_off = 0.0;
  std::string body = "none";  // or "constant"
  std::vector<Real> body_value;  // sized dim
};

struct OutputConfig {
  std::string dir = "out";
  std::string energy_csv = "energy.csv";
  std::string summary = "summary.txt";
  int snapshot_every = 0;  // 0: final state only; m > 0: every m-th level
};

/// Parameters of the verification suites (sweeps reuse the simulate scenario).
struct VerifyConfig {
  std::vector<Real> betas{4e-3, 2e-3, 1e-3, 5e-4};
  std::vector<Real> taus{0.05, 0.025, 0.0125};
  Real tau_ref = 0.0015625;  // 8x finer than the finest swept step
  std::vector<Real> deltas{1e-4, 1e-3, 1e-2};  // perturbation magnitudes, increasing
  int oracle_trials = 100;
  unsigned seed = 42;
};

/// Control block: one spatial edge profile times piecewise-linear time hats.
/// Every coefficient lives in [-bound, bound]; targets are constant fields.
struct ControlBlockConfig {
  bool enabled = false;
  int axis = 0;
  int side = 1;
  std::vector<Real> amplitude;  // spatial profile on the edge, sized dim
  std::vector<Real> time_nodes{0.0, 0.5};
  Real bound = 3.0;
  Real norm_cap = 1e6;
  Real lambda_Q = 0.0;
  Real lambda_Omega = 0.0;
  Real lambda_Sigma = 1.0;
  Real target_Q = 1.0;    // constant running target, used when lambda_Q > 0
  Real target_T = 1.0;    // constant terminal target, used when lambda_Omega > 0
  bool quadratic_tracking = false;
  std::vector<Real> beta_schedule{1e-1, 1e-2, 1e-3, 1e-4};
  int max_evals = 400;
  Real initial_step = 0.25;
  Real step_tol = 1e-3;
  int restarts = 5;
  unsigned seed = 42;
  bool use_gradient = false;
  Real continuation_tol = 1e-3;
  std::string anchor_file;  // adapted runs read the anchor control here
};

/// One fully specified run.  Parsed from JSON text; unknown keys and
/// ill-typed or out-of-range values are rejected with an anchored message.
struct RunConfig {
  GeometryConfig geometry;
  MaterialConfig material;
  TimeConfig time;
  InitialConfig initial;
  ForcingConfig forcing;
  OutputConfig output;
  VerifyConfig verify;
  ControlBlockConfig control;

  void validate() const;  // cross-field invariants (throws ConfigError)
};

/// Named complete configurations: "standard" (unit square 16x16, sinusoidal
/// compressive edge pull), "healing" (flat start below a raised well plus a
/// damaging traction pulse), "control-1d" (bar with a two-node end control).
RunConfig preset(const std::string& name);

/// Parse JSON text, applying an optional top-level "preset" base first and
/// the remaining keys as overrides.  Throws ConfigError with a line:column
/// anchor for malformed text and a key-path anchor for schema violations.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical emission: sorted keys, two-space indent, round-trip exact
/// numbers.  parse(emit(cfg)) reproduces cfg field for field.
std::string emit_config(const RunConfig& cfg);

/// fnv1a hash of the canonical emission, as 16 hex digits.
std::string config_fingerprint(const RunConfig& cfg);

/// Provenance line stamped into every artifact: tool version + config hash.
std::string provenance_line(const RunConfig& cfg);

// Builders from the validated blocks to the solver types.
Grid build_geometry(const GeometryConfig& g);
MaterialLaw build_material(const MaterialConfig& m, int dim);
StepConfig build_step(const TimeConfig& t);
InitialData build_initial(const InitialConfig& i, const Grid& grid);
Forcing build_forcing(const ForcingConfig& f, const Grid& grid);
/// Scenario = initial data + fixed forcing, the unit the sweeps rerun.
Scenario build_scenario(const RunConfig& cfg, const Grid& grid);
/// Zero-coefficient control over the configured basis (requires enabled).
ControlVector build_control_vector(const ControlBlockConfig& c, const Grid& grid, Real T);
/// Inner problem + objective for the optimizer (requires enabled).
ControlProblem build_control_problem(const RunConfig& cfg, const Grid& grid);

}  // namespace pfdam
