#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pfdam/stepper.hpp"

namespace pfdam {

/// Shape of a traction control: spatial boundary profiles tensor hat
/// functions on a coarse time grid.  A concrete control stores one
/// coefficient per (shape, time node) pair; in time it is the piecewise
/// linear interpolant of its nodal coefficients, clamped outside the node
/// range.
struct ControlBasis {
  std::vector<BoundaryField> shapes;
  std::vector<Real> time_nodes;  // strictly increasing, at least two

  int space_size() const { return static_cast<int>(shapes.size()); }
  int time_size() const { return static_cast<int>(time_nodes.size()); }
  int size() const { return space_size() * time_size(); }
  /// Value of time hat j at t (clamped: constant beyond the end nodes).
  Real hat(int j, Real t) const;

  void validate(const Grid& grid) const;
};

/// A control point: coefficients over a shared basis plus its admissible
/// set, the per-coefficient box [lower, upper] (containing 0) intersected
/// with the norm-surrogate ball of radius norm_cap.
struct ControlVector {
  std::shared_ptr<const ControlBasis> basis;
  Eigen::VectorXd coeffs;  // shape-major: coefficient (s, j) at s*time_size+j
  Eigen::VectorXd lower, upper;
  Real norm_cap = 1e6;

  Real coeff(int shape, int node) const;
  /// Traction at time t: sum of shapes weighted by their time interpolants.
  BoundaryField traction(Real t) const;
  /// The control as run() forcing (body load stays empty).
  Forcing forcing() const;

  void validate() const;
};

/// Quadratic forms of a basis: the surface L2 Gram (boundary mass in space,
/// exact hat products in time) and the time-difference form surrogating the
/// H1-in-time seminorm.
struct ControlGram {
  Eigen::MatrixXd l2;
  Eigen::MatrixXd h1t;

  Real l2_norm2(const Eigen::VectorXd& c) const { return c.dot(l2 * c); }
  Real surrogate_norm2(const Eigen::VectorXd& c) const { return c.dot((l2 + h1t) * c); }
};

ControlGram control_gram(const ControlBasis& basis, const Grid& grid);

/// Clip to the box, then rescale toward 0 when the surrogate norm exceeds
/// the cap (0 lies in the box, so rescaling preserves box feasibility).
/// Idempotent: inputs within a 1e-12 relative band of the cap pass through
/// unchanged.
ControlVector project_admissible(const ControlVector& b, const ControlGram& gram);
bool is_admissible(const ControlVector& b, const ControlGram& gram);

/// Cost weights, tracking targets, and optimizer settings.
struct ControlConfig {
  Real lambda_Q = 0.0;      // weight of the space-time tracking term
  Real lambda_Omega = 0.0;  // weight of the terminal tracking term
  Real lambda_Sigma = 1.0;  // weight of the control norm term
  std::function<FieldScalar(Real)> chi_Q;  // space-time target, sampled at run levels
  FieldScalar chi_T;                       // terminal target
  // false: sup-norm tracking (max over nodes and levels).  true: quadratic
  // tracking (mass-matrix norms, time sums weighted by tau), the smooth
  // variant of the same objective.
  bool quadratic_tracking = false;

  std::vector<Real> beta_schedule;  // strictly decreasing penalty levels

  int max_evals = 400;       // total run budget per solve (split over restarts)
  Real initial_step = 0.25;  // poll step, relative to each coefficient's box width
  Real step_tol = 1e-3;      // stop when every relative step is below this
  int restarts = 5;          // seeded poll restarts (first one uses the guess)
  unsigned seed = 42;
  bool use_gradient = false;  // projected finite-difference descent; needs
                              // lambda_Q = lambda_Omega = 0 (smooth cost)
  Real continuation_tol = 1e-3;

  std::optional<ControlVector> anchor;  // proximal center of adapted solves

  void validate() const;
};

/// Tracking cost of a completed run under control b:
///   lambda_Q/2 * max over nodes and levels of |chi - chi_Q|
/// + lambda_Omega/2 * max over nodes of |chi(T) - chi_T|
/// + lambda_Sigma/2 * surface-L2 norm squared of b.
/// With quadratic_tracking set, the two sup norms become the tau-weighted
/// squared mass norm over levels and the squared mass norm at T.
Real cost(const Trajectory& tr, const ControlVector& b, const ControlConfig& cfg,
          const Grid& grid);

/// cost plus the proximal term  1/2 * surface-L2 norm squared of b - anchor.
Real adapted_cost(const Trajectory& tr, const ControlVector& b, const ControlConfig& cfg,
                  const Grid& grid);

/// Data of the inner initial-boundary value problem a control drives.  The
/// control supplies the traction; an optional fixed body load rides along.
struct ControlProblem {
  InitialData initial;
  StepConfig cfg;  // beta is supplied per solve
  ControlConfig control;
  std::function<FieldVector(Real)> body;
};

struct EvaluatedControl {
  Real j = 0.0;
  Trajectory trajectory;
};

/// Runs the scheme under traction b and evaluates the tracking cost on the
/// resulting damage trajectory.  Deterministic; a solver failure throws
/// with the offending coefficients in the message.
EvaluatedControl reduced_cost(const ControlVector& b, Real beta, const ControlProblem& problem,
                              const MaterialLaw& material, const Grid& grid);

/// Outcome of one control solve.
struct ControlResult {
  ControlVector b;
  Real j = 0.0;
  Trajectory trajectory;
  int evals = 0;
  bool stationary = false;    // step tolerance reached within budget
  Real anchor_distance = 0.0; // adapted solves: surface-L2 distance to the anchor
};

/// Minimize the tracking cost over the admissible set at fixed beta by
/// projected pattern search (or projected finite-difference descent when
/// configured): poll both directions of every coefficient, take the best
/// strict improvement, halve the step otherwise.  Failed inner solves score
/// +infinity.  Never returns a value above the cost of the (projected)
/// initial guess.
ControlResult solve_P_beta(Real beta, const ControlProblem& problem, const MaterialLaw& material,
                           const Grid& grid, const ControlVector& guess);

/// Same search on the anchored cost (requires problem.control.anchor).
ControlResult solve_adapted(Real beta, const ControlProblem& problem, const MaterialLaw& material,
                            const Grid& grid, const ControlVector& guess);

struct ContinuationLevel {
  Real beta = 0.0;
  Real j = 0.0;
  Real control_norm = 0.0;  // surface-L2 norm of the level's minimizer
  Real control_step = 0.0;  // distance to the previous level's minimizer
  int evals = 0;
  bool stationary = false;
  Real anchor_distance = 0.0;
};

/// Vanishing-penalty continuation: solve along the decreasing schedule,
/// warm-starting each level from the previous minimizer (restarts explore
/// only the first level).  Converged when the consecutive cost gaps
/// decrease and the final gap is at most continuation_tol.
struct ContinuationReport {
  std::vector<ContinuationLevel> levels;
  ControlVector best;  // minimizer of the last completed level
  bool adapted = false;
  bool converged = false;
  bool partial = false;
  std::string failure;

  void write_csv(std::ostream& out) const;
};

ContinuationReport beta_continuation(const ControlProblem& problem, const MaterialLaw& material,
                                     const Grid& grid, const ControlVector& guess, bool adapted);

/// Plain-text persistence: a basis fingerprint plus the coefficient list.
/// Leading '#' lines (provenance) are skipped on read; read_control verifies
/// the fingerprint against the supplied basis.
void write_control(std::ostream& out, const ControlVector& b, const std::string& provenance = "");
ControlVector read_control(std::istream& in, const ControlVector& prototype);
std::string basis_fingerprint(const ControlBasis& basis);

}  // namespace pfdam
