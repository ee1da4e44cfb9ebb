#include "pfdam/control.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pfdam/util.hpp"

namespace pfdam {

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();
// Relative slack on the norm cap so projecting twice is a bitwise no-op.
constexpr Real kCapBand = 1e-12;

Real sqrt_clamped(Real x) { return std::sqrt(std::max(Real(0), x)); }

std::string describe_coeffs(const Eigen::VectorXd& c) {
  std::string out = "[";
  for (int i = 0; i < c.size(); ++i) {
    if (i) out += ", ";
    out += format_exact(c[i]);
  }
  out += "]";
  return out;
}

}  // namespace

Real ControlBasis::hat(int j, Real t) const {
  const int n = time_size();
  if (t <= time_nodes.front()) return j == 0 ? 1.0 : 0.0;
  if (t >= time_nodes.back()) return j == n - 1 ? 1.0 : 0.0;
  const int i =
      static_cast<int>(std::upper_bound(time_nodes.begin(), time_nodes.end(), t) -
                       time_nodes.begin()) -
      1;
  const Real h = time_nodes[i + 1] - time_nodes[i];
  if (j == i) return (time_nodes[i + 1] - t) / h;
  if (j == i + 1) return (t - time_nodes[i]) / h;
  return 0.0;
}

void ControlBasis::validate(const Grid& grid) const {
  if (shapes.empty()) throw std::invalid_argument("control basis: no spatial shapes");
  if (time_nodes.size() < 2)
    throw std::invalid_argument("control basis: need at least two time nodes");
  for (std::size_t j = 0; j < time_nodes.size(); ++j) {
    if (!std::isfinite(time_nodes[j]) || (j > 0 && time_nodes[j] <= time_nodes[j - 1]))
      throw std::invalid_argument("control basis: time nodes must be strictly increasing");
  }
  const int facet_count = static_cast<int>(grid.boundary_facets().size());
  for (const BoundaryField& s : shapes) {
    if (s.nodal.size() != grid.dim() * grid.node_count())
      throw std::invalid_argument("control basis: shape length does not match the grid");
    require_boundary_support(grid, s.nodal);
    if (s.facets.empty())
      throw std::invalid_argument("control basis: shape has no active facets");
    for (int f : s.facets)
      if (f < 0 || f >= facet_count)
        throw std::invalid_argument("control basis: facet index out of range");
  }
}

Real ControlVector::coeff(int shape, int node) const {
  return coeffs[shape * basis->time_size() + node];
}

BoundaryField ControlVector::traction(Real t) const {
  const ControlBasis& bs = *basis;
  const int nt = bs.time_size();
  BoundaryField out;
  out.nodal = FieldVector::Zero(bs.shapes.front().nodal.size());
  for (int s = 0; s < bs.space_size(); ++s) {
    Real w = 0.0;
    for (int j = 0; j < nt; ++j) w += coeffs[s * nt + j] * bs.hat(j, t);
    out.nodal += w * bs.shapes[s].nodal;
    out.facets.insert(out.facets.end(), bs.shapes[s].facets.begin(), bs.shapes[s].facets.end());
  }
  std::sort(out.facets.begin(), out.facets.end());
  out.facets.erase(std::unique(out.facets.begin(), out.facets.end()), out.facets.end());
  return out;
}

Forcing ControlVector::forcing() const {
  ControlVector copy = *this;  // shares the basis, owns the coefficients
  Forcing f;
  f.traction = [copy](Real t) { return copy.traction(t); };
  return f;
}

void ControlVector::validate() const {
  if (!basis) throw std::invalid_argument("control: no basis");
  const int n = basis->size();
  if (coeffs.size() != n || lower.size() != n || upper.size() != n)
    throw std::invalid_argument("control: coefficient and bound lengths must match the basis");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(coeffs[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw std::invalid_argument("control: coefficients and bounds must be finite");
    if (lower[i] > upper[i])
      throw std::invalid_argument("control: empty coefficient box");
    if (lower[i] > 0.0 || upper[i] < 0.0)
      throw std::invalid_argument("control: the coefficient box must contain 0");
  }
  if (!(norm_cap > 0.0) || !std::isfinite(norm_cap))
    throw std::invalid_argument("control: the norm cap must be positive");
}

ControlGram control_gram(const ControlBasis& basis, const Grid& grid) {
  basis.validate(grid);
  const int ns = basis.space_size();
  const int nt = basis.time_size();

  const SparseMat Mb = assemble_boundary_mass(grid, grid.dim());
  Eigen::MatrixXd Gs(ns, ns);
  for (int a = 0; a < ns; ++a) {
    const FieldVector Ma = Mb * basis.shapes[a].nodal;
    for (int b = a; b < ns; ++b) {
      Gs(a, b) = Ma.dot(basis.shapes[b].nodal);
      Gs(b, a) = Gs(a, b);
    }
  }

  // Exact products of the time hats over the node span, plus the derivative
  // products that make up the time-difference form.
  Eigen::MatrixXd Gt = Eigen::MatrixXd::Zero(nt, nt);
  Eigen::MatrixXd Ht = Eigen::MatrixXd::Zero(nt, nt);
  for (int j = 0; j + 1 < nt; ++j) {
    const Real h = basis.time_nodes[j + 1] - basis.time_nodes[j];
    Gt(j, j) += h / 3.0;
    Gt(j + 1, j + 1) += h / 3.0;
    Gt(j, j + 1) += h / 6.0;
    Gt(j + 1, j) += h / 6.0;
    Ht(j, j) += 1.0 / h;
    Ht(j + 1, j + 1) += 1.0 / h;
    Ht(j, j + 1) -= 1.0 / h;
    Ht(j + 1, j) -= 1.0 / h;
  }

  ControlGram gram;
  gram.l2.resize(ns * nt, ns * nt);
  gram.h1t.resize(ns * nt, ns * nt);
  for (int a = 0; a < ns; ++a)
    for (int b = 0; b < ns; ++b)
      for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nt; ++j) {
          gram.l2(a * nt + i, b * nt + j) = Gs(a, b) * Gt(i, j);
          gram.h1t(a * nt + i, b * nt + j) = Gs(a, b) * Ht(i, j);
        }
  return gram;
}

ControlVector project_admissible(const ControlVector& b, const ControlGram& gram) {
  b.validate();
  ControlVector out = b;
  out.coeffs = out.coeffs.cwiseMax(out.lower).cwiseMin(out.upper);
  const Real n2 = gram.surrogate_norm2(out.coeffs);
  const Real cap2 = out.norm_cap * out.norm_cap;
  if (n2 > cap2 * (1.0 + kCapBand)) out.coeffs *= out.norm_cap / std::sqrt(n2);
  return out;
}

bool is_admissible(const ControlVector& b, const ControlGram& gram) {
  b.validate();
  if ((b.coeffs.array() < b.lower.array()).any()) return false;
  if ((b.coeffs.array() > b.upper.array()).any()) return false;
  return gram.surrogate_norm2(b.coeffs) <= b.norm_cap * b.norm_cap * (1.0 + kCapBand);
}

void ControlConfig::validate() const {
  if (!(lambda_Q >= 0.0) || !(lambda_Omega >= 0.0) || !(lambda_Sigma >= 0.0) ||
      !std::isfinite(lambda_Q) || !std::isfinite(lambda_Omega) || !std::isfinite(lambda_Sigma))
    throw std::invalid_argument("control config: cost weights must be finite and nonnegative");
  if (lambda_Q + lambda_Omega + lambda_Sigma <= 0.0)
    throw std::invalid_argument("control config: at least one cost weight must be positive");
  if (lambda_Q > 0.0 && !chi_Q)
    throw std::invalid_argument("control config: a space-time target is required when its weight is positive");
  if (lambda_Omega > 0.0 && chi_T.size() == 0)
    throw std::invalid_argument("control config: a terminal target is required when its weight is positive");
  if (max_evals < 1) throw std::invalid_argument("control config: need a positive run budget");
  if (!(initial_step > 0.0) || !std::isfinite(initial_step))
    throw std::invalid_argument("control config: the initial step must be positive");
  if (!(step_tol > 0.0) || step_tol > initial_step)
    throw std::invalid_argument("control config: the step tolerance must lie in (0, initial_step]");
  if (restarts < 1) throw std::invalid_argument("control config: need at least one restart");
  if (use_gradient && (lambda_Q > 0.0 || lambda_Omega > 0.0))
    throw std::invalid_argument("control config: gradient descent needs both tracking weights zero");
  if (!(continuation_tol > 0.0) || !std::isfinite(continuation_tol))
    throw std::invalid_argument("control config: the continuation tolerance must be positive");
  if (anchor) anchor->validate();
}

namespace {

// Anchored costs only make sense for coefficients of one and the same basis.
void require_same_basis(const ControlVector& a, const ControlVector& b, const char* who) {
  if (a.basis == b.basis) return;
  if (!a.basis || !b.basis || basis_fingerprint(*a.basis) != basis_fingerprint(*b.basis))
    throw std::invalid_argument(std::string(who) + ": anchor and control use different bases");
}

// Space-time and terminal tracking terms: sup norms by default, tau-weighted
// mass norms in the quadratic variant.
Real tracking_terms(const Trajectory& tr, const ControlConfig& cfg, const Grid& grid) {
  Real term_Q = 0.0;
  Real term_T = 0.0;
  SparseMat M;
  if (cfg.quadratic_tracking && (cfg.lambda_Q > 0.0 || cfg.lambda_Omega > 0.0))
    M = assemble_mass(grid, 1);
  if (cfg.lambda_Q > 0.0) {
    for (int k = 0; k <= tr.steps; ++k) {
      const FieldScalar target = cfg.chi_Q(tr.time(k));
      if (target.size() != tr.chi[k].size())
        throw std::invalid_argument("cost: the space-time target does not match the grid");
      const FieldScalar dev = tr.chi[k] - target;
      if (cfg.quadratic_tracking) {
        if (k > 0) term_Q += tr.tau * dev.dot(M * dev);
      } else {
        term_Q = std::max(term_Q, dev.cwiseAbs().maxCoeff());
      }
    }
  }
  if (cfg.lambda_Omega > 0.0) {
    if (cfg.chi_T.size() != tr.chi.back().size())
      throw std::invalid_argument("cost: the terminal target does not match the grid");
    const FieldScalar dev = tr.chi.back() - cfg.chi_T;
    term_T = cfg.quadratic_tracking ? dev.dot(M * dev) : dev.cwiseAbs().maxCoeff();
  }
  return 0.5 * (cfg.lambda_Q * term_Q + cfg.lambda_Omega * term_T);
}

}  // namespace

Real cost(const Trajectory& tr, const ControlVector& b, const ControlConfig& cfg,
          const Grid& grid) {
  cfg.validate();
  b.validate();
  if (!tr.complete()) throw std::invalid_argument("cost: trajectory is incomplete");
  Real j = tracking_terms(tr, cfg, grid);
  if (cfg.lambda_Sigma > 0.0) {
    const ControlGram gram = control_gram(*b.basis, grid);
    j += 0.5 * cfg.lambda_Sigma * gram.l2_norm2(b.coeffs);
  }
  return j;
}

Real adapted_cost(const Trajectory& tr, const ControlVector& b, const ControlConfig& cfg,
                  const Grid& grid) {
  cfg.validate();
  if (!cfg.anchor) throw std::invalid_argument("adapted_cost: no anchor control set");
  require_same_basis(b, *cfg.anchor, "adapted_cost");
  const ControlGram gram = control_gram(*b.basis, grid);
  return cost(tr, b, cfg, grid) +
         0.5 * gram.l2_norm2(b.coeffs - cfg.anchor->coeffs);
}

EvaluatedControl reduced_cost(const ControlVector& b, Real beta, const ControlProblem& problem,
                              const MaterialLaw& material, const Grid& grid) {
  b.validate();
  b.basis->validate(grid);
  problem.control.validate();
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("reduced_cost: beta must be positive");

  StepConfig cfg = problem.cfg;
  cfg.beta = Penalty{beta, cfg.beta.kind};
  Forcing f = b.forcing();
  f.body = problem.body;
  Trajectory tr;
  try {
    tr = run(problem.initial, f, material, grid, cfg);
  } catch (const std::exception& ex) {
    throw std::runtime_error("reduced_cost: solver failed under control " +
                             describe_coeffs(b.coeffs) + ": " + ex.what());
  }
  if (!tr.complete())
    throw std::runtime_error("reduced_cost: solver failed under control " +
                             describe_coeffs(b.coeffs) + " at step " +
                             std::to_string(tr.failed_at) + ": " + tr.failure);

  EvaluatedControl out;
  out.j = cost(tr, b, problem.control, grid);
  out.trajectory = std::move(tr);
  return out;
}

namespace {

struct SearchContext {
  const ControlProblem* problem;
  const MaterialLaw* material;
  const Grid* grid;
  ControlGram gram;
  Real beta = 0.0;
  bool adapted = false;
};

struct Eval {
  Real j = kInf;
  Trajectory tr;
  std::string error;
  bool ok = false;
};

// One objective evaluation: a full run plus the tracking cost.  Never
// throws; failures come back as +infinity so poll workers stay exception
// free under parallel_for.
Eval evaluate(const SearchContext& ctx, const ControlVector& b) {
  Eval e;
  try {
    StepConfig cfg = ctx.problem->cfg;
    cfg.beta = Penalty{ctx.beta, cfg.beta.kind};
    Forcing f = b.forcing();
    f.body = ctx.problem->body;
    Trajectory tr = run(ctx.problem->initial, f, *ctx.material, *ctx.grid, cfg);
    if (!tr.complete()) {
      e.error = tr.failure;
      return e;
    }
    const ControlConfig& cc = ctx.problem->control;
    e.j = ctx.adapted ? adapted_cost(tr, b, cc, *ctx.grid) : cost(tr, b, cc, *ctx.grid);
    e.tr = std::move(tr);
    e.ok = true;
  } catch (const std::exception& ex) {
    e.j = kInf;
    e.ok = false;
    e.error = ex.what();
  }
  return e;
}

std::vector<Eval> evaluate_batch(const SearchContext& ctx, const std::vector<ControlVector>& trials) {
  std::vector<Eval> evs(trials.size());
  parallel_for(static_cast<std::int64_t>(trials.size()), [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t i = b0; i < b1; ++i) evs[i] = evaluate(ctx, trials[i]);
  });
  return evs;
}

struct RestartOutcome {
  ControlVector b;
  Eval eval;
  int evals = 0;
  bool started = false;     // the start point itself was solvable
  bool stationary = false;  // step tolerance reached within budget
};

// Projected compass search: poll both directions of every coefficient, move
// to the best strict improvement, halve the step otherwise.  Poll points are
// evaluated in parallel and merged in index order, so the path is
// deterministic.
RestartOutcome pattern_search(const SearchContext& ctx, ControlVector start, int budget) {
  const ControlConfig& cc = ctx.problem->control;
  RestartOutcome out;
  ControlVector x = project_admissible(start, ctx.gram);
  Eval cur = evaluate(ctx, x);
  out.evals = 1;
  if (!cur.ok) {
    out.b = std::move(x);
    out.eval = std::move(cur);
    return out;
  }
  out.started = true;

  const Eigen::VectorXd width = x.upper - x.lower;
  Eigen::VectorXd step = cc.initial_step * width;
  const int n = static_cast<int>(x.coeffs.size());
  auto converged = [&]() {
    for (int i = 0; i < n; ++i)
      if (width[i] > 0.0 && step[i] > cc.step_tol * width[i]) return false;
    return true;
  };

  while (out.evals < budget && !converged()) {
    std::vector<ControlVector> trials;
    trials.reserve(2 * n);
    for (int i = 0; i < n; ++i) {
      if (width[i] <= 0.0) continue;
      for (Real sgn : {1.0, -1.0}) {
        ControlVector cand = x;
        cand.coeffs[i] += sgn * step[i];
        cand = project_admissible(cand, ctx.gram);
        if ((cand.coeffs.array() == x.coeffs.array()).all()) continue;
        trials.push_back(std::move(cand));
      }
    }
    if (trials.empty()) break;  // every move is pinned by the box
    const int cap = budget - out.evals;
    if (static_cast<int>(trials.size()) > cap) trials.resize(cap);

    std::vector<Eval> evs = evaluate_batch(ctx, trials);
    out.evals += static_cast<int>(trials.size());

    int best = -1;
    for (int i = 0; i < static_cast<int>(evs.size()); ++i)
      if (evs[i].ok && (best < 0 || evs[i].j < evs[best].j)) best = i;
    if (best >= 0 && evs[best].j < cur.j) {
      x = std::move(trials[best]);
      cur = std::move(evs[best]);
    } else {
      step *= 0.5;
    }
  }
  out.stationary = converged();
  out.b = std::move(x);
  out.eval = std::move(cur);
  return out;
}

// Projected descent on finite-difference gradients; valid only for the
// smooth pure-norm cost (both tracking weights zero).
RestartOutcome gradient_descent(const SearchContext& ctx, ControlVector start, int budget) {
  const ControlConfig& cc = ctx.problem->control;
  RestartOutcome out;
  ControlVector x = project_admissible(start, ctx.gram);
  Eval cur = evaluate(ctx, x);
  out.evals = 1;
  if (!cur.ok) {
    out.b = std::move(x);
    out.eval = std::move(cur);
    return out;
  }
  out.started = true;

  const Eigen::VectorXd width = x.upper - x.lower;
  const Real wmax = std::max(width.maxCoeff(), Real(1e-30));
  const int n = static_cast<int>(x.coeffs.size());
  Real alpha = 1.0;  // grows on success so flat objectives still move

  while (out.evals + 2 * n + 1 <= budget) {
    // Central differences of the unprojected objective around x.
    std::vector<ControlVector> probes;
    probes.reserve(2 * n);
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i) {
      h[i] = 1e-6 * (width[i] > 0.0 ? width[i] : 1.0);
      for (Real sgn : {1.0, -1.0}) {
        ControlVector p = x;
        p.coeffs[i] += sgn * h[i];
        probes.push_back(std::move(p));
      }
    }
    std::vector<Eval> evs = evaluate_batch(ctx, probes);
    out.evals += static_cast<int>(evs.size());
    bool bad = false;
    for (const Eval& e : evs) bad = bad || !e.ok;
    if (bad) break;

    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = (evs[2 * i].j - evs[2 * i + 1].j) / (2.0 * h[i]);

    bool moved = false;
    Real trial = alpha;
    while (out.evals < budget && trial >= 1e-12) {
      ControlVector cand = x;
      cand.coeffs -= trial * g;
      cand = project_admissible(cand, ctx.gram);
      Eval ec = evaluate(ctx, cand);
      ++out.evals;
      const Real sufficient = 1e-4 / trial * (cand.coeffs - x.coeffs).squaredNorm();
      if (ec.ok && ec.j < cur.j && ec.j <= cur.j - sufficient) {
        const Real move = (cand.coeffs - x.coeffs).cwiseAbs().maxCoeff();
        x = std::move(cand);
        cur = std::move(ec);
        moved = true;
        alpha = std::min(trial * 2.0, Real(1e6));
        if (move <= cc.step_tol * wmax) out.stationary = true;
        break;
      }
      trial *= 0.5;
    }
    if (!moved) {
      out.stationary = true;  // no descent along the projected gradient path
      break;
    }
    if (out.stationary) break;
  }
  out.b = std::move(x);
  out.eval = std::move(cur);
  return out;
}

ControlResult minimize(Real beta, const ControlProblem& problem, const MaterialLaw& material,
                       const Grid& grid, const ControlVector& guess, bool adapted) {
  const ControlConfig& cc = problem.control;
  cc.validate();
  guess.validate();
  guess.basis->validate(grid);
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("solve: beta must lie in (0, 1)");
  SearchContext ctx{&problem, &material, &grid, control_gram(*guess.basis, grid), beta, adapted};
  if (adapted) {
    if (!cc.anchor) throw std::invalid_argument("solve_adapted: no anchor control set");
    require_same_basis(guess, *cc.anchor, "solve_adapted");
    if (!is_admissible(*cc.anchor, ctx.gram))
      throw std::invalid_argument("solve_adapted: the anchor control is not admissible");
  }
  const int budget = std::max(1, cc.max_evals / cc.restarts);

  RestartOutcome best;
  bool any = false;
  int total_evals = 0;
  std::string last_error;
  for (int r = 0; r < cc.restarts; ++r) {
    ControlVector start = guess;
    if (r > 0) {
      std::mt19937 gen(cc.seed + static_cast<unsigned>(r));
      for (int i = 0; i < start.coeffs.size(); ++i) {
        std::uniform_real_distribution<Real> pick(start.lower[i], start.upper[i]);
        start.coeffs[i] = start.lower[i] < start.upper[i] ? pick(gen) : start.lower[i];
      }
    }
    RestartOutcome o = cc.use_gradient ? gradient_descent(ctx, std::move(start), budget)
                                       : pattern_search(ctx, std::move(start), budget);
    total_evals += o.evals;
    if (!o.started) {
      last_error = o.eval.error;
      continue;
    }
    if (!any || o.eval.j < best.eval.j) {
      best = std::move(o);
      any = true;
    }
  }
  if (!any)
    throw std::runtime_error("solve: no admissible start could be evaluated: " + last_error);

  ControlResult res;
  res.b = std::move(best.b);
  res.j = best.eval.j;
  res.trajectory = std::move(best.eval.tr);
  res.evals = total_evals;
  res.stationary = best.stationary;
  if (adapted)
    res.anchor_distance = sqrt_clamped(ctx.gram.l2_norm2(res.b.coeffs - cc.anchor->coeffs));
  return res;
}

}  // namespace

ControlResult solve_P_beta(Real beta, const ControlProblem& problem, const MaterialLaw& material,
                           const Grid& grid, const ControlVector& guess) {
  return minimize(beta, problem, material, grid, guess, false);
}

ControlResult solve_adapted(Real beta, const ControlProblem& problem, const MaterialLaw& material,
                            const Grid& grid, const ControlVector& guess) {
  return minimize(beta, problem, material, grid, guess, true);
}

ContinuationReport beta_continuation(const ControlProblem& problem, const MaterialLaw& material,
                                     const Grid& grid, const ControlVector& guess, bool adapted) {
  const std::vector<Real>& schedule = problem.control.beta_schedule;
  if (schedule.empty())
    throw std::invalid_argument("beta_continuation: empty penalty schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0 && schedule[i] < 1.0))
      throw std::invalid_argument("beta_continuation: schedule entries must lie in (0, 1)");
    if (i > 0 && schedule[i] >= schedule[i - 1])
      throw std::invalid_argument("beta_continuation: the schedule must decrease strictly");
  }
  guess.validate();
  guess.basis->validate(grid);

  ContinuationReport rep;
  rep.adapted = adapted;
  rep.best = guess;
  const ControlGram gram = control_gram(*guess.basis, grid);

  ControlProblem sub = problem;
  ControlVector warm = guess;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (i == 1) sub.control.restarts = 1;  // warm levels only poll locally
    ControlResult r;
    try {
      r = adapted ? solve_adapted(schedule[i], sub, material, grid, warm)
                  : solve_P_beta(schedule[i], sub, material, grid, warm);
    } catch (const std::exception& ex) {
      rep.partial = true;
      rep.failure = ex.what();
      break;
    }
    ContinuationLevel lv;
    lv.beta = schedule[i];
    lv.j = r.j;
    lv.control_norm = sqrt_clamped(gram.l2_norm2(r.b.coeffs));
    lv.control_step = i == 0 ? 0.0 : sqrt_clamped(gram.l2_norm2(r.b.coeffs - warm.coeffs));
    lv.evals = r.evals;
    lv.stationary = r.stationary;
    lv.anchor_distance = r.anchor_distance;
    rep.levels.push_back(lv);
    warm = r.b;
    rep.best = std::move(r.b);
  }

  if (!rep.partial && rep.levels.size() >= 2) {
    bool ok = true;
    Real prev_gap = kInf;
    Real gap = 0.0;
    for (std::size_t i = 1; i < rep.levels.size(); ++i) {
      gap = std::abs(rep.levels[i].j - rep.levels[i - 1].j);
      if (gap > prev_gap * (1.0 + 1e-9) + 1e-15) ok = false;
      prev_gap = gap;
    }
    rep.converged = ok && gap <= problem.control.continuation_tol;
  }
  return rep;
}

void ContinuationReport::write_csv(std::ostream& out) const {
  out << "beta,cost,control_norm,control_step,evals,converged\n";
  for (const ContinuationLevel& lv : levels) {
    out << format_exact(lv.beta) << ',' << format_exact(lv.j) << ','
        << format_exact(lv.control_norm) << ',' << format_exact(lv.control_step) << ','
        << lv.evals << ',' << (lv.stationary ? 1 : 0) << '\n';
  }
}

std::string basis_fingerprint(const ControlBasis& basis) {
  std::string blob = "control-basis v1\ntime";
  for (Real t : basis.time_nodes) blob += ' ' + format_exact(t);
  for (const BoundaryField& s : basis.shapes) {
    blob += "\nshape";
    for (int i = 0; i < s.nodal.size(); ++i) blob += ' ' + format_exact(s.nodal[i]);
    blob += "\nfacets";
    for (int f : s.facets) blob += ' ' + std::to_string(f);
  }
  return hex64(fnv1a(blob));
}

void write_control(std::ostream& out, const ControlVector& b, const std::string& provenance) {
  b.validate();
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "control v1\n";
  out << "basis " << basis_fingerprint(*b.basis) << '\n';
  out << "coeffs " << b.coeffs.size() << '\n';
  for (int i = 0; i < b.coeffs.size(); ++i) out << format_exact(b.coeffs[i]) << '\n';
}

ControlVector read_control(std::istream& in, const ControlVector& prototype) {
  prototype.validate();
  while (in >> std::ws && in.peek() == '#') {  // provenance comments
    std::string skip;
    std::getline(in, skip);
  }
  std::string magic, version, key;
  if (!(in >> magic >> version) || magic != "control" || version != "v1")
    throw std::runtime_error("read_control: not a control coefficient file");
  std::string fp;
  if (!(in >> key >> fp) || key != "basis")
    throw std::runtime_error("read_control: missing basis fingerprint");
  if (fp != basis_fingerprint(*prototype.basis))
    throw std::runtime_error("read_control: coefficients belong to a different basis");
  long n = 0;
  if (!(in >> key >> n) || key != "coeffs" || n != prototype.coeffs.size())
    throw std::runtime_error("read_control: coefficient count does not match the basis");
  ControlVector out = prototype;
  for (long i = 0; i < n; ++i)
    if (!(in >> out.coeffs[i]))
      throw std::runtime_error("read_control: truncated coefficient list");
  return out;
}

}  // namespace pfdam
