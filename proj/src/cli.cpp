#include "pfdam/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pfdam/config.hpp"
#include "pfdam/util.hpp"
#include "pfdam/verify.hpp"

namespace pfdam {
namespace {

namespace fs = std::filesystem;

const char* json_bool(bool b) { return b ? "true" : "false"; }

/// Every file the driver writes starts with one provenance comment: tool
/// version plus the hash of the effective configuration.
std::ofstream open_artifact(const fs::path& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write \"" + path.string() + "\"");
  out << "# " << provenance_line(cfg) << '\n';
  return out;
}

std::string level_name(const char* field, int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.snap", field, k);
  return buf;
}

// ---------------------------------------------------------------- simulate

int run_simulate(const RunConfig& cfg) {
  const Grid grid = build_geometry(cfg.geometry);
  const MaterialLaw material = build_material(cfg.material, grid.dim());
  const InitialData initial = build_initial(cfg.initial, grid);
  const Forcing forcing = build_forcing(cfg.forcing, grid);
  const StepConfig step = build_step(cfg.time);

  const fs::path dir = cfg.output.dir;
  fs::create_directories(dir);
  const std::string prov = provenance_line(cfg);

  Trajectory tr;
  {
    std::ofstream energy = open_artifact(dir / cfg.output.energy_csv, cfg);
    tr = run(initial, forcing, material, grid, step, &energy);
  }

  EnergyAudit audit;
  if (tr.complete()) {
    save_snapshot((dir / "chi_final.snap").string(), grid, "chi", tr.time(tr.steps), 1,
                  tr.chi.back(), prov);
    save_snapshot((dir / "u_final.snap").string(), grid, "u", tr.time(tr.steps), grid.dim(),
                  tr.u.back(), prov);
    const FieldVector v_final = (tr.u[tr.steps] - tr.u[tr.steps - 1]) / tr.tau;
    save_snapshot((dir / "v_final.snap").string(), grid, "v", tr.time(tr.steps), grid.dim(),
                  v_final, prov);
    if (cfg.output.snapshot_every > 0)
      for (int k = 0; k <= tr.steps; k += cfg.output.snapshot_every) {
        save_snapshot((dir / level_name("chi", k)).string(), grid, "chi", tr.time(k), 1,
                      tr.chi[k], prov);
        save_snapshot((dir / level_name("u", k)).string(), grid, "u", tr.time(k), grid.dim(),
                      tr.u[k], prov);
      }
    audit = energy_audit(tr, material, grid, forcing);
  }

  Real dissipation = 0.0;
  for (const EnergyRecord& r : tr.energy) dissipation += r.dissipation_increment;

  std::ofstream summary = open_artifact(dir / cfg.output.summary, cfg);
  summary << "{\n"
          << "  \"report\": \"simulate\",\n"
          << "  \"steps\": " << tr.steps << ",\n"
          << "  \"complete\": " << json_bool(tr.complete()) << ",\n";
  if (!tr.complete()) summary << "  \"failure\": \"" << tr.failure << "\",\n";
  summary << "  \"final_time\": " << format_exact(tr.time(tr.steps)) << ",\n"
          << "  \"final_free_energy\": " << format_exact(tr.energy.back().free_energy) << ",\n"
          << "  \"final_kinetic\": " << format_exact(tr.energy.back().kinetic) << ",\n"
          << "  \"dissipation_total\": " << format_exact(dissipation) << ",\n"
          << "  \"energy_audit_ok\": " << json_bool(tr.complete() && audit.all_ok) << ",\n"
          << "  \"worst_slack_violation\": " << format_exact(audit.worst_violation) << "\n"
          << "}\n";

  if (!tr.complete()) {
    std::cerr << "simulate: " << tr.failure << '\n';
    return 2;
  }
  std::cout << "simulate: " << tr.steps << " steps, final free energy "
            << format_exact(tr.energy.back().free_energy) << ", energy audit "
            << (audit.all_ok ? "ok" : "VIOLATED") << '\n';
  return audit.all_ok ? 0 : 3;
}

// ------------------------------------------------------------------ verify

/// Random homogeneous single steps: the grid solver against the bisection
/// oracle.  A ramp displacement gives a spatially uniform strain energy, so
/// the nodal solution must match the scalar root at every node.
int verify_oracles(const RunConfig& cfg, const Grid& grid, const MaterialLaw& material,
                   const fs::path& dir) {
  std::ofstream csv = open_artifact(dir / "oracle_trials.csv", cfg);
  csv << "trial,chi_prev,strain_energy,tau,beta,solver,oracle,gap\n";

  const int dim = grid.dim();
  const int n = grid.node_count();
  FieldVector ramp = FieldVector::Zero(dim * n);
  for (int node = 0; node < n; ++node) ramp[dim * node] = grid.node_coord(node).x();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(material.stiffness().voigt_size());

  std::mt19937 rng(cfg.verify.seed);
  std::uniform_real_distribution<double> chi_dist(-0.5, 1.5);
  std::uniform_real_distribution<double> slope_dist(0.0, 0.8);
  std::uniform_real_distribution<double> log_tau(std::log(0.01), std::log(0.2));
  std::uniform_real_distribution<double> log_beta(std::log(1e-3), std::log(1e-1));

  const Real tol = 1e-9;
  Real worst = 0.0;
  for (int trial = 0; trial < cfg.verify.oracle_trials; ++trial) {
    const Real chi0 = chi_dist(rng);
    const Real slope = slope_dist(rng);
    const Real tau = std::exp(log_tau(rng));
    const Real beta = std::exp(log_beta(rng));
    const Penalty penalty = cfg.time.penalty == "smooth" ? Penalty::smooth_variant(beta)
                                                         : Penalty::moreau_yosida(beta);

    State state;
    state.u = slope * ramp;
    state.chi = FieldScalar::Constant(n, chi0);
    StepConfig one;
    one.tau = tau;
    one.T = tau;
    one.beta = penalty;
    const DamageResult sol = damage_step(state, material, penalty, grid, one);

    HomogeneousStep in;
    in.chi_prev = chi0;
    e[0] = slope;
    in.strain_energy = material.stiffness().energy(e);
    in.tau = tau;
    in.beta = penalty;
    const Real root = scalar_oracle(in, material);
    const Real gap = (sol.chi.array() - root).abs().maxCoeff();
    worst = std::max(worst, gap);
    csv << trial << ',' << format_exact(chi0) << ',' << format_exact(in.strain_energy) << ','
        << format_exact(tau) << ',' << format_exact(beta) << ','
        << format_exact(sol.chi.mean()) << ',' << format_exact(root) << ','
        << format_exact(gap) << '\n';
  }

  std::ofstream summary = open_artifact(dir / "oracle_trials.txt", cfg);
  summary << "{\n"
          << "  \"report\": \"oracle_trials\",\n"
          << "  \"trials\": " << cfg.verify.oracle_trials << ",\n"
          << "  \"worst_gap\": " << format_exact(worst) << ",\n"
          << "  \"tolerance\": " << format_exact(tol) << ",\n"
          << "  \"passed\": " << json_bool(worst <= tol) << "\n}\n";
  return worst <= tol ? 0 : 3;
}

int verify_beta(const RunConfig& cfg, const Grid& grid, const MaterialLaw& material,
                const StepConfig& step, const fs::path& dir) {
  const Scenario sc = build_scenario(cfg, grid);
  const SweepReport rep = beta_sweep(sc, cfg.verify.betas, material, grid, step);
  {
    std::ofstream csv = open_artifact(dir / "beta_sweep.csv", cfg);
    rep.write_csv(csv);
    std::ofstream summary = open_artifact(dir / "beta_sweep.txt", cfg);
    rep.write_summary(summary);
  }
  if (rep.partial) {
    std::cerr << "verify beta: " << rep.failure << '\n';
    return 2;
  }
  return rep.passed ? 0 : 3;
}

int verify_tau(const RunConfig& cfg, const Grid& grid, const MaterialLaw& material,
               const StepConfig& step, const fs::path& dir) {
  const Scenario sc = build_scenario(cfg, grid);
  const SweepReport rep =
      tau_sweep(sc, cfg.verify.taus, cfg.verify.tau_ref, material, grid, step);
  {
    std::ofstream csv = open_artifact(dir / "tau_sweep.csv", cfg);
    rep.write_csv(csv);
    std::ofstream summary = open_artifact(dir / "tau_sweep.txt", cfg);
    rep.write_summary(summary);
  }
  if (rep.partial) {
    std::cerr << "verify tau: " << rep.failure << '\n';
    return 2;
  }
  return rep.passed ? 0 : 3;
}

int verify_contdep(const RunConfig& cfg, const Grid& grid, const MaterialLaw& material,
                   const StepConfig& step, const fs::path& dir) {
  if (!material.viscous_coupling_is_unit()) {
    std::cerr << "verify contdep: theorem precondition not met: the two-run stability "
                 "estimate needs unit viscous coupling (d == 1)\n";
    return 1;
  }
  PerturbationSpec spec;
  spec.base = build_scenario(cfg, grid);
  // Flat damage shift: strong enough to move the run, and it keeps the
  // perturbed chi0 inside the zero-normal-derivative gate.
  spec.initial_direction.chi0 = FieldScalar::Constant(grid.node_count(), 1.0);
  spec.deltas = cfg.verify.deltas;
  const RatioTable table = continuous_dependence_test(spec, material, grid, step);
  {
    std::ofstream csv = open_artifact(dir / "ratio_table.csv", cfg);
    table.write_csv(csv);
    std::ofstream summary = open_artifact(dir / "contdep.txt", cfg);
    table.write_summary(summary);
  }
  if (!table.failure.empty()) {
    std::cerr << "verify contdep: " << table.failure << '\n';
    return 2;
  }
  return table.passed ? 0 : 3;
}

int run_verify(const RunConfig& cfg, const std::string& which) {
  const Grid grid = build_geometry(cfg.geometry);
  const MaterialLaw material = build_material(cfg.material, grid.dim());
  const StepConfig step = build_step(cfg.time);
  const fs::path dir = cfg.output.dir;
  fs::create_directories(dir);

  int rc = 0;
  const auto note = [&rc](const char* name, int sub) {
    std::cout << "verify " << name << ": "
              << (sub == 0 ? "pass" : sub == 3 ? "fail" : "error") << '\n';
    rc = std::max(rc, sub);
  };
  if (which == "oracles" || which == "all")
    note("oracles", verify_oracles(cfg, grid, material, dir));
  if (which == "beta" || which == "all")
    note("beta", verify_beta(cfg, grid, material, step, dir));
  if (which == "tau" || which == "all")
    note("tau", verify_tau(cfg, grid, material, step, dir));
  if (which == "contdep" || which == "all")
    note("contdep", verify_contdep(cfg, grid, material, step, dir));
  return rc;
}

// ---------------------------------------------------------------- optimize

int run_optimize(const RunConfig& cfg, bool adapted) {
  if (!cfg.control.enabled) {
    std::cerr << "optimize: config: control.enabled: the control block is disabled\n";
    return 1;
  }
  const Grid grid = build_geometry(cfg.geometry);
  const MaterialLaw material = build_material(cfg.material, grid.dim());
  ControlProblem problem = build_control_problem(cfg, grid);
  const ControlVector guess = build_control_vector(cfg.control, grid, cfg.time.T);

  if (adapted) {
    if (cfg.control.anchor_file.empty()) {
      std::cerr << "optimize: --adapted needs control.anchor_file\n";
      return 1;
    }
    std::ifstream in(cfg.control.anchor_file);
    if (!in) {
      std::cerr << "optimize: cannot read anchor \"" << cfg.control.anchor_file << "\"\n";
      return 1;
    }
    try {
      problem.control.anchor = read_control(in, guess);
    } catch (const std::exception& ex) {
      std::cerr << "optimize: " << ex.what() << '\n';
      return 1;
    }
  }

  const fs::path dir = cfg.output.dir;
  fs::create_directories(dir);
  const ContinuationReport rep = beta_continuation(problem, material, grid, guess, adapted);

  {
    std::ofstream csv = open_artifact(dir / "continuation.csv", cfg);
    rep.write_csv(csv);
  }
  if (!rep.partial) {
    std::ofstream cf(dir / "control.txt");
    if (!cf) throw std::runtime_error("cannot write control file");
    write_control(cf, rep.best, provenance_line(cfg));
  }
  std::ofstream summary = open_artifact(dir / "optimize.txt", cfg);
  summary << "{\n"
          << "  \"report\": \"optimize\",\n"
          << "  \"adapted\": " << json_bool(rep.adapted) << ",\n"
          << "  \"levels\": " << rep.levels.size() << ",\n"
          << "  \"partial\": " << json_bool(rep.partial) << ",\n"
          << "  \"converged\": " << json_bool(rep.converged) << ",\n";
  if (!rep.failure.empty()) summary << "  \"failure\": \"" << rep.failure << "\",\n";
  if (!rep.levels.empty())
    summary << "  \"best_cost\": " << format_exact(rep.levels.back().j) << ",\n"
            << "  \"best_norm\": " << format_exact(rep.levels.back().control_norm) << ",\n";
  summary << "  \"evals_total\": ";
  long evals = 0;
  for (const ContinuationLevel& l : rep.levels) evals += l.evals;
  summary << evals << "\n}\n";

  if (rep.partial) {
    std::cerr << "optimize: " << rep.failure << '\n';
    return 2;
  }
  std::cout << "optimize: " << rep.levels.size() << " levels, best cost "
            << format_exact(rep.levels.back().j) << ", converged "
            << (rep.converged ? "yes" : "no") << '\n';
  return 0;
}

// ------------------------------------------------------------ extend-coeff

void print_poly(std::ostream& out, const char* name, const PiecewisePoly& p) {
  out << name << " knots:";
  for (Real k : p.knots()) out << ' ' << format_exact(k);
  out << '\n';
  for (std::size_t j = 0; j < p.pieces().size(); ++j) {
    out << name << " piece " << j << " about " << format_exact(p.piece_ref(static_cast<int>(j)))
        << ':';
    for (int i = 0; i < p.pieces()[j].size(); ++i)
      out << ' ' << format_exact(p.pieces()[j][i]);
    out << '\n';
  }
}

int run_extend(const std::string& coeff_list, Real delta, const std::string& out_file) {
  std::vector<Real> coeffs;
  std::stringstream ss(coeff_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      coeffs.push_back(std::stod(item));
    } catch (const std::exception&) {
      std::cerr << "extend-coeff: \"" << item << "\" is not a number\n";
      return 1;
    }
  }
  if (coeffs.empty()) {
    std::cerr << "extend-coeff: --coeffs needs at least one coefficient\n";
    return 1;
  }

  const PiecewisePoly ctilde(Eigen::Map<const Eigen::VectorXd>(coeffs.data(), coeffs.size()));
  const CoefficientSplit split = extend_coefficient(ctilde, delta);

  std::ofstream file;
  if (!out_file.empty()) {
    file.open(out_file);
    if (!file) {
      std::cerr << "extend-coeff: cannot write \"" << out_file << "\"\n";
      return 1;
    }
  }
  std::ostream& out = out_file.empty() ? std::cout : file;
  out << "# " << tool_version() << " coefficient extension, ramp width "
      << format_exact(delta) << '\n';
  print_poly(out, "convex", split.convex);
  print_poly(out, "concave", split.concave);
  out << "x convex concave total\n";
  for (int i = 0; i <= 12; ++i) {
    const Real x = -1.0 + i * (2.0 + delta + 1.0) / 12.0;
    out << format_exact(x) << ' ' << format_exact(split.convex(x)) << ' '
        << format_exact(split.concave(x)) << ' ' << format_exact(split.total(x)) << '\n';
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"phase-field damage / Kelvin-Voigt viscoelasticity toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, which = "all", coeffs, out_file;
  long long seed = -1;
  int threads = 0;
  bool adapted = false;
  double delta = 1.0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out-dir", out_dir, "override output.dir");
    sub->add_option("--threads", threads, "worker threads (0 keeps the hardware default)");
    sub->add_option("--seed", seed, "override the configured seeds");
  };

  CLI::App* sim = app.add_subcommand(
      "simulate", "run the coupled system; write energy CSV, snapshots, and a summary");
  add_common(sim);
  CLI::App* ver =
      app.add_subcommand("verify", "run a verification suite on the configured scenario");
  add_common(ver);
  ver->add_option("--which", which, "suite to run")
      ->check(CLI::IsMember({"beta", "tau", "contdep", "oracles", "all"}));
  CLI::App* opt = app.add_subcommand(
      "optimize", "boundary-control continuation along the penalty schedule");
  add_common(opt);
  opt->add_flag("--adapted", adapted, "solve the anchored problem (needs control.anchor_file)");
  CLI::App* ext = app.add_subcommand(
      "extend-coeff", "run the convex/concave coefficient extension on a polynomial");
  ext->add_option("--coeffs", coeffs,
                  "monomial coefficients of the coupling on [0, 1], comma separated")
      ->required();
  ext->add_option("--delta", delta, "ramp width");
  ext->add_option("--out", out_file, "write the split here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // help stays 0; every usage error maps to 1
  }

  if (threads > 0) set_worker_count(threads);

  try {
    if (app.got_subcommand(ext)) return run_extend(coeffs, delta, out_file);
    RunConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output.dir = out_dir;
    if (seed >= 0) {
      cfg.verify.seed = static_cast<unsigned>(seed);
      cfg.control.seed = static_cast<unsigned>(seed);
    }
    if (app.got_subcommand(sim)) return run_simulate(cfg);
    if (app.got_subcommand(ver)) return run_verify(cfg, which);
    return run_optimize(cfg, adapted);
  } catch (const ConfigError& ex) {
    std::cerr << ex.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& ex) {
    std::cerr << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << ex.what() << '\n';
    return 2;
  }
}

}  // namespace pfdam
