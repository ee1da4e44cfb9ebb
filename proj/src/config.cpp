#include "pfdam/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "pfdam/util.hpp"

namespace pfdam {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config: " + (path.empty() ? "top level" : path) + ": " + msg);
}

/// Typed reader for one JSON object.  Every key a block understands is
/// registered through get(); check_complete then rejects strays, so typos
/// surface as errors instead of silently keeping defaults.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void real(const std::string& key, Real& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<Real>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      out = v->get<int>();
    }
  }

  void nonneg_integer(const std::string& key, unsigned& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0)
        fail(at(key), "expected a nonnegative integer");
      out = v->get<unsigned>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void reals(const std::string& key, std::vector<Real>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of numbers");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number()) fail(at(key), "expected an array of numbers");
        out.push_back(e.get<Real>());
      }
    }
  }

  void integers(const std::string& key, std::vector<int>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of integers");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number_integer()) fail(at(key), "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }

  void check_complete() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) fail(at(item.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_geometry(const json& j, GeometryConfig& g) {
  Block b(j, "geometry");
  b.integer("dim", g.dim);
  b.reals("extents", g.extents);
  b.integers("cells", g.cells);
  b.check_complete();
}

void parse_material(const json& j, MaterialConfig& m) {
  Block b(j, "material");
  b.text("coupling", m.coupling);
  b.reals("coupling_coeffs", m.coupling_coeffs);
  b.real("delta", m.delta);
  b.text("potential", m.potential);
  b.real("well_center", m.well_center);
  b.real("well_scale", m.well_scale);
  b.reals("potential_coeffs", m.potential_coeffs);
  b.real("lame_lambda", m.lame_lambda);
  b.real("lame_mu", m.lame_mu);
  b.real("viscosity", m.viscosity);
  b.real("viscous_coupling", m.viscous_coupling);
  b.check_complete();
}

void parse_time(const json& j, TimeConfig& t) {
  Block b(j, "time");
  b.real("T", t.T);
  b.real("tau", t.tau);
  b.real("beta", t.beta);
  b.text("penalty", t.penalty);
  b.check_complete();
}

void parse_initial(const json& j, InitialConfig& i) {
  Block b(j, "initial");
  b.text("profile", i.profile);
  b.real("chi0", i.chi0);
  b.reals("v0", i.v0);
  b.check_complete();
}

void parse_forcing(const json& j, ForcingConfig& f) {
  Block b(j, "forcing");
  b.text("traction", f.traction);
  b.integer("axis", f.axis);
  b.integer("side", f.side);
  b.reals("amplitude", f.amplitude);
  b.real("period", f.period);
  b.real("t_on", f.t_on);
  b.real("t_peak", f.t_peak);
  b.real("t_off", f.t_off);
  b.text("body", f.body);
  b.reals("body_value", f.body_value);
  b.check_complete();
}

void parse_output(const json& j, OutputConfig& o) {
  Block b(j, "output");
  b.text("dir", o.dir);
  b.text("energy_csv", o.energy_csv);
  b.text("summary", o.summary);
  b.integer("snapshot_every", o.snapshot_every);
  b.check_complete();
}

void parse_verify(const json& j, VerifyConfig& v) {
  Block b(j, "verify");
  b.reals("betas", v.betas);
  b.reals("taus", v.taus);
  b.real("tau_ref", v.tau_ref);
  b.reals("deltas", v.deltas);
  b.integer("oracle_trials", v.oracle_trials);
  b.nonneg_integer("seed", v.seed);
  b.check_complete();
}

void parse_control(const json& j, ControlBlockConfig& c) {
  Block b(j, "control");
  b.boolean("enabled", c.enabled);
  b.integer("axis", c.axis);
  b.integer("side", c.side);
  b.reals("amplitude", c.amplitude);
  b.reals("time_nodes", c.time_nodes);
  b.real("bound", c.bound);
  b.real("norm_cap", c.norm_cap);
  b.real("lambda_Q", c.lambda_Q);
  b.real("lambda_Omega", c.lambda_Omega);
  b.real("lambda_Sigma", c.lambda_Sigma);
  b.real("target_Q", c.target_Q);
  b.real("target_T", c.target_T);
  b.boolean("quadratic_tracking", c.quadratic_tracking);
  b.reals("beta_schedule", c.beta_schedule);
  b.integer("max_evals", c.max_evals);
  b.real("initial_step", c.initial_step);
  b.real("step_tol", c.step_tol);
  b.integer("restarts", c.restarts);
  b.nonneg_integer("seed", c.seed);
  b.boolean("use_gradient", c.use_gradient);
  b.real("continuation_tol", c.continuation_tol);
  b.text("anchor_file", c.anchor_file);
  b.check_complete();
}

bool positive(Real x) { return x > 0.0 && std::isfinite(x); }

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) fail(path, msg);
}

void require_decreasing(const std::vector<Real>& v, const std::string& path) {
  require(!v.empty(), path, "must not be empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(positive(v[i]), path, "entries must be positive");
    if (i > 0) require(v[i] < v[i - 1], path, "entries must decrease strictly");
  }
}

PiecewisePoly named_polynomial(const std::string& name, const std::vector<Real>& coeffs,
                               const std::string& path) {
  if (name == "quadratic") return PiecewisePoly(Eigen::Vector3d(0.0, 0.0, 1.0));
  if (name == "constant") return PiecewisePoly::constant(1.0);
  if (name == "smoothstep") {
    Eigen::VectorXd c(4);
    c << 0.0, 0.0, 3.0, -2.0;
    return PiecewisePoly(c);
  }
  if (name == "custom") {
    if (coeffs.empty()) fail(path + "_coeffs", "custom polynomial needs coefficients");
    return PiecewisePoly(Eigen::Map<const Eigen::VectorXd>(coeffs.data(), coeffs.size()));
  }
  fail(path, "unknown name \"" + name + "\" (quadratic, constant, smoothstep, custom)");
}

/// Nodal vector that equals `amplitude` on the (axis, side) edge and zero
/// elsewhere; shared by the fixed tractions and the control basis shape.
FieldVector edge_profile(const Grid& grid, int axis, int side, const std::vector<Real>& amplitude) {
  const int dim = grid.dim();
  FieldVector out = FieldVector::Zero(dim * grid.node_count());
  const Real target = side > 0 ? grid.extent(axis) : 0.0;
  for (int n : grid.boundary_nodes()) {
    if (std::abs(grid.node_coord(n)[axis] - target) > 1e-12) continue;
    for (int c = 0; c < dim; ++c) out[dim * n + c] = amplitude[c];
  }
  return out;
}

void check_edge(int axis, int side, const std::vector<Real>& amplitude, int dim,
                const std::string& path) {
  require(axis >= 0 && axis < dim, path + ".axis", "must name an axis of the domain");
  require(side == 1 || side == -1, path + ".side", "must be +1 or -1");
  require(static_cast<int>(amplitude.size()) == dim, path + ".amplitude",
          "must list one component per dimension");
}

json emit_json(const RunConfig& c) {
  json j;
  j["geometry"] = {{"dim", c.geometry.dim},
                   {"extents", c.geometry.extents},
                   {"cells", c.geometry.cells}};
  j["material"] = {{"coupling", c.material.coupling},
                   {"coupling_coeffs", c.material.coupling_coeffs},
                   {"delta", c.material.delta},
                   {"potential", c.material.potential},
                   {"well_center", c.material.well_center},
                   {"well_scale", c.material.well_scale},
                   {"potential_coeffs", c.material.potential_coeffs},
                   {"lame_lambda", c.material.lame_lambda},
                   {"lame_mu", c.material.lame_mu},
                   {"viscosity", c.material.viscosity},
                   {"viscous_coupling", c.material.viscous_coupling}};
  j["time"] = {{"T", c.time.T}, {"tau", c.time.tau}, {"beta", c.time.beta},
               {"penalty", c.time.penalty}};
  j["initial"] = {{"profile", c.initial.profile}, {"chi0", c.initial.chi0},
                  {"v0", c.initial.v0}};
  j["forcing"] = {{"traction", c.forcing.traction},
                  {"axis", c.forcing.axis},
                  {"side", c.forcing.side},
                  {"amplitude", c.forcing.amplitude},
                  {"period", c.forcing.period},
                  {"t_on", c.forcing.t_on},
                  {"t_peak", c.forcing.t_peak},
                  {"t_off", c.forcing.t_off},
                  {"body", c.forcing.body},
                  {"body_value", c.forcing.body_value}};
  j["output"] = {{"dir", c.output.dir},
                 {"energy_csv", c.output.energy_csv},
                 {"summary", c.output.summary},
                 {"snapshot_every", c.output.snapshot_every}};
  j["verify"] = {{"betas", c.verify.betas},
                 {"taus", c.verify.taus},
                 {"tau_ref", c.verify.tau_ref},
                 {"deltas", c.verify.deltas},
                 {"oracle_trials", c.verify.oracle_trials},
                 {"seed", c.verify.seed}};
  j["control"] = {{"enabled", c.control.enabled},
                  {"axis", c.control.axis},
                  {"side", c.control.side},
                  {"amplitude", c.control.amplitude},
                  {"time_nodes", c.control.time_nodes},
                  {"bound", c.control.bound},
                  {"norm_cap", c.control.norm_cap},
                  {"lambda_Q", c.control.lambda_Q},
                  {"lambda_Omega", c.control.lambda_Omega},
                  {"lambda_Sigma", c.control.lambda_Sigma},
                  {"target_Q", c.control.target_Q},
                  {"target_T", c.control.target_T},
                  {"quadratic_tracking", c.control.quadratic_tracking},
                  {"beta_schedule", c.control.beta_schedule},
                  {"max_evals", c.control.max_evals},
                  {"initial_step", c.control.initial_step},
                  {"step_tol", c.control.step_tol},
                  {"restarts", c.control.restarts},
                  {"seed", c.control.seed},
                  {"use_gradient", c.control.use_gradient},
                  {"continuation_tol", c.control.continuation_tol},
                  {"anchor_file", c.control.anchor_file}};
  return j;
}

}  // namespace

void RunConfig::validate() const {
  const int dim = geometry.dim;
  require(dim == 1 || dim == 2, "geometry.dim", "must be 1 or 2");
  require(static_cast<int>(geometry.extents.size()) == dim, "geometry.extents",
          "must list one extent per dimension");
  require(static_cast<int>(geometry.cells.size()) == dim, "geometry.cells",
          "must list one cell count per dimension");
  for (Real e : geometry.extents) require(positive(e), "geometry.extents", "must be positive");
  for (int c : geometry.cells) require(c >= 1, "geometry.cells", "must be at least 1");

  require(positive(material.delta), "material.delta", "must be positive");
  require(positive(material.lame_mu), "material.lame_mu", "must be positive");
  require(material.lame_lambda >= 0.0, "material.lame_lambda", "must be nonnegative");
  require(positive(material.viscosity), "material.viscosity", "must be positive");
  require(positive(material.viscous_coupling), "material.viscous_coupling", "must be positive");
  require(positive(material.well_scale), "material.well_scale", "must be positive");
  named_polynomial(material.coupling, material.coupling_coeffs, "material.coupling");
  if (material.potential != "well")
    named_polynomial(material.potential, material.potential_coeffs, "material.potential");

  require(positive(time.T), "time.T", "must be positive");
  require(positive(time.tau), "time.tau", "must be positive");
  require(time.tau <= time.T, "time.tau", "must not exceed time.T");
  require(positive(time.beta), "time.beta", "must be positive");
  require(time.penalty == "moreau_yosida" || time.penalty == "smooth", "time.penalty",
          "must be \"moreau_yosida\" or \"smooth\"");

  if (initial.profile == "uniform") {
    require(initial.v0.empty(), "initial.v0", "uniform profile has zero velocity");
  } else if (initial.profile == "uniform_velocity") {
    require(static_cast<int>(initial.v0.size()) == dim, "initial.v0",
            "must list one component per dimension");
  } else {
    fail("initial.profile", "unknown profile \"" + initial.profile + "\"");
  }

  if (forcing.traction != "none") {
    require(forcing.traction == "constant" || forcing.traction == "sine" ||
                forcing.traction == "pulse",
            "forcing.traction", "must be none, constant, sine, or pulse");
    check_edge(forcing.axis, forcing.side, forcing.amplitude, dim, "forcing");
    if (forcing.traction == "sine")
      require(positive(forcing.period), "forcing.period", "must be positive");
    if (forcing.traction == "pulse")
      require(forcing.t_on < forcing.t_peak && forcing.t_peak < forcing.t_off, "forcing.t_peak",
              "pulse needs t_on < t_peak < t_off");
  }
  if (forcing.body != "none") {
    require(forcing.body == "constant", "forcing.body", "must be none or constant");
    require(static_cast<int>(forcing.body_value.size()) == dim, "forcing.body_value",
            "must list one component per dimension");
  }

  require(!output.dir.empty(), "output.dir", "must not be empty");
  require(!output.energy_csv.empty(), "output.energy_csv", "must not be empty");
  require(!output.summary.empty(), "output.summary", "must not be empty");
  require(output.snapshot_every >= 0, "output.snapshot_every", "must be nonnegative");

  require_decreasing(verify.betas, "verify.betas");
  require_decreasing(verify.taus, "verify.taus");
  require(positive(verify.tau_ref), "verify.tau_ref", "must be positive");
  require(verify.tau_ref < verify.taus.back(), "verify.tau_ref",
          "must be finer than every swept step");
  require(!verify.deltas.empty(), "verify.deltas", "must not be empty");
  for (std::size_t i = 0; i < verify.deltas.size(); ++i) {
    require(positive(verify.deltas[i]), "verify.deltas", "entries must be positive");
    if (i > 0)
      require(verify.deltas[i] > verify.deltas[i - 1], "verify.deltas",
              "entries must increase strictly");
  }
  require(verify.oracle_trials >= 1, "verify.oracle_trials", "must be at least 1");

  if (control.enabled) {
    check_edge(control.axis, control.side, control.amplitude, dim, "control");
    require(control.time_nodes.size() >= 2, "control.time_nodes", "need at least two nodes");
    for (std::size_t i = 1; i < control.time_nodes.size(); ++i)
      require(control.time_nodes[i] > control.time_nodes[i - 1], "control.time_nodes",
              "must increase strictly");
    require(control.time_nodes.front() >= 0.0 && control.time_nodes.back() <= time.T,
            "control.time_nodes", "must lie inside [0, T]");
    require(positive(control.bound), "control.bound", "must be positive");
    require(positive(control.norm_cap), "control.norm_cap", "must be positive");
    require(control.lambda_Q >= 0.0 && control.lambda_Omega >= 0.0 &&
                control.lambda_Sigma >= 0.0,
            "control.lambda_Sigma", "cost weights must be nonnegative");
    require_decreasing(control.beta_schedule, "control.beta_schedule");
    for (Real b : control.beta_schedule)
      require(b < 1.0, "control.beta_schedule", "entries must lie in (0, 1)");
    require(control.max_evals >= 1, "control.max_evals", "must be at least 1");
    require(positive(control.initial_step), "control.initial_step", "must be positive");
    require(positive(control.step_tol), "control.step_tol", "must be positive");
    require(control.restarts >= 1, "control.restarts", "must be at least 1");
    require(positive(control.continuation_tol), "control.continuation_tol", "must be positive");
    require(forcing.traction == "none", "forcing.traction",
            "must be none when the control block is enabled (the control supplies the traction)");
  }
}

RunConfig preset(const std::string& name) {
  RunConfig cfg;  // defaults already describe the standard problem
  if (name == "standard") {
    cfg.forcing.traction = "sine";
    cfg.forcing.axis = 0;
    cfg.forcing.side = 1;
    cfg.forcing.amplitude = {-2.0, 0.0};
    cfg.forcing.period = 1.0;
    return cfg;
  }
  if (name == "healing") {
    // Start well below a raised well so the drive pulls chi upward, and hit
    // the plate with a mid-run damaging pulse: both signs of the rate appear,
    // and the damage spike dominates the penalty-limited healing rate.  The
    // low viscosity lets the short pulse actually strain the material.
    cfg.geometry.cells = {8, 8};
    cfg.material.well_center = 1.5;
    cfg.material.viscosity = 0.1;
    cfg.initial.chi0 = 0.5;
    cfg.forcing.traction = "pulse";
    cfg.forcing.amplitude = {-24.0, 0.0};
    cfg.forcing.t_on = 0.05;
    cfg.forcing.t_peak = 0.2;
    cfg.forcing.t_off = 0.35;
    cfg.verify.betas = {1e-1, 1e-2, 1e-3, 1e-4};
    return cfg;
  }
  if (name == "control-1d") {
    cfg.geometry.dim = 1;
    cfg.geometry.extents = {1.0};
    cfg.geometry.cells = {8};
    cfg.time.T = 0.4;
    cfg.time.tau = 0.05;
    cfg.initial.chi0 = 0.9;
    cfg.verify.taus = {0.1, 0.05};
    cfg.verify.tau_ref = 0.025;
    cfg.control.enabled = true;
    cfg.control.amplitude = {8.0};
    cfg.control.time_nodes = {0.0, 0.4};
    cfg.control.lambda_Omega = 1.0;
    cfg.control.lambda_Sigma = 1e-4;
    cfg.control.target_T = 0.8;
    return cfg;
  }
  throw ConfigError("config: preset: unknown preset \"" + name +
                    "\" (standard, healing, control-1d)");
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw ConfigError(std::string("config: ") + ex.what());  // carries line and column
  }
  if (!j.is_object()) throw ConfigError("config: top level: expected an object");

  Block top(j, "");
  RunConfig cfg;
  if (const json* p = top.get("preset")) {
    if (!p->is_string()) fail("preset", "expected a preset name");
    cfg = preset(p->get<std::string>());
  }
  if (const json* b = top.get("geometry")) parse_geometry(*b, cfg.geometry);
  if (const json* b = top.get("material")) parse_material(*b, cfg.material);
  if (const json* b = top.get("time")) parse_time(*b, cfg.time);
  if (const json* b = top.get("initial")) parse_initial(*b, cfg.initial);
  if (const json* b = top.get("forcing")) parse_forcing(*b, cfg.forcing);
  if (const json* b = top.get("output")) parse_output(*b, cfg.output);
  if (const json* b = top.get("verify")) parse_verify(*b, cfg.verify);
  if (const json* b = top.get("control")) parse_control(*b, cfg.control);
  top.check_complete();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read \"" + path + "\"");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string emit_config(const RunConfig& cfg) { return emit_json(cfg).dump(2) + "\n"; }

std::string config_fingerprint(const RunConfig& cfg) {
  json j = emit_json(cfg);
  j.erase("output");  // file placement does not change the run the hash names
  return hex64(fnv1a(j.dump(2)));
}

std::string provenance_line(const RunConfig& cfg) {
  return std::string(tool_version()) + " config " + config_fingerprint(cfg);
}

Grid build_geometry(const GeometryConfig& g) { return build_grid(g.dim, g.extents, g.cells); }

MaterialLaw build_material(const MaterialConfig& m, int dim) {
  const PiecewisePoly ctilde =
      named_polynomial(m.coupling, m.coupling_coeffs, "material.coupling");
  const PiecewisePoly f =
      m.potential == "well" ? quadratic_well(m.well_center, m.well_scale)
                            : named_polynomial(m.potential, m.potential_coeffs,
                                               "material.potential");
  return MaterialLaw(extend_coefficient(ctilde, m.delta), f,
                     PiecewisePoly::constant(m.viscous_coupling),
                     StiffnessTensor::isotropic(dim, m.lame_lambda, m.lame_mu), m.viscosity);
}

StepConfig build_step(const TimeConfig& t) {
  StepConfig cfg;
  cfg.tau = t.tau;
  cfg.T = t.T;
  cfg.beta = t.penalty == "smooth" ? Penalty::smooth_variant(t.beta)
                                   : Penalty::moreau_yosida(t.beta);
  return cfg;
}

InitialData build_initial(const InitialConfig& i, const Grid& grid) {
  const int dim = grid.dim();
  const int n = grid.node_count();
  InitialData out;
  out.u0 = FieldVector::Zero(dim * n);
  out.v0 = FieldVector::Zero(dim * n);
  out.chi0 = FieldScalar::Constant(n, i.chi0);
  if (i.profile == "uniform_velocity")
    for (int node = 0; node < n; ++node)
      for (int c = 0; c < dim; ++c) out.v0[dim * node + c] = i.v0[c];
  return out;
}

Forcing build_forcing(const ForcingConfig& f, const Grid& grid) {
  Forcing out;
  if (f.traction != "none") {
    const FieldVector profile = edge_profile(grid, f.axis, f.side, f.amplitude);
    const std::vector<int> facets = edge_facets(grid, f.axis, f.side);
    std::function<Real(Real)> course;
    if (f.traction == "constant") {
      course = [](Real) { return 1.0; };
    } else if (f.traction == "sine") {
      const Real period = f.period;
      course = [period](Real t) { return std::sin(2.0 * std::numbers::pi * t / period); };
    } else {  // pulse: hat through (t_on, 0), (t_peak, 1), (t_off, 0)
      const Real on = f.t_on, peak = f.t_peak, off = f.t_off;
      course = [on, peak, off](Real t) {
        if (t <= on || t >= off) return 0.0;
        return t < peak ? (t - on) / (peak - on) : (off - t) / (off - peak);
      };
    }
    out.traction = [profile, facets, course](Real t) {
      BoundaryField b;
      b.nodal = profile * course(t);
      b.facets = facets;
      return b;
    };
  }
  if (f.body == "constant") {
    const int dim = grid.dim();
    FieldVector value = FieldVector::Zero(dim * grid.node_count());
    for (int node = 0; node < grid.node_count(); ++node)
      for (int c = 0; c < dim; ++c) value[dim * node + c] = f.body_value[c];
    out.body = [value](Real) { return value; };
  }
  return out;
}

Scenario build_scenario(const RunConfig& cfg, const Grid& grid) {
  return Scenario{build_initial(cfg.initial, grid), build_forcing(cfg.forcing, grid)};
}

ControlVector build_control_vector(const ControlBlockConfig& c, const Grid& grid, Real T) {
  if (!c.enabled) throw ConfigError("config: control.enabled: control block is disabled");
  ControlBasis basis;
  BoundaryField shape;
  shape.nodal = edge_profile(grid, c.axis, c.side, c.amplitude);
  shape.facets = edge_facets(grid, c.axis, c.side);
  basis.shapes = {shape};
  basis.time_nodes = c.time_nodes;
  basis.validate(grid);
  (void)T;

  ControlVector b;
  b.basis = std::make_shared<const ControlBasis>(std::move(basis));
  const int n = b.basis->size();
  b.coeffs = Eigen::VectorXd::Zero(n);
  b.lower = Eigen::VectorXd::Constant(n, -c.bound);
  b.upper = Eigen::VectorXd::Constant(n, c.bound);
  b.norm_cap = c.norm_cap;
  b.validate();
  return b;
}

ControlProblem build_control_problem(const RunConfig& cfg, const Grid& grid) {
  const ControlBlockConfig& c = cfg.control;
  ControlProblem p;
  p.initial = build_initial(cfg.initial, grid);
  p.cfg = build_step(cfg.time);
  p.body = build_forcing(cfg.forcing, grid).body;

  ControlConfig& cc = p.control;
  cc.lambda_Q = c.lambda_Q;
  cc.lambda_Omega = c.lambda_Omega;
  cc.lambda_Sigma = c.lambda_Sigma;
  const int n = grid.node_count();
  if (c.lambda_Q > 0.0) {
    const Real v = c.target_Q;
    cc.chi_Q = [v, n](Real) { return FieldScalar::Constant(n, v); };
  }
  if (c.lambda_Omega > 0.0) cc.chi_T = FieldScalar::Constant(n, c.target_T);
  cc.quadratic_tracking = c.quadratic_tracking;
  cc.beta_schedule = c.beta_schedule;
  cc.max_evals = c.max_evals;
  cc.initial_step = c.initial_step;
  cc.step_tol = c.step_tol;
  cc.restarts = c.restarts;
  cc.seed = c.seed;
  cc.use_gradient = c.use_gradient;
  cc.continuation_tol = c.continuation_tol;
  return p;
}

}  // namespace pfdam
