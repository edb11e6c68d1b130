#include "mixlap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mixlap/parallel.hpp"

namespace mixlap {

namespace {

using json = nlohmann::json;

json real_or_inf(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double real_from(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return kInfinity;
    throw Error("expected a number or \"inf\", got '" + s + "'");
  }
  return j.get<double>();
}

Point point_from(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.empty() || j.size() > 2) throw Error("expected a point as a number or an array of 1-2 numbers");
  return {j[0].get<double>(), j.size() > 1 ? j[1].get<double>() : 0.0};
}

json point_json(const Point& x) { return json::array({x[0], x[1]}); }

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw Error(what + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw Error(what + ": unknown key '" + key + "'");
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string csv_of(const LatticeFunction& u) {
  std::ostringstream out;
  write_csv(out, u);
  return out.str();
}

std::string trace_csv(const SolveReport& r) {
  std::ostringstream out;
  out << "iteration,energy,step,residual\n";
  char buf[128];
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", k, r.trace[k].energy, r.trace[k].step,
                  r.trace[k].residual);
    out << buf;
  }
  return out.str();
}

std::string fit_csv(const OscillationFit& fit) {
  std::ostringstream out;
  write_fit_csv(out, fit);
  return out.str();
}

json energy_json(const EnergyTerms& e) {
  return {{"local", e.local}, {"nonlocal", e.nonlocal}, {"cross", e.cross}, {"forcing", e.forcing}, {"total", e.total}};
}

json solve_json(const SolveReport& r) {
  double scale = 1.0, rise = 0.0;
  for (const auto& t : r.trace) scale = std::max(scale, std::abs(t.energy));
  for (std::size_t k = 1; k < r.trace.size(); ++k) rise = std::max(rise, r.trace[k].energy - r.trace[k - 1].energy);
  const bool monotone = rise <= 1e-12 * scale;
  return {{"energy", energy_json(r.energy)},
          {"residual_inf", r.residual_inf},
          {"tol_residual", r.tol_residual},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"trace_length", r.trace.size()},
          {"trace_energy_monotone", monotone},
          {"trace_max_energy_rise", rise}};
}

json header(const ExperimentConfig& c, const KernelQuadrature* quad) {
  json j;
  j["version"] = kVersionTag;
  j["kind"] = to_string(c.kind);
  j["config_hash"] = config_hash(c);
  json cfg = c;
  cfg.erase("output_dir");
  j["config"] = cfg;
  if (quad) j["resolution"] = resolution_tag(*quad);
  return j;
}

LatticeFunction with_free_zero(const LatticeFunction& g, const std::vector<std::size_t>& free) {
  std::vector<double> v(g.values());
  for (auto k : free) v[k] = 0.0;
  return g.with_values(std::move(v));
}

LatticeFunction field_to_function(const LatticeFunction& like, const NodalField& f) {
  std::vector<double> v(like.lattice().size(), 0.0);
  for (std::size_t i = 0; i < f.nodes.size(); ++i) v[f.nodes[i]] = f.values[i];
  return like.with_values(std::move(v));
}

double max_abs_on(const LatticeFunction& u, const std::vector<std::size_t>& nodes) {
  double m = 0.0;
  for (auto k : nodes) m = std::max(m, std::abs(u[k]));
  return m;
}

double max_diff_on(const LatticeFunction& a, const LatticeFunction& b, const std::vector<std::size_t>& nodes) {
  double m = 0.0;
  for (auto k : nodes) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

/// max |mixed_apply(u) - f| over the nodes, optionally skipping one.
double residual_on(const LatticeFunction& u, const LatticeFunction& f, const KernelQuadrature& quad,
                   const std::vector<std::size_t>& nodes, std::optional<std::size_t> skip = std::nullopt) {
  const auto m = mixed_apply(u, quad, nodes);
  double r = 0.0;
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    if (!skip || m.nodes[i] != *skip) r = std::max(r, std::abs(m.values[i] - f[m.nodes[i]]));
  return r;
}

std::vector<double> fit_radii(const ExperimentConfig& c, const Lattice& L) {
  const double r_max = c.fit.r_max > 0.0 ? c.fit.r_max : 0.5 * c.domain.radius;
  return dyadic_radii(r_max, c.fit.levels, c.fit.min_radius_cells * L.h());
}

Point fit_center(const ExperimentConfig& c) { return c.fit.center ? *c.fit.center : c.domain.center; }

void add_fit_files(ExperimentResult& res, const OscillationFit& fit, const std::string& title, const RunOptions& o) {
  res.files["fit.csv"] = fit_csv(fit);
  if (o.emit_svg) res.files["fit.svg"] = fit_svg(fit, title);
}

double conjugate(double q) {
  if (std::isinf(q)) return 1.0;
  if (q == 1.0) return kInfinity;
  return q / (q - 1.0);
}

}  // namespace

// ---------------------------------------------------------------- serialization

void to_json(json& j, const Params& p) {
  j = json{{"p", p.p}, {"s", p.s}, {"A", p.A}, {"N", p.N}, {"q", real_or_inf(p.q)}};
}

void from_json(const json& j, Params& p) {
  reject_unknown(j, {"p", "s", "A", "N", "q"}, "params");
  p = Params{};
  if (j.contains("p")) p.p = j["p"].get<double>();
  if (j.contains("s")) p.s = j["s"].get<double>();
  if (j.contains("A")) p.A = j["A"].get<double>();
  if (j.contains("N")) p.N = j["N"].get<int>();
  if (j.contains("q")) p.q = real_from(j["q"]);
  p.validate();
}

void to_json(json& j, const Region& r) {
  j = json{{"kind", r.kind == Region::Kind::Ball ? "ball" : "box"}, {"center", point_json(r.center)}, {"radius", r.radius}};
}

void from_json(const json& j, Region& r) {
  reject_unknown(j, {"kind", "center", "radius"}, "region");
  r = Region{};
  const auto kind = j.value("kind", std::string("ball"));
  if (kind == "ball")
    r.kind = Region::Kind::Ball;
  else if (kind == "box")
    r.kind = Region::Kind::Box;
  else
    throw Error("region: unknown kind '" + kind + "'");
  if (j.contains("center")) r.center = point_from(j["center"]);
  if (j.contains("radius")) r.radius = j["radius"].get<double>();
  if (!(r.radius > 0.0)) throw Error("region: radius must be positive");
}

void to_json(json& j, const QuadratureSettings& q) {
  j = json{{"near_radius_cells", q.near_radius_cells},
           {"r_trunc_factor", q.r_trunc_factor},
           {"exterior_cells", q.exterior_cells},
           {"angular_nodes", q.angular_nodes},
           {"far_panels", q.far_panels}};
}

void from_json(const json& j, QuadratureSettings& q) {
  reject_unknown(j, {"near_radius_cells", "r_trunc_factor", "exterior_cells", "angular_nodes", "far_panels"},
                 "quadrature");
  q = QuadratureSettings{};
  if (j.contains("near_radius_cells")) q.near_radius_cells = j["near_radius_cells"].get<double>();
  if (j.contains("r_trunc_factor")) q.r_trunc_factor = j["r_trunc_factor"].get<double>();
  if (j.contains("exterior_cells")) q.exterior_cells = j["exterior_cells"].get<int>();
  if (j.contains("angular_nodes")) q.angular_nodes = j["angular_nodes"].get<int>();
  if (j.contains("far_panels")) q.far_panels = j["far_panels"].get<int>();
}

SolverOptions SolverConfig::options(std::uint64_t seed) const {
  SolverOptions o;
  o.tol_residual = tol_residual;
  o.max_iter = max_iter;
  o.init = init;
  o.seed = seed;
  o.init_amplitude = init_amplitude;
  o.precond_band = precond_band;
  return o;
}

void to_json(json& j, const SolverConfig& c) {
  const char* init = c.init == SolverOptions::Init::Datum ? "datum" : c.init == SolverOptions::Init::Zero ? "zero" : "random";
  j = json{{"tol_residual", c.tol_residual},     {"max_iter", c.max_iter},
           {"init", init},                       {"init_amplitude", c.init_amplitude},
           {"precond_band", c.precond_band},     {"random_inits", c.random_inits}};
}

void from_json(const json& j, SolverConfig& c) {
  reject_unknown(j, {"tol_residual", "max_iter", "init", "init_amplitude", "precond_band", "random_inits"},
                 "solver_opts");
  c = SolverConfig{};
  if (j.contains("tol_residual")) c.tol_residual = j["tol_residual"].get<double>();
  if (j.contains("max_iter")) c.max_iter = j["max_iter"].get<int>();
  if (j.contains("init")) {
    const auto s = j["init"].get<std::string>();
    if (s == "datum")
      c.init = SolverOptions::Init::Datum;
    else if (s == "zero")
      c.init = SolverOptions::Init::Zero;
    else if (s == "random")
      c.init = SolverOptions::Init::Random;
    else
      throw Error("solver_opts: unknown init '" + s + "'");
  }
  if (j.contains("init_amplitude")) c.init_amplitude = j["init_amplitude"].get<double>();
  if (j.contains("precond_band")) c.precond_band = j["precond_band"].get<double>();
  if (j.contains("random_inits")) c.random_inits = j["random_inits"].get<int>();
  if (!(c.tol_residual >= 0.0)) throw Error("solver_opts: tol_residual must be >= 0");
  if (c.max_iter < 1) throw Error("solver_opts: max_iter must be >= 1");
  if (c.random_inits < 0) throw Error("solver_opts: random_inits must be >= 0");
}

void to_json(json& j, const FitConfig& c) {
  j = json{{"r_max", c.r_max}, {"levels", c.levels}, {"min_radius_cells", c.min_radius_cells}};
  if (c.center) j["center"] = point_json(*c.center);
}

void from_json(const json& j, FitConfig& c) {
  reject_unknown(j, {"center", "r_max", "levels", "min_radius_cells"}, "fit");
  c = FitConfig{};
  if (j.contains("center")) c.center = point_from(j["center"]);
  if (j.contains("r_max")) c.r_max = j["r_max"].get<double>();
  if (j.contains("levels")) c.levels = j["levels"].get<int>();
  if (j.contains("min_radius_cells")) c.min_radius_cells = j["min_radius_cells"].get<double>();
  if (c.levels < 3) throw Error("fit: levels must be >= 3 (at least four radii)");
}

std::string to_string(ExperimentConfig::Kind kind) {
  using K = ExperimentConfig::Kind;
  switch (kind) {
    case K::Solve: return "solve";
    case K::Manufactured: return "manufactured";
    case K::Sharpness: return "sharpness";
    case K::HomogeneousProbe: return "homogeneous_probe";
    case K::ComparisonBounds: return "comparison_bounds";
    case K::Fuzz: return "fuzz";
  }
  return "unknown";
}

ExperimentConfig::Kind experiment_kind_from_string(const std::string& name) {
  using K = ExperimentConfig::Kind;
  if (name == "probe") return K::HomogeneousProbe;
  if (name == "bounds") return K::ComparisonBounds;
  for (auto k : {K::Solve, K::Manufactured, K::Sharpness, K::HomogeneousProbe, K::ComparisonBounds, K::Fuzz})
    if (to_string(k) == name) return k;
  throw Error("unknown experiment kind '" + name + "'");
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"kind", to_string(c.kind)},
           {"params", c.params},
           {"domain", c.domain},
           {"buffer_ratio", c.buffer_ratio},
           {"lattice", {{"n_per_axis", c.n_per_axis}}},
           {"quadrature", c.quadrature},
           {"solver_opts", c.solver},
           {"fit", c.fit},
           {"fuzz", c.fuzz},
           {"seed", c.seed},
           {"output_dir", c.output_dir}};
  if (c.f_spec) j["f_spec"] = *c.f_spec;
  if (c.g_spec) j["g_spec"] = *c.g_spec;
  if (c.g_tail) j["g_tail"] = *c.g_tail;
  if (c.target) j["target"] = *c.target;
  if (c.gamma_eps) j["barrier"] = {{"gamma_eps", *c.gamma_eps}};
  if (c.comparison_ball) j["comparison_ball"] = *c.comparison_ball;
  if (c.rescale_R) j["rescale"] = {{"R", *c.rescale_R}, {"M", c.rescale_M}};
}

void from_json(const json& j, ExperimentConfig& c) {
  reject_unknown(j,
                 {"kind", "params", "domain", "buffer_ratio", "lattice", "quadrature", "solver_opts", "fit", "fuzz",
                  "seed", "output_dir", "f_spec", "g_spec", "g_tail", "target", "barrier", "comparison_ball",
                  "rescale"},
                 "experiment config");
  c = ExperimentConfig{};
  if (j.contains("kind")) c.kind = experiment_kind_from_string(j["kind"].get<std::string>());
  if (j.contains("params")) c.params = j["params"].get<Params>();
  if (j.contains("domain")) c.domain = j["domain"].get<Region>();
  if (j.contains("buffer_ratio")) c.buffer_ratio = j["buffer_ratio"].get<double>();
  if (j.contains("lattice")) {
    reject_unknown(j["lattice"], {"n_per_axis"}, "lattice");
    c.n_per_axis = j["lattice"].at("n_per_axis").get<int>();
  }
  if (j.contains("quadrature")) c.quadrature = j["quadrature"].get<QuadratureSettings>();
  if (j.contains("solver_opts")) c.solver = j["solver_opts"].get<SolverConfig>();
  if (j.contains("fit")) c.fit = j["fit"].get<FitConfig>();
  if (j.contains("fuzz")) c.fuzz = j["fuzz"].get<FuzzConfig>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("f_spec")) c.f_spec = j["f_spec"].get<FunctionSpec>();
  if (j.contains("g_spec")) c.g_spec = j["g_spec"].get<FunctionSpec>();
  if (j.contains("g_tail")) c.g_tail = j["g_tail"].get<TailModel>();
  if (j.contains("target")) c.target = j["target"].get<FunctionSpec>();
  if (j.contains("barrier")) {
    reject_unknown(j["barrier"], {"gamma_eps"}, "barrier");
    c.gamma_eps = j["barrier"].at("gamma_eps").get<double>();
  }
  if (j.contains("comparison_ball")) c.comparison_ball = j["comparison_ball"].get<Region>();
  if (j.contains("rescale")) {
    reject_unknown(j["rescale"], {"R", "M"}, "rescale");
    c.rescale_R = j["rescale"].at("R").get<double>();
    c.rescale_M = j["rescale"].value("M", 0.0);
  }
  c.validate();
}

void ExperimentConfig::validate() const {
  using K = Kind;
  params.validate();
  if (!(buffer_ratio > 1.0)) throw Error("config: buffer_ratio must exceed 1");
  if (n_per_axis < 3 || n_per_axis % 2 == 0) throw Error("config: lattice n_per_axis must be odd and >= 3");
  switch (kind) {
    case K::Solve:
      break;
    case K::Manufactured:
      if (!target) throw Error("config: manufactured runs need a 'target' function");
      break;
    case K::Sharpness:
      if (!gamma_eps) throw Error("config: sharpness runs need 'barrier.gamma_eps'");
      if (!(*gamma_eps > 0.0)) throw Error("config: gamma_eps must be positive");
      break;
    case K::HomogeneousProbe:
      if (!g_spec) throw Error("config: homogeneous probe runs need a 'g_spec' boundary datum");
      if (f_spec && !(f_spec->kind == FunctionSpec::Kind::Constant && f_spec->value == 0.0))
        throw Error("config: homogeneous probe runs need f = 0");
      break;
    case K::ComparisonBounds:
      if (!f_spec) throw Error("config: comparison runs need an 'f_spec'");
      break;
    case K::Fuzz:
      fuzz.validate();
      break;
  }
  if (rescale_R && !(*rescale_R > 0.0)) throw Error("config: rescale.R must be positive");
  if (!(rescale_M >= 0.0)) throw Error("config: rescale.M must be >= 0");
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& c) {
  json j = c;
  j.erase("output_dir");
  return hex64(fnv1a(j.dump()));
}

// ---------------------------------------------------------------- setup

ExperimentSetup make_setup(const ExperimentConfig& c) {
  c.validate();
  Lattice L = make_lattice(c.params.N, c.domain.center, c.buffer_ratio * c.domain.radius, c.n_per_axis);
  auto quad = std::make_shared<const KernelQuadrature>(c.params, L, c.domain.radius, c.quadrature);
  return {L, quad};
}

LatticeFunction sample_with_closure(const ExperimentSetup& s, const FunctionSpec& fn,
                                    const std::optional<TailModel>& tail_override, bool* truncated) {
  const auto& params = s.quad->params();
  TailChoice choice = default_tail(fn, s.lattice.center(), params);
  if (tail_override) choice = {*tail_override, false};
  if (truncated) *truncated = choice.truncated;
  auto closure = std::make_shared<const ExteriorClosure>(sample_closure(fn, s.quad->annulus_ptr(), choice.model, params));
  return sample(fn, s.lattice, closure);
}

LatticeFunction sample_interior(const ExperimentSetup& s, const FunctionSpec& fn) {
  auto closure = std::make_shared<const ExteriorClosure>(
      s.quad->annulus_ptr(), std::vector<double>(s.quad->annulus().cells().size(), 0.0), TailModel::zero(),
      s.quad->params());
  return sample(fn, s.lattice, closure);
}

// ---------------------------------------------------------------- runners

ExperimentResult run_solve(const ExperimentConfig& c, const RunOptions&) {
  const auto s = make_setup(c);
  bool truncated = false;
  const auto g = sample_with_closure(s, c.g_spec.value_or(FunctionSpec::constant(0.0)), c.g_tail, &truncated);
  const auto f = sample_interior(s, c.f_spec.value_or(FunctionSpec::constant(0.0)));
  const auto prob = make_dirichlet_problem(c.domain, f, g, s.quad);
  const auto rep = solve_dirichlet(prob, c.solver.options(c.seed));

  ExperimentResult res;
  res.report = header(c, s.quad.get());
  res.report["solve"] = solve_json(rep);
  res.report["free_nodes"] = prob.free_nodes().size();
  res.report["g_tail_truncated"] = truncated;
  res.report["solution_sup"] = max_abs_on(rep.solution, prob.free_nodes());
  res.files["solution.csv"] = csv_of(rep.solution);
  res.files["trace.csv"] = trace_csv(rep);
  return res;
}

ExperimentResult run_manufactured(const ExperimentConfig& c, const RunOptions&) {
  const auto s = make_setup(c);
  bool truncated = false;
  const auto w = sample_with_closure(s, *c.target, c.g_tail, &truncated);
  const auto free = nodes_in(s.lattice, c.domain);
  const auto f = field_to_function(w, mixed_apply(w, *s.quad, free));
  const auto prob = make_dirichlet_problem(c.domain, f, with_free_zero(w, free), s.quad);
  const auto rep = solve_dirichlet(prob, c.solver.options(c.seed));

  const double w_sup = max_abs_on(w, free);
  const double err = max_diff_on(rep.solution, w, free);
  const double scale = std::max(1.0, w_sup);

  ExperimentResult res;
  res.report = header(c, s.quad.get());
  res.report["solve"] = solve_json(rep);
  res.report["free_nodes"] = free.size();
  res.report["target_tail_truncated"] = truncated;
  res.report["target_sup"] = w_sup;
  res.report["error_inf"] = err;
  res.report["relative_error"] = w_sup > 0.0 ? err / w_sup : err;
  res.report["problem_scale"] = problem_scale(prob);

  if (c.solver.random_inits > 0) {
    json runs = json::array();
    double worst = 0.0;
    std::vector<LatticeFunction> sols{rep.solution};
    for (int k = 1; k <= c.solver.random_inits; ++k) {
      auto opts = c.solver.options(splitmix64(c.seed + static_cast<std::uint64_t>(k)));
      opts.init = SolverOptions::Init::Random;
      opts.init_amplitude = c.solver.init_amplitude * scale;
      const auto r = solve_dirichlet(prob, opts);
      for (const auto& other : sols) worst = std::max(worst, max_diff_on(r.solution, other, free));
      sols.push_back(r.solution);
      runs.push_back({{"iterations", r.iterations}, {"residual_inf", r.residual_inf}, {"error_inf", max_diff_on(r.solution, w, free)}});
    }
    res.report["uniqueness"] = {{"solves", sols.size()}, {"max_difference", worst}, {"scale", scale}, {"random_runs", runs}};
  }
  res.files["solution.csv"] = csv_of(rep.solution);
  res.files["target.csv"] = csv_of(w);
  res.files["trace.csv"] = trace_csv(rep);
  return res;
}

ExperimentResult run_sharpness(const ExperimentConfig& c, const RunOptions& o) {
  c.params.require_regularity();
  const auto& P = c.params;
  const double theta = theta_exponent(P);
  const double ge = *c.gamma_eps;
  if (!(ge > theta))
    throw Error("sharpness: gamma_eps = " + std::to_string(ge) + " must exceed Theta = " + std::to_string(theta));
  const double t_local = (P.p - P.n_over_q()) / (P.p - 1.0);
  const double t_frac = P.sp() / (P.p - 1.0);
  const bool in_regime = t_local <= t_frac && t_frac <= 1.0;

  const auto s = make_setup(c);
  const auto& L = s.lattice;
  const auto barrier = FunctionSpec::power(1.0, ge, c.domain.center);
  bool truncated = false;
  const auto w = sample_with_closure(s, barrier, c.g_tail, &truncated);
  const auto free = nodes_in(L, c.domain);
  const auto f = field_to_function(w, mixed_apply(w, *s.quad, free));
  const auto prob = make_dirichlet_problem(c.domain, f, with_free_zero(w, free), s.quad);
  const auto rep = solve_dirichlet(prob, c.solver.options(c.seed));
  const auto singular = L.node_at(c.domain.center);
  if (!singular) throw Error("sharpness: the barrier center must be a lattice node");

  const auto radii = fit_radii(c, L);
  const auto fit = oscillation_exponent_fit(rep.solution, c.domain.center, radii);

  // Radial exponents of the two parts of f along the first axis. The
  // fractional part is fitted through its increments from the center, which
  // removes the constant offset left by the truncated far field.
  const double frac0 = frac_p_laplacian_apply(w, *s.quad, *singular);
  std::vector<double> rr, f_loc, f_frac;
  for (double r : radii) {
    Point x = c.domain.center;
    x[0] += std::round(r / L.h()) * L.h();
    const auto node = L.node_at(x);
    if (!node) continue;
    rr.push_back(distance(x, c.domain.center, L.dim()));
    f_loc.push_back(std::abs(p_laplacian_at(w, P.p, *node)));
    f_frac.push_back(std::abs(frac_p_laplacian_apply(w, *s.quad, *node) - frac0));
  }
  const auto fit_loc = power_law_fit(rr, f_loc);
  const auto fit_frac = power_law_fit(rr, f_frac);

  RegularityReport reg;
  reg.theta_predicted = theta;
  reg.fit = fit;
  const Region inner = Region::ball(c.domain.center, 0.5 * c.domain.radius);
  reg.tail_value = tail(rep.solution, P.p - 1.0, P.sp(), P.sp(), c.domain.center, inner.radius);
  reg.seminorms["holder_gamma_eps_inner_ball"] = holder_seminorm(rep.solution, std::min(ge, 1.0), inner);
  reg.constants_measured["f_lq_norm"] = lattice_norm(f, P.q, c.domain);
  reg.resolution = resolution_tag(*s.quad);

  ExperimentResult res;
  res.report = header(c, s.quad.get());
  res.report["regularity"] = to_json(reg);
  res.report["gamma_eps"] = ge;
  res.report["delta_measured"] = fit.flat ? json("flat") : json(fit.delta);
  res.report["delta_deviation"] = fit.flat ? json(nullptr) : json(std::abs(fit.delta - ge));
  res.report["stated_regime"] = {{"holds", in_regime}, {"local_ratio", t_local}, {"fractional_ratio", t_frac}};
  res.report["barrier_tail_truncated"] = truncated;
  res.report["f_exponents"] = {
      {"fractional_predicted", (ge - P.s) * (P.p - 1.0) - P.s},
      {"fractional_measured", fit_frac.flat ? json("flat") : json(fit_frac.delta)},
      {"fractional_r2", fit_frac.r2},
      {"local_predicted", (ge - 1.0) * (P.p - 1.0) - 1.0},
      {"local_measured", fit_loc.flat ? json("flat") : json(fit_loc.delta)},
      {"local_r2", fit_loc.r2}};
  res.report["solve"] = solve_json(rep);
  res.report["error_inf"] = max_diff_on(rep.solution, w, free);
  res.report["singular_node"] = {{"index", *singular}, {"excluded_from_residual", true}};
  res.report["residual_excluding_singular"] = residual_on(rep.solution, f, *s.quad, free, singular);
  res.files["solution.csv"] = csv_of(rep.solution);
  add_fit_files(res, fit, "oscillation decay at the barrier center", o);
  return res;
}

ExperimentResult run_homogeneous_probe(const ExperimentConfig& c, const RunOptions& o) {
  c.params.require_regularity();
  const auto& P = c.params;
  const auto s = make_setup(c);
  const auto& L = s.lattice;
  bool truncated = false;
  const auto g = sample_with_closure(s, *c.g_spec, c.g_tail, &truncated);
  const auto f = sample_interior(s, FunctionSpec::constant(0.0));
  const auto prob = make_dirichlet_problem(c.domain, f, g, s.quad);
  const auto rep = solve_dirichlet(prob, c.solver.options(c.seed));
  const auto& u = rep.solution;

  const Point x0 = fit_center(c);
  const auto radii = fit_radii(c, L);
  const auto fit = oscillation_exponent_fit(u, x0, radii);
  const Region fit_ball = Region::ball(x0, radii.front());

  RegularityReport reg;
  reg.theta_predicted = theta_exponent(P);
  reg.fit = fit;
  reg.tail_value = tail(u, P.p - 1.0, P.sp(), P.sp(), x0, radii.front());
  reg.seminorms["holder_0.9_fit_ball"] = holder_seminorm(u, 0.9, fit_ball);
  reg.seminorms["lp_fit_ball"] = lattice_norm(u, P.p, fit_ball);
  std::string l23_note;
  try {
    const auto l23 = lemma23_constant(u, 0.5, P.p, x0, 0.5 * radii.front(), 4.0 * L.h());
    reg.constants_measured["lemma23_ratio"] = l23.ratio;
  } catch (const Error& e) {
    l23_note = e.what();
  }
  reg.resolution = resolution_tag(*s.quad);

  ExperimentResult res;
  res.report = header(c, s.quad.get());
  res.report["regularity"] = to_json(reg);
  res.report["delta_measured"] = fit.flat ? json("flat") : json(fit.delta);
  res.report["fit_r2"] = fit.r2;
  res.report["threshold"] = 0.9;
  res.report["almost_lipschitz"] = !fit.flat && fit.delta >= 0.9 && fit.r2 >= 0.98;
  res.report["g_tail_truncated"] = truncated;
  res.report["solve"] = solve_json(rep);
  if (!l23_note.empty()) res.report["lemma23_unavailable"] = l23_note;

  if (c.rescale_R) {
    const double R = *c.rescale_R;
    const double M = c.rescale_M > 0.0 ? c.rescale_M : std::pow(R, P.p / (P.p - 1.0));
    const double res0 = residual_on(u, f, *s.quad, prob.free_nodes());
    const auto scaled = rescale_solution(*s.quad, c.domain.radius, u, R, M);
    const auto fz = std::vector<double>(L.size(), 0.0);
    const double res1 = residual_on(scaled.u, scaled.u.with_values(fz), *scaled.quad, prob.free_nodes());
    const double factor = std::pow(R, P.p) / std::pow(M, P.p - 1.0);
    res.report["rescaling"] = {{"R", R},
                               {"M", M},
                               {"A_rescaled", scaled.params.A},
                               {"residual_original", res0},
                               {"residual_rescaled", res1},
                               {"scaling_factor", factor},
                               {"normalized_ratio", res0 > 0.0 ? res1 / (factor * res0) : 0.0}};
  }
  res.files["solution.csv"] = csv_of(u);
  add_fit_files(res, fit, "interior oscillation decay", o);
  return res;
}

ExperimentResult run_comparison_bounds(const ExperimentConfig& c, const RunOptions&) {
  c.params.require_regularity();
  const auto& P = c.params;
  const auto s = make_setup(c);
  const auto& L = s.lattice;
  bool truncated = false;
  const auto g = sample_with_closure(s, c.g_spec.value_or(FunctionSpec::constant(0.0)), c.g_tail, &truncated);
  const auto f = sample_interior(s, *c.f_spec);
  const auto prob = make_dirichlet_problem(c.domain, f, g, s.quad);
  const auto opts = c.solver.options(c.seed);
  const auto ru = solve_dirichlet(prob, opts);
  const Region ball = c.comparison_ball ? *c.comparison_ball : Region::ball(c.domain.center, 0.5 * c.domain.radius);
  const auto rv = solve_homogeneous_comparison(prob, ru.solution, ball, opts);
  const auto& u = ru.solution;
  const auto& v = rv.solution;

  std::vector<double> dv(L.size());
  double min_diff = 0.0;
  const auto ball_nodes = nodes_in(L, ball);
  for (std::size_t k = 0; k < L.size(); ++k) dv[k] = std::max(u[k] - v[k], 0.0);
  for (auto k : ball_nodes) min_diff = std::min(min_diff, u[k] - v[k]);
  const auto phi = u.with_values(dv);

  const double q = P.q, qc = conjugate(q);
  const double f_q = lattice_norm(f, q, ball);
  const double phi_qc = lattice_norm(phi, qc, ball);
  const double phi_inf = lattice_norm(phi, kInfinity, ball);
  const double grad = gradient_norm(phi, P.p);
  const double measure = ball.measure(P.N);
  const double lhs = std::pow(2.0, 2.0 - P.p) * std::pow(grad, P.p);
  const double rhs = f_q * phi_qc;
  const double scale = std::max(1.0, rhs);
  const double inv_qc = std::isinf(qc) ? 0.0 : 1.0 / qc;
  const double expo = inv_qc - 1.0 / P.p + 1.0 / P.N;
  const double c0 = std::pow(2.0, (P.p - 2.0) / (P.p - 1.0)) * std::pow(f_q, 1.0 / (P.p - 1.0));
  const double bd1_den = c0 * std::pow(measure, P.p / (P.p - 1.0) * expo);
  const double bd2_den = c0 * std::pow(measure, expo / (P.p - 1.0));
  const double inv_q = std::isinf(q) ? 0.0 : 1.0 / q;
  const double p52_den = std::pow(std::pow(measure, P.p / P.N - inv_q) * f_q, 1.0 / (P.p - 1.0));
  const auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };

  RegularityReport reg;
  reg.theta_predicted = theta_exponent(P);
  reg.tail_value = tail(phi, P.p - 1.0, P.sp(), P.sp(), ball.center, ball.radius);
  reg.seminorms["gradient_lp_positive_part"] = grad;
  reg.seminorms["lqprime_positive_part"] = phi_qc;
  reg.constants_measured["bd5_slack"] = rhs - lhs;
  reg.constants_measured["bd1_ratio"] = ratio(phi_qc, bd1_den);
  reg.constants_measured["bd2_ratio"] = ratio(grad, bd2_den);
  reg.constants_measured["prop52_ratio"] = ratio(phi_inf, p52_den);
  std::string bound_note;
  try {
    reg.constants_measured["local_bound_ratio"] = local_bound_check(u, f, P, ball.center, ball.radius, 0.5).ratio;
  } catch (const Error& e) {
    bound_note = e.what();
  }
  reg.resolution = resolution_tag(*s.quad);

  ExperimentResult res;
  res.report = header(c, s.quad.get());
  res.report["regularity"] = to_json(reg);
  res.report["comparison_ball"] = ball;
  res.report["bd5"] = {{"lhs", lhs}, {"rhs", rhs}, {"slack", rhs - lhs}, {"scale", scale},
                       {"holds", rhs - lhs >= -1e-8 * scale}};
  res.report["f_lq_norm"] = f_q;
  res.report["min_u_minus_v"] = min_diff;
  res.report["sup_positive_part"] = phi_inf;
  res.report["g_tail_truncated"] = truncated;
  res.report["solve_u"] = solve_json(ru);
  res.report["solve_v"] = solve_json(rv);
  if (!bound_note.empty()) res.report["local_bound_unavailable"] = bound_note;
  res.files["u.csv"] = csv_of(u);
  res.files["v.csv"] = csv_of(v);
  return res;
}

ExperimentResult run_fuzz_experiment(const ExperimentConfig& c, const RunOptions&) {
  FuzzConfig fc = c.fuzz;
  fc.seed = c.seed;
  const auto rep = run_fuzz(fc);
  ExperimentResult res;
  res.report = header(c, nullptr);
  res.report["fuzz"] = to_json(rep);
  std::ostringstream out;
  out << "inequality,p,gamma,samples,violations,degenerate,worst_slack,max_ratio\n";
  char buf[256];
  for (const auto& r : rep.records) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%llu,%llu,%llu,%.17g,%.17g\n", r.inequality.c_str(), r.p, r.gamma,
                  static_cast<unsigned long long>(r.samples), static_cast<unsigned long long>(r.violations),
                  static_cast<unsigned long long>(r.degenerate), r.worst_slack, r.max_ratio);
    out << buf;
  }
  res.files["fuzz.csv"] = out.str();
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& c, const RunOptions& o) {
  using K = ExperimentConfig::Kind;
  switch (c.kind) {
    case K::Solve: return run_solve(c, o);
    case K::Manufactured: return run_manufactured(c, o);
    case K::Sharpness: return run_sharpness(c, o);
    case K::HomogeneousProbe: return run_homogeneous_probe(c, o);
    case K::ComparisonBounds: return run_comparison_bounds(c, o);
    case K::Fuzz: return run_fuzz_experiment(c, o);
  }
  throw Error("unknown experiment kind");
}

void write_result(const ExperimentResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const std::string& name, const std::string& content) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (std::filesystem::path(dir) / name).string());
    out << content;
  };
  put("report.json", r.report.dump(2) + "\n");
  for (const auto& [name, content] : r.files) put(name, content);
}

}  // namespace mixlap
