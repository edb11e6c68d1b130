#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixlap/analysis.hpp"
#include "mixlap/experiments.hpp"
#include "mixlap/inequalities.hpp"
#include "mixlap/parallel.hpp"

using namespace mixlap;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double t = seconds_since(t0);
  if (!o.pass) ++failures;
  std::printf("criterion %2d %-28s %s  (%.1f s) %s\n", id, name.c_str(), o.pass ? "PASS" : "FAIL", t, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ExperimentConfig config(const json& j) { return j.get<ExperimentConfig>(); }

json params_json(double p, double s, double A, int N) { return {{"p", p}, {"s", s}, {"A", A}, {"N", N}, {"q", "inf"}}; }

const json kTarget = json::parse(R"({"kind":"sum","terms":[
  {"kind":"gaussian","amplitude":1,"width":0.5,"center":[0.1,-0.05]},
  {"kind":"affine","slope":[0.3,0.2],"value":0.1}]})");

struct Case {
  double p, s, A;
  int N;
  int n() const { return N == 1 ? 257 : 65; }
};

std::vector<Case> manufactured_cases() {
  std::vector<Case> out;
  for (int N : {1, 2})
    for (double p : {2.0, 3.0})
      for (double s : {0.3, 0.7})
        for (double A : {0.0, 1.0}) out.push_back({p, s, A, N});
  return out;
}

ExperimentConfig manufactured_config(const Case& c) {
  return config({{"kind", "manufactured"},
                 {"params", params_json(c.p, c.s, c.A, c.N)},
                 {"lattice", {{"n_per_axis", c.n()}}},
                 {"target", kTarget},
                 {"solver_opts", {{"tol_residual", 1e-8}, {"random_inits", 2}}},
                 {"seed", 17}});
}

std::string case_name(const Case& c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "N=%d p=%g s=%g A=%g", c.N, c.p, c.s, c.A);
  return buf;
}

// Manufactured runs feed criteria 2 and 3.
std::vector<json> manufactured_reports;
std::vector<double> manufactured_seconds;

Outcome criterion_fuzz() {
  FuzzConfig fc;
  fc.samples = 1000000;
  fc.seed = 20240601;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = run_fuzz(fc);
  const double t = seconds_since(t0);
  double max_ratio = 0.0;
  for (const auto& r : rep.records) max_ratio = std::max(max_ratio, r.max_ratio);
  Outcome o;
  o.pass = rep.total_violations() == 0 && rep.records.size() == 24 && t < 60.0;
  for (const auto& r : rep.records) o.pass = o.pass && r.samples == fc.samples;
  o.detail = std::to_string(rep.records.size()) + " configs x 1e6 samples, violations " +
             std::to_string(rep.total_violations()) + fmt(", max power-test ratio %.3g", max_ratio) +
             fmt(", %.1f s", t);
  return o;
}

Outcome criterion_manufactured() {
  Outcome o;
  double worst_rel = 0.0, worst_res = 0.0, worst_time = 0.0;
  for (const auto& c : manufactured_cases()) {
    const auto cfg = manufactured_config(c);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_manufactured(cfg);
    const double t = seconds_since(t0);
    const int solves = r.report.at("uniqueness").at("solves").get<int>();
    const double per_solve = t / solves;
    manufactured_reports.push_back(r.report);
    manufactured_seconds.push_back(t);
    const double rel = r.report.at("relative_error").get<double>();
    const double res = r.report.at("solve").at("residual_inf").get<double>();
    const bool ok = rel <= 1e-4 && res <= 1e-8 && per_solve < 120.0 && r.report.at("solve").at("converged") == true;
    if (!ok) {
      o.pass = false;
      o.detail += "[" + case_name(c) + fmt(" rel %.2e", rel) + fmt(" res %.2e", res) + fmt(" %.1f s/solve] ", per_solve);
    }
    worst_rel = std::max(worst_rel, rel);
    worst_res = std::max(worst_res, res);
    worst_time = std::max(worst_time, per_solve);
  }
  o.detail += "16 cases, max rel error " + fmt("%.2e", worst_rel) + ", max residual " + fmt("%.2e", worst_res) +
              ", max time per solve " + fmt("%.1f s", worst_time);
  return o;
}

Outcome criterion_uniqueness() {
  Outcome o;
  if (manufactured_reports.size() != 16) return {false, "manufactured runs unavailable"};
  double worst = 0.0;
  const auto cases = manufactured_cases();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& u = manufactured_reports[i].at("uniqueness");
    const double d = u.at("max_difference").get<double>(), scale = u.at("scale").get<double>();
    const int runs = static_cast<int>(u.at("random_runs").size());
    if (!(d <= 1e-6 * scale) || runs < 2) {
      o.pass = false;
      o.detail += "[" + case_name(cases[i]) + fmt(" diff %.2e] ", d);
    }
    worst = std::max(worst, d / scale);
  }
  o.detail += "2 random starts + datum start per case, max difference / scale " + fmt("%.2e", worst);
  return o;
}

/// f = mixed_apply(w) in the domain, g = w outside, evaluated at a perturbed point.
Outcome criterion_gradient() {
  Outcome o;
  double worst = 0.0;
  int checked = 0;
  for (const auto& c : manufactured_cases()) {
    const auto cfg = manufactured_config(c);
    const auto s = make_setup(cfg);
    const auto w = sample_with_closure(s, *cfg.target, std::nullopt);
    const auto free = nodes_in(s.lattice, cfg.domain);
    const auto m = mixed_apply(w, *s.quad, free);
    std::vector<double> f(w.values().size(), 0.0), g(w.values());
    for (std::size_t i = 0; i < free.size(); ++i) {
      f[free[i]] = m.values[i];
      g[free[i]] = 0.0;
    }
    const auto prob = make_dirichlet_problem(cfg.domain, w.with_values(f), w.with_values(g), s.quad);
    std::mt19937_64 rng(1000 + checked);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    std::normal_distribution<double> G;
    std::vector<double> v(w.values());
    for (auto k : free) v[k] += U(rng);
    const auto x = w.with_values(v);
    const auto grad = energy_gradient(prob, x);
    for (int dir = 0; dir < 20; ++dir) {
      std::vector<double> d(v.size(), 0.0);
      double dot = 0.0;
      for (std::size_t i = 0; i < grad.nodes.size(); ++i) {
        d[grad.nodes[i]] = G(rng);
        dot += grad.values[i] * d[grad.nodes[i]];
      }
      dot *= s.lattice.cell_volume();
      const auto energy_at = [&](double t) {
        std::vector<double> y(v);
        for (std::size_t k = 0; k < y.size(); ++k) y[k] += t * d[k];
        return assemble_energy(prob, x.with_values(y)).total;
      };
      const double eps = 1e-5;
      const double fd = (energy_at(eps) - energy_at(-eps)) / (2.0 * eps);
      const double rel = std::abs(fd - dot) / std::abs(dot);
      worst = std::max(worst, rel);
      if (!(rel <= 1e-6)) {
        o.pass = false;
        if (o.detail.size() < 400) o.detail += "[" + case_name(c) + fmt(" rel %.2e] ", rel);
      }
    }
    ++checked;
  }
  o.detail += std::to_string(checked) + " cases x 20 directions, max relative error " + fmt("%.2e", worst);
  return o;
}

Outcome criterion_bd5() {
  Outcome o;
  double worst = 1e300;
  int count = 0;
  for (int N : {1, 2}) {
    for (double p : {2.0, 3.0}) {
      for (double A : {0.0, 1.0}) {
        const auto cfg = config({{"kind", "comparison_bounds"},
                                 {"params", params_json(p, 0.5, A, N)},
                                 {"lattice", {{"n_per_axis", N == 1 ? 257 : 65}}},
                                 {"f_spec", {{"kind", "gaussian"}, {"amplitude", 2}, {"width", 0.4}, {"center", {0.1, 0.05}}}},
                                 {"g_spec", {{"kind", "affine"}, {"slope", {0.2, -0.1}}, {"value", 0.1}}},
                                 {"solver_opts", {{"tol_residual", 1e-10}}}});
        const auto r = run_comparison_bounds(cfg);
        const auto& b = r.report.at("bd5");
        const double slack = b.at("slack").get<double>(), scale = b.at("scale").get<double>();
        worst = std::min(worst, slack / scale);
        if (!(slack >= -1e-8 * scale)) {
          o.pass = false;
          o.detail += "[N=" + std::to_string(N) + fmt(" p=%g", p) + fmt(" A=%g", A) + fmt(" slack %.2e] ", slack);
        }
        ++count;
      }
    }
  }
  o.detail += std::to_string(count) + " comparison pairs, min slack / scale " + fmt("%.3e", worst);
  return o;
}

Outcome criterion_theta() {
  Outcome o;
  const auto th = [](double p, double s, int N, double q) {
    Params P;
    P.p = p;
    P.s = s;
    P.N = N;
    P.q = q;
    return theta_exponent(P);
  };
  const bool arith = th(2.0, 0.5, 1, kInfinity) == 1.0 && th(3.0, 0.5, 2, 4.0) == 0.75 &&
                     std::abs(th(2.0, 0.4, 1, 2.0) - 0.8) < 1e-15;
  const auto cfg = config({{"kind", "sharpness"},
                           {"params", params_json(2.0, 0.4, 1.0, 1)},
                           {"lattice", {{"n_per_axis", 2049}}},
                           {"barrier", {{"gamma_eps", 0.85}}},
                           {"solver_opts", {{"tol_residual", 1e-8}}}});
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_sharpness(cfg);
  const double t = seconds_since(t0);
  const double delta = r.report.at("regularity").at("delta_measured").get<double>();
  const double dev = std::abs(delta - 0.85);
  o.pass = arith && dev <= 0.05 && t < 300.0;
  o.detail = std::string("arithmetic cases ") + (arith ? "exact" : "WRONG") + fmt(", delta_measured %.4f", delta) +
             fmt(" (|dev| %.4f)", dev) + fmt(", %.1f s", t);
  return o;
}

Outcome criterion_moser() {
  Outcome o;
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> D(0.01, 0.99), Pd(2.0, 6.0);
  int bad = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    Params P;
    P.p = Pd(rng);
    P.N = 1 + static_cast<int>(rng() % 2);
    const double delta = D(rng);
    const auto m = moser_ladder(delta, P);
    const double e0 = std::abs(m.R.front() + 4.0 * m.h0 - 0.875);
    const double e1 = std::abs(m.R.back() + 4.0 * m.h0 - 0.75);
    worst = std::max({worst, e0, e1});
    const bool holds = 1.0 - delta > P.N / (P.p + m.i_inf);
    const bool minimal = m.i_inf == 1 || !(1.0 - delta > P.N / (P.p + m.i_inf - 1));
    if (!(e0 <= 1e-12 && e1 <= 1e-12 && holds && minimal)) ++bad;
  }
  o.pass = bad == 0;
  o.detail = "100 random ladders, failures " + std::to_string(bad) + fmt(", max endpoint error %.1e", worst);
  return o;
}

json probe_json(int N, double A) {
  json j = {{"kind", "homogeneous_probe"},
            {"params", params_json(2.0, 0.5, A, N)},
            {"lattice", {{"n_per_axis", N == 1 ? 513 : 97}}},
            {"g_spec", {{"kind", "cone"}, {"amplitude", 1}, {"slope", {1, 0}}, {"value", 0.3}}},
            {"solver_opts", {{"tol_residual", 1e-8}}},
            {"rescale", {{"R", 0.5}}}};
  if (N == 2) j["fit"] = {{"min_radius_cells", 2}};
  return j;
}

std::vector<json> probe_reports;

Outcome criterion_rescaling() {
  Outcome o;
  double worst = 0.0;
  for (int N : {1, 2}) {
    for (double A : {0.0, 1.0}) {
      const auto r = run_homogeneous_probe(config(probe_json(N, A)));
      probe_reports.push_back(r.report);
      const auto& sc = r.report.at("rescaling");
      const double r0 = sc.at("residual_original").get<double>(), r1 = sc.at("residual_rescaled").get<double>();
      const double ratio = r0 > 0.0 ? r1 / r0 : (r1 == 0.0 ? 0.0 : INFINITY);
      worst = std::max(worst, ratio);
      if (!(r1 <= 5.0 * r0)) {
        o.pass = false;
        o.detail += "[N=" + std::to_string(N) + fmt(" A=%g", A) + fmt(" ratio %.3g] ", ratio);
      }
    }
  }
  o.detail += "u_R(x) = u(R x) / M with R = 1/2, M = R^{p/(p-1)}; max rescaled / original residual " + fmt("%.4f", worst);
  return o;
}

Outcome criterion_probe() {
  Outcome o;
  if (probe_reports.size() != 4) return {false, "probe runs unavailable"};
  const char* names[4] = {"1D A=0", "1D A=1", "2D A=0", "2D A=1"};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& fit = probe_reports[i].at("regularity").at("fit");
    const double d = fit.at("delta").get<double>(), r2 = fit.at("r2").get<double>();
    if (!(d >= 0.9 && r2 >= 0.98)) o.pass = false;
    o.detail += std::string(names[i]) + fmt(": delta %.3f", d) + fmt(" R2 %.4f; ", r2);
  }
  return o;
}

Outcome criterion_determinism() {
  Outcome o;
  std::vector<json> configs = {
      {{"kind", "solve"},
       {"params", params_json(3.0, 0.6, 1.0, 2)},
       {"lattice", {{"n_per_axis", 33}}},
       {"f_spec", {{"kind", "constant"}, {"value", 1}}},
       {"g_spec", {{"kind", "gaussian"}, {"amplitude", 1}, {"width", 0.7}}}},
      {{"kind", "manufactured"},
       {"params", params_json(2.5, 0.3, 1.0, 2)},
       {"lattice", {{"n_per_axis", 25}}},
       {"target", kTarget},
       {"solver_opts", {{"random_inits", 1}}}},
      {{"kind", "comparison_bounds"},
       {"params", params_json(3.0, 0.5, 1.0, 2)},
       {"lattice", {{"n_per_axis", 25}}},
       {"f_spec", {{"kind", "gaussian"}, {"amplitude", 2}, {"width", 0.4}}},
       {"g_spec", {{"kind", "constant"}, {"value", 0}}}},
      {{"kind", "sharpness"},
       {"params", params_json(2.0, 0.4, 1.0, 1)},
       {"lattice", {{"n_per_axis", 257}}},
       {"barrier", {{"gamma_eps", 0.85}}}},
      {{"kind", "homogeneous_probe"},
       {"params", params_json(2.0, 0.5, 1.0, 1)},
       {"lattice", {{"n_per_axis", 257}}},
       {"g_spec", {{"kind", "cone"}, {"amplitude", 1}, {"slope", {1, 0}}, {"value", 0.3}}},
       {"rescale", {{"R", 0.5}}}},
      {{"kind", "fuzz"}, {"fuzz", {{"samples", 50000}}}, {"seed", 3}},
  };
  int same = 0;
  for (const auto& j : configs) {
    const auto cfg = config(j);
    set_thread_count(1);
    const auto a = run_experiment(cfg);
    set_thread_count(4);
    const auto b = run_experiment(cfg);
    set_thread_count(1);
    const bool eq = a.report.dump(2) == b.report.dump(2) && a.files == b.files;
    if (eq)
      ++same;
    else
      o.detail += "[" + j.at("kind").get<std::string>() + " differs] ";
  }
  o.pass = same == static_cast<int>(configs.size());
  o.detail += std::to_string(same) + "/" + std::to_string(configs.size()) +
              " experiment kinds byte-identical for threads 1 and 4";
  return o;
}

}  // namespace

int main() {
  set_thread_count(1);
  report(1, "pointwise inequalities", criterion_fuzz);
  report(2, "manufactured recovery", criterion_manufactured);
  report(3, "uniqueness", criterion_uniqueness);
  report(4, "gradient consistency", criterion_gradient);
  report(5, "bd5 slack", criterion_bd5);
  report(6, "theta and sharpness", criterion_theta);
  report(7, "moser ladder", criterion_moser);
  report(8, "rescaling identity", criterion_rescaling);
  report(9, "homogeneous probe", criterion_probe);
  report(10, "determinism", criterion_determinism);
  std::printf("%s: %d of 10 criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
