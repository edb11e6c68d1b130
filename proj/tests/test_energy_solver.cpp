#include <cmath>
#include <random>

#include "doctest.h"
#include "mixlap/descriptor.hpp"
#include "mixlap/energy_solver.hpp"

using namespace mixlap;

namespace {

Params make_params(double p, double s, double A, int N) {
  Params P;
  P.p = p;
  P.s = s;
  P.A = A;
  P.N = N;
  return P;
}

struct Bench {
  std::shared_ptr<const KernelQuadrature> quad;
  Region domain;

  const Lattice& lattice() const { return quad->lattice(); }

  LatticeFunction sample_fn(const FunctionSpec& fn) const {
    const auto tail = default_tail(fn, lattice().center(), quad->params());
    auto cl = std::make_shared<const ExteriorClosure>(sample_closure(fn, quad->annulus_ptr(), tail.model, quad->params()));
    return sample(fn, lattice(), cl);
  }

  DirichletProblem problem(const FunctionSpec& f, const FunctionSpec& g) const {
    const auto G = sample_fn(g);
    return make_dirichlet_problem(domain, G.with_values(sample_fn(f).values()), G, quad);
  }
};

Bench make_bench(const Params& P, int n, double half_width = 1.5, double radius = 1.0) {
  const auto L = make_lattice(P.N, {0.0, 0.0}, half_width, n);
  return {std::make_shared<const KernelQuadrature>(P, L, radius), Region::ball({0.0, 0.0}, radius)};
}

LatticeFunction perturb(const DirichletProblem& prob, const LatticeFunction& base, double amp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-amp, amp);
  std::vector<double> v(base.values());
  for (auto k : prob.free_nodes()) v[k] += U(rng);
  return base.with_values(v);
}

double max_diff(const LatticeFunction& a, const LatticeFunction& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

FunctionSpec smooth_target() {
  return FunctionSpec::sum({FunctionSpec::gaussian(1.0, 0.5, {0.1, -0.05}), FunctionSpec::affine({0.3, 0.2}, 0.1)});
}

/// f := mixed_apply(w) on the free nodes, g := w off the domain.
DirichletProblem manufactured(const Bench& b, const FunctionSpec& w_spec, LatticeFunction* w_out = nullptr) {
  const auto w = b.sample_fn(w_spec);
  const auto free = nodes_in(b.lattice(), b.domain);
  const auto m = mixed_apply(w, *b.quad, free);
  std::vector<double> f(w.values().size(), 0.0), g(w.values());
  for (std::size_t i = 0; i < free.size(); ++i) {
    f[free[i]] = m.values[i];
    g[free[i]] = 0.0;
  }
  if (w_out) *w_out = w;
  return make_dirichlet_problem(b.domain, w.with_values(f), w.with_values(g), b.quad);
}

}  // namespace

TEST_CASE("energy of the zero problem is zero") {
  for (int N : {1, 2}) {
    const auto b = make_bench(make_params(3.0, 0.5, 1.0, N), N == 1 ? 33 : 13);
    const auto prob = b.problem(FunctionSpec::constant(0.0), FunctionSpec::constant(0.0));
    const auto e = assemble_energy(prob, prob.g);
    CHECK(e.total == 0.0);
    CHECK(e.local == 0.0);
    CHECK(e.nonlocal == 0.0);
    CHECK(e.cross == 0.0);
  }
}

TEST_CASE("A = 0, 1D affine: local energy is |m|^p |Omega| / p") {
  for (double p : {2.0, 3.0, 4.0}) {
    const auto b = make_bench(make_params(p, 0.5, 0.0, 1), 13);  // h = 1/4, +-1 are nodes
    const double m = 0.7;
    const auto prob = b.problem(FunctionSpec::constant(0.0), FunctionSpec::affine({m, 0.0}, 0.2));
    const auto e = assemble_energy(prob, prob.g);
    CHECK(e.local == doctest::Approx(2.0 * std::pow(m, p) / p).epsilon(1e-13));
    CHECK(e.total == doctest::Approx(e.local).epsilon(1e-13));
  }
}

TEST_CASE("nonlocal and cross terms against a brute-force double sum (n = 9)") {
  for (double p : {2.0, 2.5, 3.0}) {
    const double s = 0.4, A = 0.8;
    const auto P = make_params(p, s, A, 1);
    const auto b = make_bench(P, 9, 1.0, 0.45);
    const auto& L = b.lattice();
    const double h = L.h(), sp = s * p;
    const auto prob = b.problem(FunctionSpec::constant(0.0), FunctionSpec::constant(0.0));
    const auto v = perturb(prob, prob.g, 1.0, 5);

    const auto cell = [&](int a) {
      const double d = std::abs(a);
      return std::pow(h, -sp) * (std::pow(d - 0.5, -sp) - std::pow(d + 0.5, -sp)) / sp;
    };
    double nl = 0.0;
    for (std::size_t x = 0; x < L.size(); ++x)
      for (std::size_t y = 0; y < L.size(); ++y)
        if (x != y) nl += std::pow(std::abs(v[x] - v[y]), p) * cell(static_cast<int>(x) - static_cast<int>(y));
    nl *= (A / p) * h;
    const double B = L.cell_box_half_width();
    double cross = 0.0;
    for (auto k : prob.free_nodes()) {
      const double x = L.point(k)[0];
      const double mass = (std::pow(B - x, -sp) + std::pow(B + x, -sp)) / sp;
      cross += std::pow(std::abs(v[k]), p) * mass;
    }
    cross *= (2.0 * A / p) * h;
    const auto e = assemble_energy(prob, v);
    CHECK(e.nonlocal == doctest::Approx(nl).epsilon(1e-12));
    CHECK(e.cross == doctest::Approx(cross).epsilon(1e-12));
  }
}

TEST_CASE("energy gradient matches central differences") {
  for (int N : {1, 2}) {
    for (double p : {2.0, 3.0}) {
      const auto b = make_bench(make_params(p, 0.3, 1.0, N), N == 1 ? 65 : 17);
      const auto prob = b.problem(FunctionSpec::gaussian(2.0, 0.4), smooth_target());
      const auto v = perturb(prob, prob.g, 0.5, 9);
      const auto g = energy_gradient(prob, v);
      std::mt19937_64 rng(21);
      std::normal_distribution<double> G;
      for (int t = 0; t < 5; ++t) {
        std::vector<double> d(v.values().size(), 0.0);
        double dot = 0.0;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
          d[g.nodes[i]] = G(rng);
          dot += g.values[i] * d[g.nodes[i]];
        }
        dot *= b.lattice().cell_volume();
        const double eps = 1e-6;
        std::vector<double> vp(v.values()), vm(v.values());
        for (std::size_t k = 0; k < d.size(); ++k) {
          vp[k] += eps * d[k];
          vm[k] -= eps * d[k];
        }
        const double fd = (assemble_energy(prob, v.with_values(vp)).total - assemble_energy(prob, v.with_values(vm)).total) / (2.0 * eps);
        CHECK(std::abs(fd - dot) <= 1e-6 * std::abs(dot));
      }
    }
  }
}

TEST_CASE("energy gradient equals mixed_apply - f") {
  const auto b = make_bench(make_params(3.0, 0.6, 1.0, 2), 17);
  const auto prob = b.problem(FunctionSpec::gaussian(2.0, 0.4), smooth_target());
  const auto v = perturb(prob, prob.g, 0.5, 3);
  const auto g = energy_gradient(prob, v);
  const auto m = mixed_apply(v, *b.quad, g.nodes);
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    CHECK(g.values[i] == doctest::Approx(m.values[i] - prob.f[g.nodes[i]]).epsilon(1e-10).scale(1.0));
}

TEST_CASE("A = 0, p = 2: gradient is the standard Poisson residual") {
  for (int N : {1, 2}) {
    const auto b = make_bench(make_params(2.0, 0.5, 0.0, N), N == 1 ? 33 : 13);
    const auto& L = b.lattice();
    const auto prob = b.problem(FunctionSpec::constant(1.5), FunctionSpec::gaussian(1.0, 0.7));
    const auto v = perturb(prob, prob.g, 0.3, 4);
    const auto g = energy_gradient(prob, v);
    const double h2 = L.h() * L.h();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto m = L.multi_index(g.nodes[i]);
      const auto at = [&](int a, int c) { return v[L.index({m[0] + a, m[1] + c})]; };
      double lap = (at(1, 0) - 2.0 * at(0, 0) + at(-1, 0)) / h2;
      if (N == 2) lap += (at(0, 1) - 2.0 * at(0, 0) + at(0, -1)) / h2;
      CHECK(g.values[i] == doctest::Approx(-lap - 1.5).epsilon(1e-10));
    }
  }
}

TEST_CASE("infeasible points are rejected") {
  const auto b = make_bench(make_params(2.0, 0.5, 1.0, 1), 33);
  const auto prob = b.problem(FunctionSpec::constant(0.0), FunctionSpec::constant(0.0));
  std::vector<double> v(prob.g.values());
  v[0] = 1.0;  // outer ring, off the domain
  CHECK_THROWS_AS(assemble_energy(prob, prob.g.with_values(v)), Error);
}

TEST_CASE("geometry: the domain needs a collar of two spacings") {
  const auto P = make_params(2.0, 0.5, 1.0, 1);
  const auto L = make_lattice(1, {0.0, 0.0}, 1.0, 21);
  auto quad = std::make_shared<const KernelQuadrature>(P, L, 1.0);
  auto cl = std::make_shared<const ExteriorClosure>(quad->annulus_ptr(), std::vector<double>(quad->annulus().cells().size(), 0.0),
                                                    TailModel::zero(), P);
  const auto z = sample(FunctionSpec::constant(0.0), L, cl);
  CHECK_THROWS_AS(make_dirichlet_problem(Region::ball({0.0, 0.0}, 0.85), z, z, quad), Error);
  CHECK_NOTHROW(make_dirichlet_problem(Region::ball({0.0, 0.0}, 0.8), z, z, quad));
}

TEST_CASE("trivial solves") {
  for (int N : {1, 2}) {
    for (double p : {2.0, 3.0}) {
      for (double A : {0.0, 1.0}) {
        const auto b = make_bench(make_params(p, 0.5, A, N), N == 1 ? 65 : 17);
        const auto zero = b.problem(FunctionSpec::constant(0.0), FunctionSpec::constant(0.0));
        const auto r0 = solve_dirichlet(zero);
        CHECK(r0.residual_inf == 0.0);
        for (double x : r0.solution.values()) CHECK(x == 0.0);

        // Residual tol allows a deviation of order tol^{1/(p-1)} for degenerate p.
        const auto cst = b.problem(FunctionSpec::constant(0.0), FunctionSpec::constant(0.75));
        SolverOptions o;
        o.init = SolverOptions::Init::Zero;
        const auto r1 = solve_dirichlet(cst, o);
        const double bound = 10.0 * std::pow(r1.tol_residual, 1.0 / (p - 1.0));
        for (auto k : cst.free_nodes()) CHECK(std::abs(r1.solution[k] - 0.75) <= bound);
      }
    }
  }
}

TEST_CASE("affine data with A = 0 is reproduced exactly") {
  for (int N : {1, 2}) {
    for (double p : {2.0, 3.0}) {
      const auto b = make_bench(make_params(p, 0.5, 0.0, N), N == 1 ? 65 : 17);
      const auto prob = b.problem(FunctionSpec::constant(0.0), FunctionSpec::affine({0.4, -0.3}, 0.2));
      SolverOptions o;
      o.init = SolverOptions::Init::Zero;
      const auto r = solve_dirichlet(prob, o);
      CHECK(max_diff(r.solution, prob.g) < 1e-8);
    }
  }
}

TEST_CASE("manufactured recovery, trace monotone") {
  for (int N : {1, 2}) {
    for (double p : {2.0, 3.0}) {
      const auto b = make_bench(make_params(p, 0.5, 1.0, N), N == 1 ? 129 : 25);
      LatticeFunction w = b.sample_fn(FunctionSpec::constant(0.0));
      const auto prob = manufactured(b, smooth_target(), &w);
      const auto r = solve_dirichlet(prob);
      CHECK(r.converged);
      CHECK(r.residual_inf <= r.tol_residual);
      const double scale = problem_scale(prob);
      CHECK(max_diff(r.solution, w) <= 10.0 * std::pow(r.tol_residual, 1.0 / (p - 1.0)) * scale);
      double emax = 1.0;
      for (const auto& t : r.trace) emax = std::max(emax, std::abs(t.energy));
      for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].energy <= r.trace[k - 1].energy + 1e-12 * emax);
      const auto g = energy_gradient(prob, r.solution);
      double gi = 0.0;
      for (double x : g.values) gi = std::max(gi, std::abs(x));
      CHECK(gi <= r.tol_residual);
    }
  }
}

TEST_CASE("convexity of the discrete energy") {
  for (int N : {1, 2}) {
    const auto b = make_bench(make_params(3.0, 0.4, 1.0, N), N == 1 ? 65 : 17);
    const auto prob = b.problem(FunctionSpec::gaussian(1.0, 0.5), smooth_target());
    for (int t = 0; t < 4; ++t) {
      const auto v0 = perturb(prob, prob.g, 1.0, 100 + t), v1 = perturb(prob, prob.g, 1.0, 200 + t);
      const double e0 = assemble_energy(prob, v0).total, e1 = assemble_energy(prob, v1).total;
      for (double lam : {0.25, 0.5, 0.75}) {
        std::vector<double> m(v0.values().size());
        for (std::size_t k = 0; k < m.size(); ++k) m[k] = lam * v0[k] + (1.0 - lam) * v1[k];
        const double em = assemble_energy(prob, v0.with_values(m)).total;
        CHECK(em <= lam * e0 + (1.0 - lam) * e1 + 1e-10 * std::max({1.0, std::abs(e0), std::abs(e1)}));
      }
    }
  }
}

TEST_CASE("uniqueness from random initializations") {
  const auto b = make_bench(make_params(3.0, 0.7, 1.0, 1), 129);
  const auto prob = b.problem(FunctionSpec::gaussian(3.0, 0.3), smooth_target());
  SolverOptions o1, o2;
  o1.init = o2.init = SolverOptions::Init::Random;
  o1.seed = 1;
  o2.seed = 2;
  const auto r1 = solve_dirichlet(prob, o1), r2 = solve_dirichlet(prob, o2);
  CHECK(max_diff(r1.solution, r2.solution) <= 1e-6 * problem_scale(prob));
}

TEST_CASE("comparison: f1 <= f2 gives u1 <= u2") {
  for (int N : {1, 2}) {
    const auto b = make_bench(make_params(2.5, 0.5, 1.0, N), N == 1 ? 97 : 17);
    const auto g = smooth_target();
    const auto p1 = b.problem(FunctionSpec::gaussian(1.0, 0.4), g);
    const auto p2 = b.problem(FunctionSpec::sum({FunctionSpec::gaussian(1.0, 0.4), FunctionSpec::constant(0.5)}), g);
    const auto u1 = solve_dirichlet(p1).solution, u2 = solve_dirichlet(p2).solution;
    const double scale = std::max(problem_scale(p1), problem_scale(p2));
    for (std::size_t k = 0; k < u1.values().size(); ++k) CHECK(u1[k] <= u2[k] + 1e-8 * scale);
  }
}

TEST_CASE("homogeneous comparison") {
  SUBCASE("f = 0 gives v = u") {
    const auto b = make_bench(make_params(3.0, 0.5, 1.0, 1), 97);
    const auto prob = b.problem(FunctionSpec::constant(0.0), smooth_target());
    const auto u = solve_dirichlet(prob).solution;
    const auto v = solve_homogeneous_comparison(prob, u, Region::ball({0.1, 0.0}, 0.5)).solution;
    CHECK(max_diff(u, v) < 1e-7);
  }
  SUBCASE("f >= 0 gives u >= v") {
    const auto b = make_bench(make_params(2.5, 0.5, 1.0, 2), 17);
    const auto prob = b.problem(FunctionSpec::gaussian(2.0, 0.5), smooth_target());
    const auto u = solve_dirichlet(prob).solution;
    const auto v = solve_homogeneous_comparison(prob, u, Region::ball({0.0, 0.0}, 0.6)).solution;
    for (std::size_t k = 0; k < u.values().size(); ++k) CHECK(u[k] >= v[k] - 1e-8);
  }
  SUBCASE("p = 2, A = 0, 1D: linear interpolant of u at the ball's outer neighbours") {
    const auto b = make_bench(make_params(2.0, 0.5, 0.0, 1), 97);
    const auto& L = b.lattice();
    const auto prob = b.problem(FunctionSpec::gaussian(2.0, 0.5), smooth_target());
    const auto u = solve_dirichlet(prob).solution;
    const Region ball = Region::ball({0.1, 0.0}, 0.4);
    SolverOptions o;
    o.tol_residual = 1e-12;
    const auto v = solve_homogeneous_comparison(prob, u, ball, o).solution;
    const auto nodes = nodes_in(L, ball);
    const std::size_t lo = nodes.front() - 1, hi = nodes.back() + 1;
    const double xl = L.point(lo)[0], xh = L.point(hi)[0];
    for (auto k : nodes) {
      const double x = L.point(k)[0];
      const double lin = u[lo] + (u[hi] - u[lo]) * (x - xl) / (xh - xl);
      CHECK(v[k] == doctest::Approx(lin).epsilon(1e-9));
    }
  }
}

TEST_CASE("solver failure carries the best iterate") {
  const auto b = make_bench(make_params(3.0, 0.5, 1.0, 1), 65);
  const auto prob = b.problem(FunctionSpec::gaussian(5.0, 0.3), smooth_target());
  SolverOptions o;
  o.max_iter = 1;
  o.tol_residual = 1e-14;
  try {
    solve_dirichlet(prob, o);
    FAIL("expected a failure");
  } catch (const SolveFailure& e) {
    CHECK_FALSE(e.report().converged);
    CHECK(e.report().residual_inf > 1e-14);
    CHECK(e.report().solution.values().size() == b.lattice().size());
  }
}
