#include "mixlap/energy_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mixlap/parallel.hpp"

namespace mixlap {

namespace {

/// |a|^{p-2} from a^2, regularized by eps^2.
double reg_scale(double a2, double eps2, double p) {
  if (p == 2.0) return 1.0;
  const double t = a2 + eps2;
  if (p == 3.0) return std::sqrt(t);
  if (p == 4.0) return t;
  if (t == 0.0) return 0.0;
  return std::pow(t, 0.5 * (p - 2.0));
}

double grad_scale(double g2, double p) { return reg_scale(g2, 0.0, p); }

/// Compensated (Neumaier) summation.
struct Sum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

/// Energy, gradient and preconditioner of the variable part of the energy.
class EnergyModel {
 public:
  explicit EnergyModel(const DirichletProblem& prob)
      : prob_(prob), L_(prob.lattice()), p_(prob.params.p), A_(prob.params.A), hN_(L_.cell_volume()) {
    free_ = prob.free_nodes();
    id_.assign(L_.size(), -1);
    for (std::size_t i = 0; i < free_.size(); ++i) id_[free_[i]] = static_cast<int>(i);
    detail::for_each_element(L_, [&](const detail::Element& e) {
      for (int k = 0; k < e.vertex_count; ++k) {
        if (id_[e.vertices[k]] >= 0) {
          elements_.push_back(e);
          return;
        }
      }
    });
    f_.resize(free_.size());
    for (std::size_t i = 0; i < free_.size(); ++i) f_[i] = prob.f[free_[i]];
  }

  std::size_t size() const { return free_.size(); }
  const std::vector<std::size_t>& free() const { return free_; }
  double cell_volume() const { return hN_; }

  std::vector<double> full(const std::vector<double>& x) const {
    std::vector<double> v = prob_.g.values();
    for (std::size_t i = 0; i < free_.size(); ++i) v[free_[i]] = x[i];
    return v;
  }

  struct Eval {
    double energy = 0.0;
    double abs_sum = 0.0;
    double local = 0.0;
    double nonlocal = 0.0;
    double cross = 0.0;
    double forcing = 0.0;
    std::vector<double> grad;  // per cell volume
    double residual = 0.0;
  };

  Eval evaluate(const std::vector<double>& v) const {
    Eval out;
    const double h = L_.h();
    const double w = detail::element_weight(L_);
    const bool two_d = L_.dim() == 2;
    std::vector<double> loc(L_.size(), 0.0);
    Sum local;
    for (const auto& e : elements_) {
      const double gx = (v[e.xb] - v[e.xa]) / h;
      const double gy = two_d ? (v[e.yb] - v[e.ya]) / h : 0.0;
      const double g2 = gx * gx + gy * gy;
      const double c = grad_scale(g2, p_);
      local.add(w * c * g2 / p_);
      const double fx = w * c * gx / h, fy = w * c * gy / h;
      loc[e.xb] += fx;
      loc[e.xa] -= fx;
      if (two_d) {
        loc[e.yb] += fy;
        loc[e.ya] -= fy;
      }
    }

    const std::size_t m = free_.size();
    std::vector<double> sj(m, 0.0), e_lat(m, 0.0), e_ext(m, 0.0);
    if (A_ > 0.0) {
      parallel_for(m, [&](std::size_t b, std::size_t end) {
        for (std::size_t i = b; i < end; ++i) nonlocal_row(v, i, sj[i], e_lat[i], e_ext[i]);
      });
    }
    out.grad.resize(m);
    Sum forcing, nonlocal, cross;
    for (std::size_t i = 0; i < m; ++i) {
      const double vx = v[free_[i]];
      forcing.add(-hN_ * f_[i] * vx);
      nonlocal.add((A_ / p_) * hN_ * e_lat[i]);
      cross.add((2.0 * A_ / p_) * hN_ * e_ext[i]);
      out.grad[i] = loc[free_[i]] / hN_ + 2.0 * A_ * sj[i] - f_[i];
      out.residual = std::max(out.residual, std::abs(out.grad[i]));
      out.abs_sum += std::abs((A_ / p_) * hN_ * e_lat[i]) + std::abs((2.0 * A_ / p_) * hN_ * e_ext[i]) +
                     std::abs(hN_ * f_[i] * vx);
    }
    out.local = local.value();
    out.nonlocal = nonlocal.value();
    out.cross = cross.value();
    out.forcing = forcing.value();
    out.abs_sum += std::abs(out.local);
    Sum total;
    for (double x : {out.local, out.nonlocal, out.cross, out.forcing}) total.add(x);
    out.energy = total.value();
    return out;
  }

  /// Sparse symmetric positive definite approximation of the Hessian (energy units).
  std::vector<Eigen::Triplet<double>> hessian_approx(const std::vector<double>& v, double band) const {
    std::vector<Eigen::Triplet<double>> t;
    const double h = L_.h();
    const double w = detail::element_weight(L_);
    const bool two_d = L_.dim() == 2;

    double gmax = 0.0, vmin = v[0], vmax = v[0];
    for (const auto& e : elements_) {
      const double gx = (v[e.xb] - v[e.xa]) / h;
      const double gy = two_d ? (v[e.yb] - v[e.ya]) / h : 0.0;
      gmax = std::max(gmax, std::hypot(gx, gy));
    }
    for (double x : v) {
      vmin = std::min(vmin, x);
      vmax = std::max(vmax, x);
    }
    const double eps_g = gmax > 0.0 ? 1e-3 * gmax : 1e-3;
    const double eps_v = vmax > vmin ? 1e-3 * (vmax - vmin) : 1e-3;

    for (const auto& e : elements_) {
      const double gx = (v[e.xb] - v[e.xa]) / h;
      const double gy = two_d ? (v[e.yb] - v[e.ya]) / h : 0.0;
      const double g2 = gx * gx + gy * gy;
      const double c = reg_scale(g2, eps_g * eps_g, p_);
      const double c2 = p_ == 2.0 ? 0.0 : (p_ - 2.0) * c / (g2 + eps_g * eps_g);
      const double S[2][2] = {{c + c2 * gx * gx, c2 * gx * gy}, {c2 * gx * gy, c + c2 * gy * gy}};
      const std::size_t nodes[4] = {e.xa, e.xb, e.ya, e.yb};
      const double B[2][4] = {{-1.0 / h, 1.0 / h, 0.0, 0.0}, {0.0, 0.0, -1.0 / h, 1.0 / h}};
      const int cols = two_d ? 4 : 2;
      for (int a = 0; a < cols; ++a) {
        const int ia = id_[nodes[a]];
        if (ia < 0) continue;
        for (int b = 0; b < cols; ++b) {
          const int ib = id_[nodes[b]];
          if (ib < 0) continue;
          double val = 0.0;
          for (int r = 0; r < 2; ++r)
            for (int s = 0; s < 2; ++s) val += B[r][a] * S[r][s] * B[s][b];
          t.emplace_back(ia, ib, w * val);
        }
      }
    }

    if (A_ > 0.0) {
      const std::size_t m = free_.size();
      const double coef = 2.0 * A_ * (p_ - 1.0) * hN_;
      const double eps2 = eps_v * eps_v;
      std::vector<double> diag(m, 0.0);
      parallel_for(m, [&](std::size_t b, std::size_t end) {
        for (std::size_t i = b; i < end; ++i) diag[i] = coef * nonlocal_diag_row(v, i, eps2);
      });
      for (std::size_t i = 0; i < m; ++i) t.emplace_back(i, i, diag[i]);
      const auto& quad = *prob_.quad;
      const int r = static_cast<int>(std::floor(band));
      for (std::size_t i = 0; i < m; ++i) {
        const auto mi = L_.multi_index(free_[i]);
        const double vx = v[free_[i]];
        for (int a = -r; a <= r; ++a) {
          for (int b = (two_d ? -r : 0); b <= (two_d ? r : 0); ++b) {
            if ((a == 0 && b == 0) || double(a) * a + double(b) * b > band * band) continue;
            const MultiIndex k{mi[0] + a, mi[1] + b};
            if (!L_.valid(k)) continue;
            const int j = id_[L_.index(k)];
            if (j < 0) continue;
            const double d = vx - v[free_[j]];
            t.emplace_back(i, j, -coef * reg_scale(d * d, eps2, p_) * quad.lattice_weight({a, b}));
          }
        }
      }
    }
    return t;
  }

 private:
  void nonlocal_row(const std::vector<double>& v, std::size_t i, double& sj, double& e_lat, double& e_ext) const {
    const auto& quad = *prob_.quad;
    const std::size_t x = free_[i];
    const auto mx = L_.multi_index(x);
    const double vx = v[x];
    const int n = L_.n();
    double s = 0.0;
    Sum ef, ed;
    if (L_.dim() == 1) {
      for (int y = 0; y < n; ++y) {
        if (y == mx[0]) continue;
        const double K = quad.lattice_weight({y - mx[0], 0});
        const double d = vx - v[y];
        const double J = jp(d, p_);
        s += J * K;
        (id_[y] >= 0 ? ef : ed).add(J * d * K);
      }
    } else {
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          const std::size_t y = static_cast<std::size_t>(a) * n + b;
          if (y == x) continue;
          const double K = quad.lattice_weight({a - mx[0], b - mx[1]});
          const double d = vx - v[y];
          const double J = jp(d, p_);
          s += J * K;
          (id_[y] >= 0 ? ef : ed).add(J * d * K);
        }
      }
    }
    const auto& st = *prob_.stencils;
    Sum ex;
    for (std::size_t k = st.begin[i]; k < st.begin[i + 1]; ++k) {
      const double d = vx - st.value[k];
      const double J = jp(d, p_);
      s += J * st.weight[k];
      ex.add(J * d * st.weight[k]);
    }
    sj = s;
    e_lat = ef.value() + 2.0 * ed.value();
    e_ext = ex.value();
  }

  double nonlocal_diag_row(const std::vector<double>& v, std::size_t i, double eps2) const {
    const auto& quad = *prob_.quad;
    const std::size_t x = free_[i];
    const auto mx = L_.multi_index(x);
    const double vx = v[x];
    double s = 0.0;
    for (std::size_t y = 0; y < L_.size(); ++y) {
      if (y == x) continue;
      const auto my = L_.multi_index(y);
      const double d = vx - v[y];
      s += reg_scale(d * d, eps2, p_) * quad.lattice_weight({my[0] - mx[0], my[1] - mx[1]});
    }
    const auto& st = *prob_.stencils;
    for (std::size_t k = st.begin[i]; k < st.begin[i + 1]; ++k) {
      const double d = vx - st.value[k];
      s += reg_scale(d * d, eps2, p_) * st.weight[k];
    }
    return s;
  }

  const DirichletProblem& prob_;
  const Lattice& L_;
  double p_, A_, hN_;
  std::vector<std::size_t> free_;
  std::vector<int> id_;
  std::vector<detail::Element> elements_;
  std::vector<double> f_;
};

void check_feasible(const DirichletProblem& prob, const LatticeFunction& v) {
  if (!(v.lattice() == prob.lattice())) throw Error("infeasible point: lattice differs from the problem's");
  const auto& g = prob.g;
  if (v.exterior_ptr() != g.exterior_ptr()) {
    const auto& a = v.exterior();
    const auto& b = g.exterior();
    if (a.values() != b.values() || a.tail().kind != b.tail().kind || a.tail().amplitude != b.tail().amplitude ||
        a.tail().exponent != b.tail().exponent)
      throw Error("infeasible point: exterior closure differs from the boundary datum");
  }
  std::vector<char> is_free(prob.lattice().size(), 0);
  for (auto k : prob.free_nodes()) is_free[k] = 1;
  for (std::size_t k = 0; k < v.values().size(); ++k) {
    if (is_free[k]) continue;
    if (std::abs(v[k] - g[k]) > 1e-12 * (1.0 + std::abs(g[k]))) {
      const auto x = prob.lattice().point(k);
      throw Error("infeasible point: value differs from the boundary datum at (" + std::to_string(x[0]) + ", " +
                  std::to_string(x[1]) + ")");
    }
  }
}

/// Energy of pairs of fixed lattice nodes; constant on the feasible set.
double fixed_pair_energy(const DirichletProblem& prob) {
  const auto& L = prob.lattice();
  const auto& quad = *prob.quad;
  const double p = prob.params.p;
  std::vector<char> is_free(L.size(), 0);
  for (auto k : prob.free_nodes()) is_free[k] = 1;
  std::vector<double> row(L.size(), 0.0);
  const auto& g = prob.g;
  parallel_for(L.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t x = b; x < e; ++x) {
      if (is_free[x]) continue;
      const auto mx = L.multi_index(x);
      double s = 0.0;
      for (std::size_t y = 0; y < L.size(); ++y) {
        if (y == x || is_free[y]) continue;
        const auto my = L.multi_index(y);
        s += abs_pow(g[x] - g[y], p) * quad.lattice_weight({my[0] - mx[0], my[1] - mx[1]});
      }
      row[x] = s;
    }
  });
  double acc = 0.0;
  for (double r : row) acc += r;
  return (prob.params.A / p) * L.cell_volume() * acc;
}

}  // namespace

DirichletProblem make_dirichlet_problem(const Region& domain, LatticeFunction f, LatticeFunction g,
                                        std::shared_ptr<const KernelQuadrature> quad) {
  if (!quad) throw Error("make_dirichlet_problem: missing kernel quadrature");
  const auto& L = quad->lattice();
  if (!(f.lattice() == L) || !(g.lattice() == L))
    throw Error("make_dirichlet_problem: f and g must live on the quadrature's lattice");
  quad->check_closure(g.exterior());
  if (!(domain.radius > 0.0)) throw Error("make_dirichlet_problem: domain radius must be positive");
  const double h = L.h();
  double reach = 0.0;
  for (int a = 0; a < L.dim(); ++a) reach = std::max(reach, std::abs(domain.center[a] - L.center()[a]) + domain.radius);
  if (reach > L.half_width() - 2.0 * h + 1e-12 * L.half_width())
    throw Error("make_dirichlet_problem: the domain needs a collar of at least two lattice spacings inside the lattice box");
  auto free = nodes_in(L, domain);
  if (free.empty()) throw Error("make_dirichlet_problem: the domain contains no lattice node");

  auto st = std::make_shared<ExteriorStencils>();
  std::vector<std::vector<ExteriorNode>> rows(free.size());
  if (quad->params().A > 0.0) {
    parallel_for(free.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) rows[i] = quad->exterior_stencil(L.point(free[i]), g.exterior());
    });
  }
  st->begin.push_back(0);
  for (const auto& r : rows) {
    for (const auto& node : r) {
      st->value.push_back(node.value);
      st->weight.push_back(node.weight);
    }
    st->begin.push_back(st->value.size());
  }

  DirichletProblem prob{quad->params(),
                        domain,
                        Region::box(L.center(), L.half_width()),
                        quad,
                        std::move(f),
                        std::move(g),
                        std::move(free),
                        st};
  return prob;
}

EnergyTerms assemble_energy(const DirichletProblem& prob, const LatticeFunction& v) {
  check_feasible(prob, v);
  EnergyModel model(prob);
  const auto ev = model.evaluate(v.values());
  EnergyTerms t;
  t.local = ev.local;
  t.nonlocal = ev.nonlocal + (prob.params.A > 0.0 ? fixed_pair_energy(prob) : 0.0);
  t.cross = ev.cross;
  t.forcing = ev.forcing;
  t.total = t.local + t.nonlocal + t.cross + t.forcing;
  return t;
}

NodalField energy_gradient(const DirichletProblem& prob, const LatticeFunction& v) {
  check_feasible(prob, v);
  EnergyModel model(prob);
  auto ev = model.evaluate(v.values());
  return NodalField{prob.free_nodes(), std::move(ev.grad)};
}

double problem_scale(const DirichletProblem& prob) {
  double s = 1.0;
  for (auto k : prob.free_nodes()) s = std::max(s, std::abs(prob.f[k]));
  return s;
}

SolveReport solve_dirichlet(const DirichletProblem& prob, const SolverOptions& opts) {
  if (opts.max_iter < 0) throw Error("solve_dirichlet: max_iter must be nonnegative");
  const double tol = opts.tol_residual > 0.0 ? opts.tol_residual : 1e-8 * problem_scale(prob);
  EnergyModel model(prob);
  const std::size_t m = model.size();
  const double hN = model.cell_volume();
  const int dim = prob.lattice().dim();
  const double band = opts.precond_band > 0.0 ? opts.precond_band : (dim == 1 ? 48.0 : 4.0);

  std::vector<double> x(m);
  if (opts.initial_values) {
    if (opts.initial_values->size() != m) throw Error("solve_dirichlet: initial_values has the wrong size");
    x = *opts.initial_values;
  } else {
    for (std::size_t i = 0; i < m; ++i) x[i] = prob.g[model.free()[i]];
    if (opts.init == SolverOptions::Init::Zero) std::fill(x.begin(), x.end(), 0.0);
    if (opts.init == SolverOptions::Init::Random) {
      std::mt19937_64 rng(opts.seed);
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      for (auto& xi : x) xi += opts.init_amplitude * unif(rng);
    }
  }
  for (double xi : x)
    if (!std::isfinite(xi)) throw Error("solve_dirichlet: non-finite initial value");

  auto v = model.full(x);
  auto ev = model.evaluate(v);
  std::vector<TraceEntry> trace;
  if (opts.record_trace) trace.push_back({ev.energy, 0.0, ev.residual});

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;
  const double c1 = 1e-4;
  int it = 0;
  bool converged = ev.residual <= tol;
  std::string failure;
  int stalls = 0;

  while (!converged && it < opts.max_iter) {
    Eigen::SparseMatrix<double> M(m, m);
    const auto trips = model.hessian_approx(v, band);
    M.setFromTriplets(trips.begin(), trips.end());
    if (!analyzed) {
      ldlt.analyzePattern(M);
      analyzed = true;
    }
    ldlt.factorize(M);
    Eigen::VectorXd gE(m);
    for (std::size_t i = 0; i < m; ++i) gE[i] = hN * ev.grad[i];
    Eigen::VectorXd d;
    if (ldlt.info() == Eigen::Success) d = -ldlt.solve(gE);
    double slope = d.size() == static_cast<Eigen::Index>(m) && d.allFinite() ? gE.dot(d) : 0.0;
    if (!(slope < 0.0)) {
      d = -gE / std::max(M.diagonal().maxCoeff(), 1e-300);
      slope = gE.dot(d);
    }

    const double noise = 1e-12 * std::max(ev.abs_sum, 1e-300);
    double alpha = 1.0;
    bool accepted = false;
    std::vector<double> x_new(m), v_new;
    EnergyModel::Eval ev_new;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < m; ++i) x_new[i] = x[i] + alpha * d[i];
      v_new = model.full(x_new);
      ev_new = model.evaluate(v_new);
      if (std::isfinite(ev_new.energy)) {
        if (ev_new.energy <= ev.energy + c1 * alpha * slope) {
          accepted = true;
          break;
        }
        if (ev_new.energy <= ev.energy + noise) {
          double dphi = 0.0;
          for (std::size_t i = 0; i < m; ++i) dphi += hN * ev_new.grad[i] * d[i];
          if (dphi <= (1.0 - 2.0 * c1) * std::abs(slope)) {
            accepted = true;
            break;
          }
        }
      }
      alpha *= 0.5;
    }
    ++it;
    if (!accepted) {
      failure = "line search failed to decrease the energy";
      break;
    }
    stalls = ev_new.residual < ev.residual ? 0 : stalls + 1;
    x.swap(x_new);
    v.swap(v_new);
    ev = std::move(ev_new);
    if (opts.record_trace) trace.push_back({ev.energy, alpha, ev.residual});
    converged = ev.residual <= tol;
    if (!converged && stalls > 200) {
      failure = "residual stagnated above the tolerance";
      break;
    }
  }

  LatticeFunction solution(prob.lattice(), v, prob.g.exterior_ptr());
  EnergyTerms terms;
  terms.local = ev.local;
  terms.nonlocal = ev.nonlocal + (prob.params.A > 0.0 ? fixed_pair_energy(prob) : 0.0);
  terms.cross = ev.cross;
  terms.forcing = ev.forcing;
  terms.total = terms.local + terms.nonlocal + terms.cross + terms.forcing;
  SolveReport report{std::move(solution), terms, ev.residual, tol, it, converged, std::move(trace)};
  if (!converged) {
    if (failure.empty()) failure = "no convergence within max_iter = " + std::to_string(opts.max_iter);
    char buf[160];
    std::snprintf(buf, sizeof buf, " (residual %.3e, tolerance %.3e, %d iterations)", report.residual_inf, tol, it);
    throw SolveFailure("solve_dirichlet: " + failure + buf, std::move(report));
  }
  return report;
}

DirichletProblem homogeneous_comparison_problem(const DirichletProblem& prob, const LatticeFunction& u,
                                                const Region& ball) {
  if (!(u.lattice() == prob.lattice())) throw Error("homogeneous comparison: u lives on a different lattice");
  for (auto k : nodes_in(prob.lattice(), ball)) {
    if (!prob.domain.contains(prob.lattice().point(k), prob.lattice().dim()))
      throw Error("homogeneous comparison: the ball must lie inside the domain");
  }
  LatticeFunction zero = u.with_values(std::vector<double>(u.values().size(), 0.0));
  return make_dirichlet_problem(ball, zero, u, prob.quad);
}

SolveReport solve_homogeneous_comparison(const DirichletProblem& prob, const LatticeFunction& u, const Region& ball,
                                         const SolverOptions& opts) {
  return solve_dirichlet(homogeneous_comparison_problem(prob, u, ball), opts);
}

}  // namespace mixlap
