#include "mixlap/operators.hpp"

#include <algorithm>
#include <cmath>

#include "mixlap/parallel.hpp"

namespace mixlap {

double jp(double a, double p) {
  if (p == 2.0) return a;
  if (p == 3.0) return std::abs(a) * a;
  if (p == 4.0) return a * a * a;
  if (a == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(a), p - 1.0), a);
}

double abs_pow(double a, double p) {
  if (p == 2.0) return a * a;
  if (p == 3.0) return std::abs(a) * a * a;
  if (p == 4.0) return (a * a) * (a * a);
  return std::pow(std::abs(a), p);
}

namespace {

/// |g|^{p-2} from |g|^2.
double flux_scale(double g2, double p) {
  if (p == 2.0) return 1.0;
  if (p == 3.0) return std::sqrt(g2);
  if (p == 4.0) return g2;
  if (g2 == 0.0) return 0.0;
  return std::pow(g2, 0.5 * (p - 2.0));
}

/// Integral of |t|^{-2-sp} over the unit cell centered at (a, b).
double cell_kernel_2d(int a, int b, double sp) {
  if (a == 0 && b == 0) return 0.0;
  const int m = std::max(a, b);
  const int order = m <= 2 ? 16 : (m <= 6 ? 4 : 1);
  if (order == 1) return std::pow(double(a) * a + double(b) * b, -0.5 * (2.0 + sp));
  const auto& g = gauss_legendre(order);
  double acc = 0.0;
  for (int i = 0; i < order; ++i) {
    const double x = a + 0.5 * g.nodes[i];
    for (int j = 0; j < order; ++j) {
      const double y = b + 0.5 * g.nodes[j];
      acc += 0.25 * g.weights[i] * g.weights[j] * std::pow(x * x + y * y, -0.5 * (2.0 + sp));
    }
  }
  return acc;
}

double cell_kernel_1d(int a, double sp) {
  if (a == 0) return 0.0;
  return (std::pow(a - 0.5, -sp) - std::pow(a + 0.5, -sp)) / sp;
}

}  // namespace

KernelQuadrature::KernelQuadrature(const Params& params, const Lattice& lattice, double domain_half_width,
                                   QuadratureSettings settings)
    : params_(params), lattice_(lattice), settings_(settings) {
  params_.validate();
  if (params_.N != lattice.dim()) throw Error("KernelQuadrature: params.N does not match the lattice dimension");
  if (!(settings_.near_radius_cells >= 1.0)) throw Error("KernelQuadrature: near_radius_cells must be >= 1");
  if (!(settings_.r_trunc_factor > 0.0)) throw Error("KernelQuadrature: r_trunc_factor must be positive");
  if (!(domain_half_width > 0.0)) throw Error("KernelQuadrature: domain half-width must be positive");
  if (settings_.angular_nodes < 1) throw Error("KernelQuadrature: angular_nodes must be >= 1");
  if (settings_.far_panels <= 0) settings_.far_panels = lattice.dim() == 1 ? 30 : 12;
  const double requested = std::max(settings_.r_trunc_factor * domain_half_width, lattice.cell_box_half_width());
  annulus_ = std::make_shared<const Annulus>(lattice, requested, settings_.exterior_cells);

  const int n = lattice.n();
  const double sp = params_.sp();
  const double scale = std::pow(lattice.h(), -sp);
  if (lattice.dim() == 1) {
    table_stride_ = 1;
    table_.resize(n);
    for (int a = 0; a < n; ++a) table_[a] = scale * cell_kernel_1d(a, sp);
  } else {
    table_stride_ = n;
    table_.resize(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b <= a; ++b)
        table_[a * table_stride_ + b] = table_[b * table_stride_ + a] = scale * cell_kernel_2d(a, b, sp);
  }

  const int r = static_cast<int>(std::floor(settings_.near_radius_cells));
  for (int a = 0; a <= r; ++a) {
    for (int b = lattice.dim() == 1 ? 0 : -r; b <= (lattice.dim() == 1 ? 0 : r); ++b) {
      const MultiIndex z{a, b};
      if (a == 0 && b <= 0) continue;
      if (is_near(z)) near_.push_back(z);
    }
  }
  std::sort(near_.begin(), near_.end(), [](const MultiIndex& x, const MultiIndex& y) {
    const int nx = x[0] * x[0] + x[1] * x[1], ny = y[0] * y[0] + y[1] * y[1];
    return nx != ny ? nx < ny : x < y;
  });
}

bool KernelQuadrature::is_near(const MultiIndex& z) const {
  const double r2 = double(z[0]) * z[0] + double(z[1]) * z[1];
  return r2 > 0.0 && r2 <= settings_.near_radius_cells * settings_.near_radius_cells;
}

double KernelQuadrature::omitted_mass_bound(double lip) const {
  const double p = params_.p, sp = params_.sp();
  if (p - 1.0 <= sp) return kInfinity;
  const int N = lattice_.dim();
  const double rho = 0.5 * std::sqrt(double(N)) * lattice_.h();
  const double sigma = N == 1 ? 2.0 : 2.0 * M_PI;
  return sigma * std::pow(lip, p - 1.0) * std::pow(rho, p - 1.0 - sp) / (p - 1.0 - sp);
}

void KernelQuadrature::check_closure(const ExteriorClosure& closure) const {
  const auto& a = closure.annulus();
  if (closure.annulus_ptr() == annulus_) return;
  if (!(a.lattice() == lattice_) || a.outer() != annulus_->outer() || a.cells_across() != annulus_->cells_across() ||
      a.cells().size() != annulus_->cells().size())
    throw Error("exterior closure was sampled on a different annulus than the kernel quadrature uses");
}

std::vector<std::size_t> interior_nodes(const Lattice& L) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < L.size(); ++k) {
    const auto m = L.multi_index(k);
    bool ok = m[0] >= 1 && m[0] <= L.n() - 2;
    if (L.dim() == 2) ok = ok && m[1] >= 1 && m[1] <= L.n() - 2;
    if (ok) out.push_back(k);
  }
  return out;
}

namespace detail {

std::vector<Element> elements_at(const Lattice& L, std::size_t node) {
  std::vector<Element> out;
  const auto m = L.multi_index(node);
  const int n = L.n();
  if (L.dim() == 1) {
    if (m[0] >= 1) out.push_back(Element{node - 1, node, 0, 0, {node - 1, node, 0}, 2});
    if (m[0] + 1 < n) out.push_back(Element{node, node + 1, 0, 0, {node, node + 1, 0}, 2});
    return out;
  }
  for (int i = m[0] - 1; i <= m[0]; ++i) {
    for (int j = m[1] - 1; j <= m[1]; ++j) {
      if (i < 0 || j < 0 || i + 1 >= n || j + 1 >= n) continue;
      for (int ci = 0; ci < 2; ++ci) {
        for (int cj = 0; cj < 2; ++cj) {
          const std::size_t corner = L.index({i + ci, j + cj});
          const std::size_t xn = L.index({i + 1 - ci, j + cj});
          const std::size_t yn = L.index({i + ci, j + 1 - cj});
          if (corner != node && xn != node && yn != node) continue;
          const std::size_t xa = L.index({i, j + cj}), xb = L.index({i + 1, j + cj});
          const std::size_t ya = L.index({i + ci, j}), yb = L.index({i + ci, j + 1});
          out.push_back(Element{xa, xb, ya, yb, {corner, xn, yn}, 3});
        }
      }
    }
  }
  return out;
}

}  // namespace detail

namespace {

bool on_outer_ring(const Lattice& L, std::size_t node) {
  const auto m = L.multi_index(node);
  if (m[0] == 0 || m[0] == L.n() - 1) return true;
  return L.dim() == 2 && (m[1] == 0 || m[1] == L.n() - 1);
}

void require_interior(const Lattice& L, std::size_t node) {
  if (node >= L.size() || on_outer_ring(L, node)) {
    const auto x = node < L.size() ? L.point(node) : Point{NAN, NAN};
    throw Error("operator requested at a node without a full stencil (" + std::to_string(x[0]) + ", " +
                std::to_string(x[1]) + ")");
  }
}

double local_lipschitz(const LatticeFunction& u, std::size_t node) {
  const auto& L = u.lattice();
  const auto m = L.multi_index(node);
  double lip = 0.0;
  for (int a = -1; a <= 1; ++a) {
    for (int b = (L.dim() == 1 ? 0 : -1); b <= (L.dim() == 1 ? 0 : 1); ++b) {
      const MultiIndex k{m[0] + a, m[1] + b};
      if ((a == 0 && b == 0) || !L.valid(k)) continue;
      lip = std::max(lip, std::abs(u[L.index(k)] - u[node]) / (L.h() * std::hypot(a, b)));
    }
  }
  return lip;
}

}  // namespace

double p_laplacian_at(const LatticeFunction& u, double p, std::size_t node) {
  const auto& L = u.lattice();
  require_interior(L, node);
  const double h = L.h();
  const double w = detail::element_weight(L);
  double acc = 0.0;
  for (const auto& e : detail::elements_at(L, node)) {
    const double gx = (u[e.xb] - u[e.xa]) / h;
    const double gy = L.dim() == 2 ? (u[e.yb] - u[e.ya]) / h : 0.0;
    const double c = flux_scale(gx * gx + gy * gy, p);
    double d = 0.0;
    if (node == e.xb) d += gx;
    if (node == e.xa) d -= gx;
    if (L.dim() == 2) {
      if (node == e.yb) d += gy;
      if (node == e.ya) d -= gy;
    }
    acc += w * c * d / h;
  }
  return -acc / L.cell_volume();
}

NodalField p_laplacian_apply(const LatticeFunction& u, const Params& params, const std::vector<std::size_t>& nodes) {
  NodalField out{nodes, std::vector<double>(nodes.size())};
  for (auto k : nodes) require_interior(u.lattice(), k);
  parallel_for(nodes.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out.values[i] = p_laplacian_at(u, params.p, nodes[i]);
  });
  return out;
}

NodalField p_laplacian_apply(const LatticeFunction& u, const Params& params) {
  return p_laplacian_apply(u, params, interior_nodes(u.lattice()));
}

FracDetail frac_p_laplacian_detail(const LatticeFunction& u, const KernelQuadrature& quad, std::size_t node) {
  const auto& L = u.lattice();
  if (!(L == quad.lattice())) throw Error("frac_p_laplacian: function and quadrature use different lattices");
  quad.check_closure(u.exterior());
  require_interior(L, node);
  const double p = quad.params().p;
  const auto m = L.multi_index(node);
  const double ux = u[node];
  FracDetail d;

  for (const auto& z : quad.near_offsets()) {
    const MultiIndex a{m[0] + z[0], m[1] + z[1]}, b{m[0] - z[0], m[1] - z[1]};
    double pair = 0.0;
    if (L.valid(a)) pair += jp(ux - u[L.index(a)], p);
    if (L.valid(b)) pair += jp(ux - u[L.index(b)], p);
    d.near += pair * quad.lattice_weight(z);
  }

  const int n = L.n();
  if (L.dim() == 1) {
    for (int i = 0; i < n; ++i) {
      const MultiIndex z{i - m[0], 0};
      if (z[0] == 0 || quad.is_near(z)) continue;
      d.mid += jp(ux - u[i], p) * quad.lattice_weight(z);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const MultiIndex z{i - m[0], j - m[1]};
        if ((z[0] == 0 && z[1] == 0) || quad.is_near(z)) continue;
        d.mid += jp(ux - u[static_cast<std::size_t>(i) * n + j], p) * quad.lattice_weight(z);
      }
    }
  }

  const Point x = L.point(node);
  const auto weights = quad.annulus_weights(x);
  const auto& vals = u.exterior().values();
  for (std::size_t k = 0; k < weights.size(); ++k) d.annulus += jp(ux - vals[k], p) * weights[k];
  for (const auto& f : quad.far_field(x, u.exterior())) d.far += jp(ux - f.value, p) * f.weight;

  d.total = d.near + d.mid + d.annulus + d.far;
  d.omitted_bound = quad.omitted_mass_bound(local_lipschitz(u, node));
  return d;
}

double frac_p_laplacian_apply(const LatticeFunction& u, const KernelQuadrature& quad, std::size_t node) {
  return frac_p_laplacian_detail(u, quad, node).total;
}

NodalField mixed_apply(const LatticeFunction& u, const KernelQuadrature& quad, const std::vector<std::size_t>& nodes) {
  const auto& params = quad.params();
  NodalField out{nodes, std::vector<double>(nodes.size())};
  for (auto k : nodes) require_interior(u.lattice(), k);
  if (params.A > 0.0) quad.check_closure(u.exterior());
  parallel_for(nodes.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double v = -p_laplacian_at(u, params.p, nodes[i]);
      if (params.A > 0.0) v += 2.0 * params.A * frac_p_laplacian_apply(u, quad, nodes[i]);
      out.values[i] = v;
    }
  });
  return out;
}

NodalField mixed_apply(const LatticeFunction& u, const KernelQuadrature& quad) {
  return mixed_apply(u, quad, interior_nodes(u.lattice()));
}

}  // namespace mixlap
