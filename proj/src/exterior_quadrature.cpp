#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "mixlap/operators.hpp"

namespace mixlap {

const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  if (n < 1) throw Error("gauss_legendre: order must be >= 1");
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GaussRule g;
  g.nodes.resize(n);
  g.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    g.nodes[n - 1 - i] = x;
    g.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(n, std::move(g)).first->second;
}

namespace {

struct Direction {
  Point theta;
  double rho;     // distance from x to the outer box along theta
  double weight;  // angular weight (1 per ray in 1D)
};

/// Angular rule about x for the exterior of the box of half-width B around c.
std::vector<Direction> directions(const Point& x, const Point& c, double B, int dim, int nodes_per_arc) {
  std::vector<Direction> out;
  if (dim == 1) {
    out.push_back({{1.0, 0.0}, c[0] + B - x[0], 1.0});
    out.push_back({{-1.0, 0.0}, x[0] - (c[0] - B), 1.0});
    return out;
  }
  std::array<double, 4> corner;
  const double sx[4] = {1, -1, -1, 1}, sy[4] = {1, 1, -1, -1};
  for (int k = 0; k < 4; ++k) corner[k] = std::atan2(c[1] + sy[k] * B - x[1], c[0] + sx[k] * B - x[0]);
  std::sort(corner.begin(), corner.end());
  const auto& g = gauss_legendre(nodes_per_arc);
  for (int k = 0; k < 4; ++k) {
    const double a = corner[k];
    const double b = k + 1 < 4 ? corner[k + 1] : corner[0] + 2.0 * M_PI;
    for (int i = 0; i < nodes_per_arc; ++i) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * g.nodes[i];
      const Point th{std::cos(t), std::sin(t)};
      double rho = kInfinity;
      for (int ax = 0; ax < 2; ++ax) {
        if (th[ax] > 0) rho = std::min(rho, (c[ax] + B - x[ax]) / th[ax]);
        if (th[ax] < 0) rho = std::min(rho, (c[ax] - B - x[ax]) / th[ax]);
      }
      out.push_back({th, rho, 0.5 * (b - a) * g.weights[i]});
    }
  }
  return out;
}

}  // namespace

std::vector<double> KernelQuadrature::annulus_weights(const Point& x) const {
  const auto& cells = annulus_->cells();
  const int dim = lattice_.dim();
  const double sp = params_.sp();
  std::vector<double> w(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& c = cells[k];
    if (dim == 1) {
      const double d = std::abs(x[0] - c.center[0]);
      w[k] = (std::pow(d - c.half_size[0], -sp) - std::pow(d + c.half_size[0], -sp)) / sp;
      continue;
    }
    const double d = distance(x, c.center, 2);
    const double ratio = d / std::max(c.half_size[0], c.half_size[1]);
    const int order = ratio < 3.0 ? 6 : (ratio < 8.0 ? 3 : 1);
    if (order == 1) {
      w[k] = c.volume * std::pow(d, -2.0 - sp);
      continue;
    }
    const auto& g = gauss_legendre(order);
    double acc = 0.0;
    for (int i = 0; i < order; ++i) {
      const double y0 = c.center[0] + c.half_size[0] * g.nodes[i] - x[0];
      for (int j = 0; j < order; ++j) {
        const double y1 = c.center[1] + c.half_size[1] * g.nodes[j] - x[1];
        acc += g.weights[i] * g.weights[j] * std::pow(y0 * y0 + y1 * y1, -0.5 * (2.0 + sp));
      }
    }
    w[k] = 0.25 * c.volume * acc;
  }
  return w;
}

double KernelQuadrature::far_mass(const Point& x) const {
  const double sp = params_.sp();
  double m = 0.0;
  for (const auto& d : directions(x, lattice_.center(), annulus_->outer(), lattice_.dim(), settings_.angular_nodes))
    m += d.weight * std::pow(d.rho, -sp) / sp;
  return m;
}

std::vector<ExteriorNode> KernelQuadrature::far_field(const Point& x, const ExteriorClosure& closure) const {
  const auto& tail = closure.tail();
  if (tail.kind == TailModel::Kind::Zero) return {{0.0, far_mass(x)}};
  if (tail.exponent == 0.0 || tail.amplitude == 0.0) return {{tail.value(1.0), far_mass(x)}};

  const double sp = params_.sp();
  const double kappa = (params_.p - 1.0) * tail.exponent / sp;
  const int K = settings_.far_panels;
  const auto& g = gauss_legendre(6);
  const double u_rem = std::ldexp(std::pow(1.0 - kappa, 1.0 / kappa), -K);
  const double w_rem = std::ldexp(1.0, -K);
  std::vector<ExteriorNode> out;
  for (const auto& d : directions(x, lattice_.center(), annulus_->outer(), lattice_.dim(), settings_.angular_nodes)) {
    const double wd = d.weight * std::pow(d.rho, -sp) / sp;
    auto push = [&](double u, double w) {
      const double r = d.rho * std::pow(u, -1.0 / sp);
      const Point y{x[0] + r * d.theta[0], x[1] + r * d.theta[1]};
      out.push_back({closure.tail_value(y), wd * w});
    };
    for (int k = 0; k < K; ++k) {
      const double hi = std::ldexp(1.0, -k), lo = 0.5 * hi;
      for (int i = 0; i < 6; ++i) push(0.5 * (lo + hi) + 0.5 * (hi - lo) * g.nodes[i], 0.5 * (hi - lo) * g.weights[i]);
    }
    push(u_rem, w_rem);
  }
  return out;
}

std::vector<ExteriorNode> KernelQuadrature::exterior_stencil(const Point& x, const ExteriorClosure& closure) const {
  check_closure(closure);
  const auto w = annulus_weights(x);
  std::vector<ExteriorNode> out;
  out.reserve(w.size() + 1);
  for (std::size_t k = 0; k < w.size(); ++k) out.push_back({closure.values()[k], w[k]});
  for (const auto& f : far_field(x, closure)) out.push_back(f);
  return out;
}

}  // namespace mixlap
