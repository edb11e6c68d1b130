#include "mixlap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mixlap/parallel.hpp"

namespace mixlap {

// ---------------------------------------------------------------- exponents

double theta_exponent(const Params& params) {
  params.validate();
  const double a = (params.p - params.n_over_q()) / (params.p - 1.0);
  const double b = params.sp() / (params.p - 1.0);
  return std::min({a, b, 1.0});
}

MoserLadder moser_ladder(double delta, const Params& params) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error("moser_ladder: delta must lie in (0,1)");
  params.validate();
  const double p = params.p;
  const int N = params.N;
  const auto ok = [&](int i) { return 1.0 - delta > N / (p + i); };
  int i = std::max(1, static_cast<int>(std::floor(N / (1.0 - delta) - p)));
  while (i > 1 && ok(i - 1)) --i;
  while (!ok(i)) ++i;
  MoserLadder m;
  m.delta_target = delta;
  m.i_inf = i;
  m.h0 = 1.0 / (112.0 * i);
  for (int k = 0; k <= i; ++k) {
    m.q.push_back(p + k);
    m.R.push_back(7.0 / 8.0 - 4.0 * m.h0 - 14.0 * m.h0 * k);
  }
  return m;
}

// ---------------------------------------------------------------- tail

namespace {

/// Integral of |x - x0|^{-1-alpha} over [lo, hi] minus (x0 - R, x0 + R).
double mass_1d(double lo, double hi, double x0, double R, double alpha) {
  double m = 0.0;
  const auto piece = [&](double a, double b) {
    a = std::max(a, R);
    if (b > a) m += (std::pow(a, -alpha) - std::pow(b, -alpha)) / alpha;
  };
  if (hi > x0) piece(std::max(lo - x0, 0.0), hi - x0);
  if (lo < x0) piece(std::max(x0 - hi, 0.0), x0 - lo);
  return m;
}

/// Integral of |x - x0|^{-2-alpha} over a box minus B_R(x0).
double mass_2d(const Point& c, const Point& half, const Point& x0, double R, double alpha) {
  const double dx = std::max(0.0, std::abs(c[0] - x0[0]) - half[0]);
  const double dy = std::max(0.0, std::abs(c[1] - x0[1]) - half[1]);
  const double dmin = std::hypot(dx, dy);
  const double dmax = std::hypot(std::abs(c[0] - x0[0]) + half[0], std::abs(c[1] - x0[1]) + half[1]);
  if (dmax <= R) return 0.0;
  const double vol = 4.0 * half[0] * half[1];
  const double dc = distance(c, x0, 2);
  const bool straddle = dmin < R;
  const double ratio = dc / std::max(half[0], half[1]);
  const int order = straddle ? 8 : (ratio < 3.0 ? 6 : (ratio < 8.0 ? 3 : 1));
  if (order == 1) return vol * std::pow(dc, -2.0 - alpha);
  const auto& g = gauss_legendre(order);
  double acc = 0.0;
  for (int i = 0; i < order; ++i) {
    const double y0 = c[0] + half[0] * g.nodes[i] - x0[0];
    for (int j = 0; j < order; ++j) {
      const double y1 = c[1] + half[1] * g.nodes[j] - x0[1];
      const double r2 = y0 * y0 + y1 * y1;
      if (r2 <= R * R) continue;
      acc += g.weights[i] * g.weights[j] * std::pow(r2, -0.5 * (2.0 + alpha));
    }
  }
  return 0.25 * vol * acc;
}

struct Ray {
  Point theta;
  double rho;
  double weight;
};

std::vector<Ray> rays(const Point& x, const Point& c, double B, int dim, int nodes_per_arc) {
  std::vector<Ray> out;
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

double tail(const LatticeFunction& u, double q, double alpha, double beta, const Point& x0, double R) {
  if (!(R > 0.0)) throw Error("tail: R must be positive");
  if (!(q > 0.0) || !(alpha > 0.0)) throw Error("tail: q and alpha must be positive");
  const auto& closure = u.exterior();
  const auto& tm = closure.tail();
  if (!tm.converges(q, alpha))
    throw Error("tail: the tail model |x|^" + std::to_string(tm.exponent) + " makes the integral diverge for q = " +
                std::to_string(q) + ", alpha = " + std::to_string(alpha));
  const auto& L = u.lattice();
  const int dim = L.dim();
  const double h = L.h();

  std::vector<double> lat(L.size());
  parallel_for(L.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const Point c = L.point(k);
      const double a = std::pow(std::abs(u[k]), q);
      if (a == 0.0) {
        lat[k] = 0.0;
        continue;
      }
      const double m = dim == 1 ? mass_1d(c[0] - 0.5 * h, c[0] + 0.5 * h, x0[0], R, alpha)
                                : mass_2d(c, {0.5 * h, 0.5 * h}, x0, R, alpha);
      lat[k] = a * m;
    }
  });
  double total = 0.0;
  for (double v : lat) total += v;

  const auto& cells = closure.annulus().cells();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const double a = std::pow(std::abs(closure.values()[k]), q);
    if (a == 0.0) continue;
    const auto& c = cells[k];
    const double m = dim == 1 ? mass_1d(c.center[0] - c.half_size[0], c.center[0] + c.half_size[0], x0[0], R, alpha)
                              : mass_2d(c.center, c.half_size, x0, R, alpha);
    total += a * m;
  }

  if (tm.kind == TailModel::Kind::PowerLaw && tm.amplitude != 0.0) {
    const double B = closure.annulus().outer();
    const int K = dim == 1 ? 30 : 16;
    const double kappa = q * tm.exponent / alpha;
    const auto& g = gauss_legendre(6);
    for (const auto& ray : rays(x0, L.center(), B, dim, 16)) {
      const double r0 = std::max(ray.rho, R);
      const double w = ray.weight * std::pow(r0, -alpha) / alpha;
      if (tm.exponent == 0.0) {
        total += w * std::pow(std::abs(tm.amplitude), q);
        continue;
      }
      const auto val = [&](double s) {
        const double r = r0 * std::pow(s, -1.0 / alpha);
        return std::pow(std::abs(closure.tail_value({x0[0] + r * ray.theta[0], x0[1] + r * ray.theta[1]})), q);
      };
      for (int k = 0; k < K; ++k) {
        const double hi = std::ldexp(1.0, -k), lo = 0.5 * hi;
        for (int i = 0; i < 6; ++i)
          total += w * 0.5 * (hi - lo) * g.weights[i] * val(0.5 * (lo + hi) + 0.5 * (hi - lo) * g.nodes[i]);
      }
      total += w * std::ldexp(1.0, -K) * val(std::ldexp(std::pow(1.0 - kappa, 1.0 / kappa), -K));
    }
  }
  return std::pow(std::pow(R, beta) * total, 1.0 / q);
}

// ---------------------------------------------------------------- seminorms

double holder_seminorm(const LatticeFunction& u, double delta, const Region& region) {
  if (!(delta > 0.0 && delta <= 1.0)) throw Error("holder_seminorm: delta must lie in (0,1]");
  const auto& L = u.lattice();
  const auto nodes = nodes_in(L, region);
  if (nodes.size() < 2) throw Error("holder_seminorm: the region holds fewer than two lattice nodes");
  std::vector<double> row(nodes.size(), 0.0);
  parallel_for(nodes.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Point x = L.point(nodes[i]);
      double m = 0.0;
      for (std::size_t j = i + 1; j < nodes.size(); ++j) {
        const double d = distance(x, L.point(nodes[j]), L.dim());
        m = std::max(m, std::abs(u[nodes[i]] - u[nodes[j]]) / std::pow(d, delta));
      }
      row[i] = m;
    }
  });
  return *std::max_element(row.begin(), row.end());
}

double lattice_norm(const LatticeFunction& u, double q, const Region& region) {
  const auto nodes = nodes_in(u.lattice(), region);
  if (std::isinf(q)) {
    double m = 0.0;
    for (auto k : nodes) m = std::max(m, std::abs(u[k]));
    return m;
  }
  double s = 0.0;
  for (auto k : nodes) s += std::pow(std::abs(u[k]), q);
  return std::pow(s * u.lattice().cell_volume(), 1.0 / q);
}

namespace {

std::vector<MultiIndex> lattice_shifts(const Lattice& L, double h_max, bool strict) {
  const int r = static_cast<int>(std::floor(h_max / L.h())) + 1;
  std::vector<MultiIndex> out;
  for (int a = -r; a <= r; ++a) {
    for (int b = (L.dim() == 1 ? 0 : -r); b <= (L.dim() == 1 ? 0 : r); ++b) {
      if (a == 0 && b == 0) continue;
      const double len = L.h() * std::hypot(a, b);
      if (strict ? len < h_max * (1.0 - 1e-12) : len <= h_max * (1.0 + 1e-12)) out.push_back({a, b});
    }
  }
  return out;
}

/// || delta_z^order u ||_{L^q(nodes)}.
double shift_norm(const LatticeFunction& u, const std::vector<std::size_t>& nodes, const MultiIndex& z, int order,
                  double q) {
  const auto& L = u.lattice();
  double s = 0.0;
  for (auto k : nodes) {
    const auto m = L.multi_index(k);
    const MultiIndex m1{m[0] + z[0], m[1] + z[1]};
    const MultiIndex m2{m[0] + 2 * z[0], m[1] + 2 * z[1]};
    if (!L.valid(m1) || (order == 2 && !L.valid(m2)))
      throw Error("difference quotient: region too small, shifted points leave the lattice");
    const double d = order == 1 ? u[L.index(m1)] - u[k] : u[L.index(m2)] - 2.0 * u[L.index(m1)] + u[k];
    if (std::isinf(q))
      s = std::max(s, std::abs(d));
    else
      s += std::pow(std::abs(d), q);
  }
  return std::isinf(q) ? s : std::pow(s * L.cell_volume(), 1.0 / q);
}

}  // namespace

DifferenceQuotients second_diff_besov(const LatticeFunction& u, double beta, double q, const Region& region,
                                      double h_max, bool strict) {
  if (!(beta > 0.0 && beta < 2.0)) throw Error("second_diff_besov: beta must lie in (0,2)");
  if (!(q >= 1.0)) throw Error("second_diff_besov: q must be >= 1");
  const auto& L = u.lattice();
  const auto nodes = nodes_in(L, region);
  if (nodes.empty()) throw Error("second_diff_besov: region too small, it holds no lattice node");
  const auto shifts = lattice_shifts(L, h_max, strict);
  if (shifts.empty()) throw Error("second_diff_besov: h_max is below the lattice spacing");
  std::vector<double> first(shifts.size()), second(shifts.size());
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const double len = L.h() * std::hypot(shifts[i][0], shifts[i][1]);
    second[i] = shift_norm(u, nodes, shifts[i], 2, q) / std::pow(len, beta);
    first[i] = shift_norm(u, nodes, shifts[i], 1, q) / std::pow(len, beta);
  }
  DifferenceQuotients out;
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    if (second[i] > out.second) {
      out.second = second[i];
      out.second_shift = shifts[i];
    }
    if (first[i] > out.first) {
      out.first = first[i];
      out.first_shift = shifts[i];
    }
  }
  return out;
}

SlobodeckiiResult sobolev_slobodeckii_seminorm(const LatticeFunction& u, double beta, double q, const Region& region) {
  if (!(beta > 0.0 && beta < 1.0)) throw Error("sobolev_slobodeckii_seminorm: beta must lie in (0,1)");
  if (!(q >= 1.0) || std::isinf(q)) throw Error("sobolev_slobodeckii_seminorm: q must be finite and >= 1");
  const auto& L = u.lattice();
  const auto nodes = nodes_in(L, region);
  const int N = L.dim();
  std::vector<double> row(nodes.size(), 0.0);
  parallel_for(nodes.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Point x = L.point(nodes[i]);
      double s = 0.0;
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (j == i) continue;
        const double d = distance(x, L.point(nodes[j]), N);
        s += std::pow(std::abs(u[nodes[i]] - u[nodes[j]]), q) * std::pow(d, -N - beta * q);
      }
      row[i] = s;
    }
  });
  double total = 0.0;
  for (double r : row) total += r;
  const double hN = L.cell_volume();
  return {std::pow(total * hN * hN, 1.0 / q), nodes.size()};
}

Lemma23Result lemma23_constant(const LatticeFunction& u, double beta, double q, const Point& x0, double R, double h1) {
  if (!(beta > 0.0 && beta < 1.0)) throw Error("lemma23_constant: beta must lie in (0,1)");
  if (!(R > 0.0) || !(h1 > 0.0)) throw Error("lemma23_constant: R and h1 must be positive");
  const auto& L = u.lattice();
  const double reach = R + 3.5 * h1;
  for (int a = 0; a < L.dim(); ++a) {
    if (std::abs(x0[a] - L.center()[a]) + reach > L.half_width() + 1e-12)
      throw Error("lemma23_constant: domain too small for the ball of radius R + 7 h1 / 2");
  }
  Lemma23Result out;
  out.first_quotient = second_diff_besov(u, beta, q, Region::ball(x0, R), h1, true).first;
  out.second_quotient = second_diff_besov(u, beta, q, Region::ball(x0, R + 2.5 * h1), h1, true).second;
  out.lq_norm = lattice_norm(u, q, Region::ball(x0, reach));
  const double denom = out.second_quotient + (std::pow(h1, -beta) + 1.0) * out.lq_norm;
  out.ratio = denom > 0.0 ? out.first_quotient / denom : 0.0;
  return out;
}

// ---------------------------------------------------------------- fits

std::vector<double> dyadic_radii(double r_max, int K, double min_radius) {
  std::vector<double> r;
  for (int k = 0; k <= K; ++k) {
    const double v = std::ldexp(r_max, -k);
    if (v < min_radius * (1.0 - 1e-12)) break;
    r.push_back(v);
  }
  return r;
}

OscillationFit power_law_fit(const std::vector<double>& r, const std::vector<double>& values) {
  if (r.size() != values.size()) throw Error("power_law_fit: size mismatch");
  OscillationFit fit;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (values[i] > 0.0 && std::isfinite(values[i])) {
      fit.radii.push_back(r[i]);
      fit.oscillation.push_back(values[i]);
    } else {
      fit.dropped_radii.push_back(r[i]);
    }
  }
  if (fit.radii.empty()) {
    fit.flat = true;
    fit.delta = NAN;
    return fit;
  }
  if (fit.radii.size() < 2) throw Error("power_law_fit: fewer than two radii with nonzero oscillation");
  const std::size_t n = fit.radii.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(fit.radii[i]);
    my += std::log(fit.oscillation[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(fit.radii[i]) - mx, dy = std::log(fit.oscillation[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.delta = sxy / sxx;
  fit.intercept = my - fit.delta * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::log(fit.oscillation[i]) - (fit.intercept + fit.delta * std::log(fit.radii[i]));
    ss_res += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

OscillationFit oscillation_exponent_fit(const LatticeFunction& u, const Point& x0, const std::vector<double>& radii) {
  if (radii.size() < 4) throw Error("oscillation_exponent_fit: at least four radii are required");
  const auto& L = u.lattice();
  const auto c = L.node_at(x0);
  if (!c) throw Error("oscillation_exponent_fit: x0 must be a lattice node");
  const double room = L.half_width() - sup_norm(Point{x0[0] - L.center()[0], x0[1] - L.center()[1]}, L.dim());
  for (double r : radii)
    if (!(r > 0.0) || r > room * (1.0 + 1e-12))
      throw Error("oscillation_exponent_fit: radius " + std::to_string(r) + " does not fit inside the lattice");
  const double u0 = u[*c];
  const double rmax = *std::max_element(radii.begin(), radii.end());
  const auto m0 = L.multi_index(*c);
  const int w = static_cast<int>(std::ceil(rmax / L.h())) + 1;
  std::vector<double> osc(radii.size(), 0.0);
  for (int a = -w; a <= w; ++a) {
    for (int b = (L.dim() == 1 ? 0 : -w); b <= (L.dim() == 1 ? 0 : w); ++b) {
      const MultiIndex m{m0[0] + a, m0[1] + b};
      if (!L.valid(m)) continue;
      const double d = L.h() * std::hypot(a, b);
      const double v = std::abs(u[L.index(m)] - u0);
      for (std::size_t i = 0; i < radii.size(); ++i)
        if (d <= radii[i] * (1.0 + 1e-12)) osc[i] = std::max(osc[i], v);
    }
  }
  return power_law_fit(radii, osc);
}

void write_fit_csv(std::ostream& out, const OscillationFit& fit) {
  out << "r,oscillation\n";
  char buf[96];
  for (std::size_t i = 0; i < fit.radii.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", fit.radii[i], fit.oscillation[i]);
    out << buf;
  }
}

std::string fit_svg(const OscillationFit& fit, const std::string& title) {
  std::ostringstream s;
  const double W = 480, H = 360, m = 50;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << m << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  if (fit.radii.size() >= 2) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (std::size_t i = 0; i < fit.radii.size(); ++i) {
      x0 = std::min(x0, std::log10(fit.radii[i]));
      x1 = std::max(x1, std::log10(fit.radii[i]));
      y0 = std::min(y0, std::log10(fit.oscillation[i]));
      y1 = std::max(y1, std::log10(fit.oscillation[i]));
    }
    if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
    const auto X = [&](double v) { return m + (W - 2 * m) * (v - x0) / (x1 - x0); };
    const auto Y = [&](double v) { return H - m - (H - 2 * m) * (v - y0) / (y1 - y0); };
    s << "<line x1=\"" << m << "\" y1=\"" << H - m << "\" x2=\"" << W - m << "\" y2=\"" << H - m
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << H - m << "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < fit.radii.size(); ++i)
      s << "<circle cx=\"" << X(std::log10(fit.radii[i])) << "\" cy=\"" << Y(std::log10(fit.oscillation[i]))
        << "\" r=\"4\" fill=\"steelblue\"/>\n";
    const auto line = [&](double lx) { return (fit.intercept + fit.delta * lx * std::log(10.0)) / std::log(10.0); };
    s << "<line x1=\"" << X(x0) << "\" y1=\"" << Y(line(x0)) << "\" x2=\"" << X(x1) << "\" y2=\"" << Y(line(x1))
      << "\" stroke=\"firebrick\"/>\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "slope %.4f, R^2 %.4f", fit.delta, fit.r2);
    s << "<text x=\"" << m << "\" y=\"" << H - 12 << "\" font-family=\"sans-serif\" font-size=\"12\">" << buf
      << " (log10 r vs log10 osc)</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// ---------------------------------------------------------------- bounds

LatticeFunction positive_part(const LatticeFunction& u, const Params& params) {
  std::vector<double> v(u.values());
  for (auto& x : v) x = std::max(x, 0.0);
  auto closure = std::make_shared<const ExteriorClosure>(u.exterior().positive_part(params));
  return LatticeFunction(u.lattice(), std::move(v), std::move(closure));
}

LocalBoundResult local_bound_check(const LatticeFunction& u, const LatticeFunction& f, const Params& params,
                                   const Point& x0, double R, double sigma) {
  params.require_regularity();
  if (!(sigma > 0.0 && sigma < 1.0)) throw Error("local_bound_check: sigma must lie in (0,1)");
  if (!(R > 0.0 && R < 1.0)) throw Error("local_bound_check: R must lie in (0,1)");
  const auto& L = u.lattice();
  for (int a = 0; a < L.dim(); ++a)
    if (std::abs(x0[a] - L.center()[a]) + R > L.half_width() + 1e-12)
      throw Error("local_bound_check: B_R(x0) must lie inside the lattice");
  LocalBoundResult out;
  for (auto k : nodes_in(L, Region::ball(x0, sigma * R))) out.sup_inner = std::max(out.sup_inner, u[k]);
  if (out.sup_inner <= 0.0) {
    out.sup_inner = 0.0;
    return out;
  }
  const auto ball = nodes_in(L, Region::ball(x0, R));
  double s = 0.0;
  for (auto k : ball) s += std::pow(std::max(u[k], 0.0), params.p);
  out.mean_term = std::pow(s / ball.size(), 1.0 / params.p);
  const auto up = positive_part(u, params);
  out.tail_term = tail(up, params.p - 1.0, params.sp(), params.sp(), x0, R);
  const double fn = lattice_norm(f, params.q, Region::ball(x0, R));
  out.f_term = std::pow(std::pow(R, params.p - params.n_over_q()) * fn, 1.0 / (params.p - 1.0));
  out.ratio = out.sup_inner / (out.mean_term + out.tail_term + out.f_term);
  return out;
}

double gradient_norm(const LatticeFunction& u, double p) {
  const auto& L = u.lattice();
  const double w = detail::element_weight(L);
  double s = 0.0;
  detail::for_each_element(L, [&](const detail::Element& e) {
    const double gx = (u[e.xb] - u[e.xa]) / L.h();
    const double gy = L.dim() == 2 ? (u[e.yb] - u[e.ya]) / L.h() : 0.0;
    s += w * std::pow(gx * gx + gy * gy, 0.5 * p);
  });
  return std::pow(s, 1.0 / p);
}

ShiftRatio shift_gradient_ratio(const LatticeFunction& u, double p, int max_shift_cells) {
  const auto& L = u.lattice();
  const int n = L.n();
  const bool two_d = L.dim() == 2;
  for (std::size_t k = 0; k < L.size(); ++k) {
    const auto m = L.multi_index(k);
    const bool ring = m[0] == 0 || m[0] == n - 1 || (two_d && (m[1] == 0 || m[1] == n - 1));
    if (ring && u[k] != 0.0) throw Error("shift_gradient_ratio: u must vanish on the outer lattice ring");
  }
  if (max_shift_cells < 1) throw Error("shift_gradient_ratio: max_shift_cells must be >= 1");
  const auto val = [&](int i, int j) {
    if (i < 0 || i >= n || (two_d && (j < 0 || j >= n))) return 0.0;
    return u[L.index({i, two_d ? j : 0})];
  };
  ShiftRatio out;
  out.gradient_norm = gradient_norm(u, p);
  const int S = std::min(max_shift_cells, n - 1);
  for (int a = -S; a <= S; ++a) {
    for (int b = (two_d ? -S : 0); b <= (two_d ? S : 0); ++b) {
      if (a == 0 && b == 0) continue;
      double s = 0.0;
      const int lo0 = std::min(0, -a), hi0 = std::max(n - 1, n - 1 - a);
      const int lo1 = two_d ? std::min(0, -b) : 0, hi1 = two_d ? std::max(n - 1, n - 1 - b) : 0;
      for (int i = lo0; i <= hi0; ++i)
        for (int j = lo1; j <= hi1; ++j) s += std::pow(std::abs(val(i + a, j + b) - val(i, j)), p);
      const double norm = std::pow(s * L.cell_volume(), 1.0 / p) / (L.h() * std::hypot(a, b));
      if (norm > out.shift_norm) {
        out.shift_norm = norm;
        out.worst_shift = {a, b};
      }
    }
  }
  out.ratio = out.gradient_norm > 0.0 ? out.shift_norm / out.gradient_norm : 0.0;
  return out;
}

RescaledSolution rescale_solution(const KernelQuadrature& quad, double domain_half_width, const LatticeFunction& u,
                                  double R, double M) {
  if (!(R > 0.0) || !(M > 0.0)) throw Error("rescale_solution: R and M must be positive");
  quad.check_closure(u.exterior());
  const auto& L = quad.lattice();
  Params params = quad.params();
  params.A = params.A * std::pow(R, params.p - params.sp());
  Lattice Ls(L.dim(), {L.center()[0] / R, L.center()[1] / R}, L.half_width() / R, L.n());
  auto qs = std::make_shared<const KernelQuadrature>(params, Ls, domain_half_width / R, quad.settings());
  if (qs->annulus().cells().size() != quad.annulus().cells().size() ||
      qs->annulus().levels() != quad.annulus().levels())
    throw Error("rescale_solution: the scaled annulus does not match the original one");
  std::vector<double> cv(u.exterior().values());
  for (auto& v : cv) v /= M;
  TailModel t = u.exterior().tail();
  if (t.kind == TailModel::Kind::PowerLaw) t.amplitude *= std::pow(R, t.exponent) / M;
  auto closure = std::make_shared<const ExteriorClosure>(qs->annulus_ptr(), std::move(cv), t, params);
  std::vector<double> v(u.values());
  for (auto& x : v) x /= M;
  return {qs, LatticeFunction(Ls, std::move(v), closure), params};
}

// ---------------------------------------------------------------- reports

nlohmann::json to_json(const OscillationFit& fit) {
  nlohmann::json j;
  j["flat"] = fit.flat;
  if (fit.flat)
    j["delta"] = "flat";
  else
    j["delta"] = fit.delta;
  j["intercept"] = fit.intercept;
  j["r2"] = fit.r2;
  j["radii"] = fit.radii;
  j["oscillation"] = fit.oscillation;
  j["dropped_radii"] = fit.dropped_radii;
  return j;
}

nlohmann::json to_json(const RegularityReport& r) {
  nlohmann::json j;
  j["theta_predicted"] = r.theta_predicted;
  if (r.fit) {
    j["delta_measured"] = r.fit->flat ? nlohmann::json("flat") : nlohmann::json(r.fit->delta);
    j["fit"] = to_json(*r.fit);
  }
  j["tail_value"] = r.tail_value;
  j["seminorms"] = r.seminorms;
  j["constants_measured"] = r.constants_measured;
  j["resolution"] = r.resolution;
  return j;
}

nlohmann::json resolution_tag(const KernelQuadrature& quad) {
  const auto& L = quad.lattice();
  const auto& s = quad.settings();
  return {{"dimension", L.dim()},
          {"n_per_axis", L.n()},
          {"h", L.h()},
          {"lattice_half_width", L.half_width()},
          {"near_radius_cells", s.near_radius_cells},
          {"r_trunc_factor", s.r_trunc_factor},
          {"r_trunc", quad.r_trunc()},
          {"annulus_levels", quad.annulus().levels()},
          {"annulus_cells", quad.annulus().cells().size()},
          {"exterior_cells", quad.annulus().cells_across()},
          {"angular_nodes", s.angular_nodes},
          {"far_panels", s.far_panels},
          {"self_cell", "omitted, symmetric pairing"}};
}

}  // namespace mixlap
