#pragma once

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixlap/energy_solver.hpp"
#include "mixlap/lattice.hpp"
#include "mixlap/operators.hpp"

namespace mixlap {

/// min{(p - N/q)/(p - 1), sp/(p - 1), 1}; q = infinity gives N/q = 0.
double theta_exponent(const Params& params);

struct MoserLadder {
  double delta_target = 0.0;
  int i_inf = 0;
  double h0 = 0.0;
  std::vector<double> q;  // q_i = p + i, i = 0..i_inf
  std::vector<double> R;  // R_i = 7/8 - 4 h0 - 14 h0 i
};

/// Minimal i_inf >= 1 with 1 - delta > N/(p + i_inf), h0 = 1/(112 i_inf).
MoserLadder moser_ladder(double delta, const Params& params);

/// [R^beta * integral over |x - x0| > R of |u|^q |x - x0|^{-N-alpha} dx]^{1/q},
/// from lattice cells, annulus cells and the tail model beyond the annulus.
double tail(const LatticeFunction& u, double q, double alpha, double beta, const Point& x0, double R);

/// Max of |u(x) - u(y)| / |x - y|^delta over pairs of nodes in the region.
double holder_seminorm(const LatticeFunction& u, double delta, const Region& region);

struct DifferenceQuotients {
  /// sup over lattice shifts 0 < |z| <= h_max of || delta_z^2 u / |z|^beta ||_{L^q(region)}.
  double second = 0.0;
  /// Same with the first difference delta_z u.
  double first = 0.0;
  MultiIndex second_shift{0, 0};
  MultiIndex first_shift{0, 0};
};

/// Forward differences delta_z u(x) = u(x+z) - u(x), delta_z^2 u(x) =
/// u(x+2z) - 2u(x+z) + u(x). Shifted points must stay on the lattice.
/// strict: restrict to |z| < h_max instead of |z| <= h_max.
DifferenceQuotients second_diff_besov(const LatticeFunction& u, double beta, double q, const Region& region,
                                      double h_max, bool strict = false);

struct SlobodeckiiResult {
  double value = 0.0;
  /// Number of diagonal (x = y) cell pairs left out of the double sum.
  std::size_t excluded_pairs = 0;
};

/// (sum over x != y in the region of |u(x) - u(y)|^q |x - y|^{-N-beta q} h^{2N})^{1/q}.
SlobodeckiiResult sobolev_slobodeckii_seminorm(const LatticeFunction& u, double beta, double q, const Region& region);

/// Lp norm over the nodes in a region (q = infinity allowed).
double lattice_norm(const LatticeFunction& u, double q, const Region& region);

struct Lemma23Result {
  double ratio = 0.0;
  double first_quotient = 0.0;
  double second_quotient = 0.0;
  double lq_norm = 0.0;
};

/// [sup first-difference quotient on B_R] / [sup second-difference quotient on
/// B_{R + 5 h1/2} + (h1^{-beta} + 1) ||u||_{L^q(B_{R + 7 h1/2})}], shifts 0 < |z| < h1.
Lemma23Result lemma23_constant(const LatticeFunction& u, double beta, double q, const Point& x0, double R, double h1);

struct OscillationFit {
  bool flat = false;
  double delta = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::vector<double> radii;
  std::vector<double> oscillation;
  std::vector<double> dropped_radii;
};

/// r_max 2^{-k}, k = 0..K, stopping before radii below min_radius.
std::vector<double> dyadic_radii(double r_max, int K, double min_radius);

/// Least-squares slope of log sup_{B_r(x0)} |u - u(x0)| against log r. x0 must be a node.
OscillationFit oscillation_exponent_fit(const LatticeFunction& u, const Point& x0, const std::vector<double>& radii);

/// Same fit on arbitrary (r, value) samples.
OscillationFit power_law_fit(const std::vector<double>& r, const std::vector<double>& values);

void write_fit_csv(std::ostream& out, const OscillationFit& fit);
std::string fit_svg(const OscillationFit& fit, const std::string& title);

struct LocalBoundResult {
  double ratio = 0.0;
  double sup_inner = 0.0;
  double mean_term = 0.0;
  double tail_term = 0.0;
  double f_term = 0.0;
};

/// ||u+||_{L^inf(B_{sigma R})} / [ (avg_{B_R} (u+)^p)^{1/p} + Tail_{p-1,sp,sp}(u+; x0, R)
///   + (R^{p - N/q} ||f||_{L^q(B_R)})^{1/(p-1)} ].
LocalBoundResult local_bound_check(const LatticeFunction& u, const LatticeFunction& f, const Params& params,
                                   const Point& x0, double R, double sigma);

/// Pointwise positive part, closure included.
LatticeFunction positive_part(const LatticeFunction& u, const Params& params);

/// (sum over elements of w |grad u|^p)^{1/p} with the element gradients of the solver.
double gradient_norm(const LatticeFunction& u, double p);

struct ShiftRatio {
  double ratio = 0.0;
  double shift_norm = 0.0;
  double gradient_norm = 0.0;
  MultiIndex worst_shift{0, 0};
};

/// sup over shifts |z|_inf <= max_shift_cells of ||delta_z u / |z|||_{L^p} divided by
/// the discrete gradient norm; u is extended by zero off the lattice.
ShiftRatio shift_gradient_ratio(const LatticeFunction& u, double p, int max_shift_cells);

struct RescaledSolution {
  std::shared_ptr<const KernelQuadrature> quad;
  LatticeFunction u;
  Params params;
};

/// u_R(x) = u(R x) / M on the lattice scaled by 1/R (same node count), with
/// nonlocal weight A R^{p - sp}. The closure is scaled the same way.
RescaledSolution rescale_solution(const KernelQuadrature& quad, double domain_half_width, const LatticeFunction& u,
                                  double R, double M);

/// Tags every measured constant with the resolution that produced it.
struct RegularityReport {
  double theta_predicted = 0.0;
  std::optional<OscillationFit> fit;
  double tail_value = 0.0;
  std::map<std::string, double> seminorms;
  std::map<std::string, double> constants_measured;
  nlohmann::json resolution;
};

nlohmann::json to_json(const OscillationFit& fit);
nlohmann::json to_json(const RegularityReport& report);
nlohmann::json resolution_tag(const KernelQuadrature& quad);

}  // namespace mixlap
