#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "mixlap/lattice.hpp"

namespace mixlap {

/// |a|^{p-2} a, with J_p(0) = 0.
double jp(double a, double p);
/// |a|^p.
double abs_pow(double a, double p);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(int n);

struct QuadratureSettings {
  /// Offsets with |z| <= near_radius_cells (in units of h) are summed in +-z pairs.
  double near_radius_cells = 4.0;
  /// Truncation half-width of the sampled annulus, relative to the domain half-width.
  double r_trunc_factor = 8.0;
  /// Cells across the first annulus level (0: automatic).
  int exterior_cells = 0;
  /// Gauss nodes per angular arc of the far-field rule (2D).
  int angular_nodes = 8;
  /// Dyadic panels of the far-field radial rule (0: 30 in 1D, 12 in 2D).
  int far_panels = 0;
};

/// One exterior contribution seen from a node: value of the datum and
/// integrated kernel weight.
struct ExteriorNode {
  double value;
  double weight;
};

/// Discretization of the kernel |x - y|^{-N-sp} on the lattice, the sampled
/// annulus and the analytic far field. All weights are integrated kernel
/// masses, so sums of J_p(u(x) - u(y)) * weight approximate the principal
/// value integral.
class KernelQuadrature {
 public:
  KernelQuadrature(const Params& params, const Lattice& lattice, double domain_half_width,
                   QuadratureSettings settings = {});

  const Params& params() const { return params_; }
  const Lattice& lattice() const { return lattice_; }
  const QuadratureSettings& settings() const { return settings_; }
  const std::shared_ptr<const Annulus>& annulus_ptr() const { return annulus_; }
  const Annulus& annulus() const { return *annulus_; }
  double r_trunc() const { return annulus_->outer(); }

  /// Kernel mass of the lattice cell at offset z (0 for z = 0).
  double lattice_weight(const MultiIndex& z) const {
    const int a = z[0] < 0 ? -z[0] : z[0];
    const int b = z[1] < 0 ? -z[1] : z[1];
    return table_[static_cast<std::size_t>(a) * table_stride_ + b];
  }
  /// Near offsets, one per +-z pair, ordered by |z| then lexicographically.
  const std::vector<MultiIndex>& near_offsets() const { return near_; }
  bool is_near(const MultiIndex& z) const;

  /// Annulus cell masses seen from x, in annulus cell order.
  std::vector<double> annulus_weights(const Point& x) const;
  /// Far-field nodes beyond the annulus seen from x for the given tail model.
  std::vector<ExteriorNode> far_field(const Point& x, const ExteriorClosure& closure) const;
  /// Total kernel mass beyond the annulus seen from x.
  double far_mass(const Point& x) const;
  /// Annulus cells followed by far-field nodes.
  std::vector<ExteriorNode> exterior_stencil(const Point& x, const ExteriorClosure& closure) const;

  /// Bound on the omitted self-cell contribution for a function with local
  /// Lipschitz constant lip (infinite when p - 1 <= sp).
  double omitted_mass_bound(double lip) const;

  /// Throws unless the closure was built on this quadrature's annulus.
  void check_closure(const ExteriorClosure& closure) const;

 private:
  Params params_;
  Lattice lattice_;
  QuadratureSettings settings_;
  std::shared_ptr<const Annulus> annulus_;
  std::vector<double> table_;
  std::size_t table_stride_;
  std::vector<MultiIndex> near_;
};

/// Nodes away from the outermost lattice ring, where the local stencil fits.
std::vector<std::size_t> interior_nodes(const Lattice& lattice);

/// Operator values on selected nodes.
struct NodalField {
  std::vector<std::size_t> nodes;
  std::vector<double> values;
};

/// Delta_p^h u at a node (divergence form, not negated).
double p_laplacian_at(const LatticeFunction& u, double p, std::size_t node);
/// Delta_p^h u on every node off the outer ring, or on the given nodes.
NodalField p_laplacian_apply(const LatticeFunction& u, const Params& params);
NodalField p_laplacian_apply(const LatticeFunction& u, const Params& params, const std::vector<std::size_t>& nodes);

struct FracDetail {
  double near = 0.0;
  double mid = 0.0;
  double annulus = 0.0;
  double far = 0.0;
  double total = 0.0;
  /// Bound on the omitted self-cell term (metadata, not part of total).
  double omitted_bound = 0.0;
};

/// Principal value of integral J_p(u(x) - u(y)) |x - y|^{-N-sp} dy at a lattice node.
double frac_p_laplacian_apply(const LatticeFunction& u, const KernelQuadrature& quad, std::size_t node);
FracDetail frac_p_laplacian_detail(const LatticeFunction& u, const KernelQuadrature& quad, std::size_t node);

/// -Delta_p^h u + 2 A * frac(u) on the given nodes. The factor 2 counts
/// both orientations of each pair in the double integral, so this is the
/// exact first variation of the discrete energy.
NodalField mixed_apply(const LatticeFunction& u, const KernelQuadrature& quad, const std::vector<std::size_t>& nodes);
NodalField mixed_apply(const LatticeFunction& u, const KernelQuadrature& quad);

namespace detail {

/// Local elements: intervals (1D) or the four corner triangles of each cell
/// (2D). The element gradient is ((u[xb] - u[xa]) / h, (u[yb] - u[ya]) / h).
struct Element {
  std::size_t xa, xb, ya, yb;
  std::array<std::size_t, 3> vertices;
  int vertex_count;
};

template <class Fn>
void for_each_element(const Lattice& L, Fn&& fn) {
  const int n = L.n();
  if (L.dim() == 1) {
    for (int i = 0; i + 1 < n; ++i) {
      const std::size_t a = i, b = i + 1;
      fn(Element{a, b, 0, 0, {a, b, 0}, 2});
    }
    return;
  }
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      for (int ci = 0; ci < 2; ++ci) {
        for (int cj = 0; cj < 2; ++cj) {
          const std::size_t corner = L.index({i + ci, j + cj});
          const std::size_t xn = L.index({i + 1 - ci, j + cj});
          const std::size_t yn = L.index({i + ci, j + 1 - cj});
          const std::size_t xa = L.index({i, j + cj}), xb = L.index({i + 1, j + cj});
          const std::size_t ya = L.index({i + ci, j}), yb = L.index({i + ci, j + 1});
          fn(Element{xa, xb, ya, yb, {corner, xn, yn}, 3});
        }
      }
    }
  }
}

/// Elements having the node as a vertex.
std::vector<Element> elements_at(const Lattice& L, std::size_t node);

/// Measure of one element: h in 1D, h^2/4 in 2D.
inline double element_weight(const Lattice& L) { return L.dim() == 1 ? L.h() : 0.25 * L.h() * L.h(); }

}  // namespace detail

}  // namespace mixlap
