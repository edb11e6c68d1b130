#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mixlap/params.hpp"

namespace mixlap {

/// A point of R^N, N <= 2. Unused coordinates are zero.
using Point = std::array<double, 2>;
using MultiIndex = std::array<int, 2>;

double norm(const Point& x, int dim);
double distance(const Point& x, const Point& y, int dim);
double sup_norm(const Point& x, int dim);

/// Uniform tensor grid over [center - L, center + L]^N with an odd number of
/// points per axis, so the center is always a node. Nodes are enumerated in
/// lexicographic multi-index order (first axis slowest).
class Lattice {
 public:
  Lattice(int dim, Point center, double half_width, int n_per_axis);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double h() const { return h_; }
  double half_width() const { return half_width_; }
  const Point& center() const { return center_; }
  std::size_t size() const { return size_; }
  double cell_volume() const { return dim_ == 1 ? h_ : h_ * h_; }
  /// Half-width of the box covered by the node cells, L + h/2.
  double cell_box_half_width() const { return half_width_ + 0.5 * h_; }

  MultiIndex multi_index(std::size_t idx) const;
  std::size_t index(const MultiIndex& m) const;
  bool valid(const MultiIndex& m) const;
  Point point(std::size_t idx) const;
  Point point(const MultiIndex& m) const;

  /// Node within round-off of x, if any.
  std::optional<std::size_t> node_at(const Point& x) const;
  /// Node whose cell contains x, if x lies in the cell box.
  std::optional<std::size_t> cell_of(const Point& x) const;
  bool in_cell_box(const Point& x) const;

  bool operator==(const Lattice& other) const;

 private:
  int dim_;
  Point center_;
  double half_width_;
  int n_;
  double h_;
  std::size_t size_;
};

/// Builds a lattice; n_per_axis must be odd and at least 3.
Lattice make_lattice(int dim, Point center, double half_width, int n_per_axis);

/// Ball or box. Membership is strict: |x - c| < r (Euclidean or sup norm).
struct Region {
  enum class Kind { Ball, Box };
  Kind kind = Kind::Ball;
  Point center{0.0, 0.0};
  double radius = 1.0;

  bool contains(const Point& x, int dim) const;
  double measure(int dim) const;
  static Region ball(Point c, double r) { return {Kind::Ball, c, r}; }
  static Region box(Point c, double r) { return {Kind::Box, c, r}; }
};

enum class PointClass { Interior, Collar, Exterior };

/// Interior: inside the domain; collar: in the lattice cell box but not the
/// domain; exterior: outside the lattice cell box.
PointClass classify(const Lattice& lattice, const Region& domain, const Point& x);

/// Lattice nodes inside a region, ascending.
std::vector<std::size_t> nodes_in(const Lattice& lattice, const Region& region);

/// Far-field model u(x) = amplitude * |x - center|^exponent beyond the
/// sampled annulus (center = lattice center).
struct TailModel {
  enum class Kind { Zero, PowerLaw };
  Kind kind = Kind::Zero;
  double amplitude = 0.0;
  double exponent = 0.0;

  double value(double r) const;
  /// Whether integral of |u|^q |x|^{-N-alpha} converges at infinity.
  bool converges(double q, double alpha) const;

  static TailModel zero() { return {}; }
  static TailModel power_law(double amplitude, double exponent) {
    return {Kind::PowerLaw, amplitude, exponent};
  }
};

struct AnnulusCell {
  Point center;
  Point half_size;  // per axis
  double volume;
};

/// Box-annulus between the lattice cell box and an outer box of half-width
/// r_trunc, tiled by cells whose size doubles with each dyadic level.
class Annulus {
 public:
  /// cells_across: number of cells across the first level's thickness;
  /// 0 picks the lattice spacing in 1D and 12 cells in 2D.
  Annulus(const Lattice& lattice, double r_trunc_requested, int cells_across = 0);

  const Lattice& lattice() const { return lattice_; }
  const std::vector<AnnulusCell>& cells() const { return cells_; }
  double inner() const { return inner_; }
  /// Actual truncation half-width (the requested one rounded up to inner * 2^k).
  double outer() const { return outer_; }
  int levels() const { return levels_; }
  int cells_across() const { return cells_across_; }

  std::optional<std::size_t> locate(const Point& x) const;

 private:
  Lattice lattice_;
  double inner_;
  double outer_;
  int levels_;
  int cells_across_;
  std::vector<AnnulusCell> cells_;
};

/// Data outside the lattice box: annulus samples, then the tail model.
class ExteriorClosure {
 public:
  /// Rejects tail models outside L^{p-1}_{sp}, i.e. (p-1) t >= s p.
  ExteriorClosure(std::shared_ptr<const Annulus> annulus, std::vector<double> values, TailModel tail,
                  const Params& params);

  const Annulus& annulus() const { return *annulus_; }
  const std::shared_ptr<const Annulus>& annulus_ptr() const { return annulus_; }
  const std::vector<double>& values() const { return values_; }
  const TailModel& tail() const { return tail_; }

  /// Value at a point outside the lattice cell box.
  double evaluate(const Point& x) const;
  double tail_value(const Point& x) const;

  /// Pointwise positive part of the closure (power-law tails with negative
  /// amplitude become zero).
  ExteriorClosure positive_part(const Params& params) const;

 private:
  std::shared_ptr<const Annulus> annulus_;
  std::vector<double> values_;
  TailModel tail_;
};

/// Grid values plus exterior closure. Immutable after construction.
class LatticeFunction {
 public:
  LatticeFunction(Lattice lattice, std::vector<double> values, std::shared_ptr<const ExteriorClosure> exterior);

  const Lattice& lattice() const { return lattice_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t idx) const { return values_[idx]; }
  const ExteriorClosure& exterior() const { return *exterior_; }
  const std::shared_ptr<const ExteriorClosure>& exterior_ptr() const { return exterior_; }

  /// Node value inside the cell box (piecewise constant per cell), closure outside.
  double evaluate(const Point& x) const;

  LatticeFunction with_values(std::vector<double> values) const;

 private:
  Lattice lattice_;
  std::vector<double> values_;
  std::shared_ptr<const ExteriorClosure> exterior_;
};

/// Flat CSV: one row per node, "i,value" (1D) or "i,j,value" (2D).
void write_csv(std::ostream& out, const LatticeFunction& u);
std::vector<double> read_csv(std::istream& in, const Lattice& lattice);

}  // namespace mixlap
