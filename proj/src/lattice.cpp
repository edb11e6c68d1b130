#include "mixlap/lattice.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace mixlap {

double norm(const Point& x, int dim) { return dim == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]); }

double distance(const Point& x, const Point& y, int dim) {
  return norm(Point{x[0] - y[0], x[1] - y[1]}, dim);
}

double sup_norm(const Point& x, int dim) {
  return dim == 1 ? std::abs(x[0]) : std::max(std::abs(x[0]), std::abs(x[1]));
}

// ---------------------------------------------------------------- Lattice

Lattice::Lattice(int dim, Point center, double half_width, int n_per_axis)
    : dim_(dim), center_(center), half_width_(half_width), n_(n_per_axis) {
  if (dim != 1 && dim != 2) throw Error("Lattice: dimension must be 1 or 2");
  if (n_per_axis < 3 || n_per_axis % 2 == 0)
    throw Error("Lattice: n_per_axis must be odd and >= 3 (got " + std::to_string(n_per_axis) + ")");
  if (!(half_width > 0.0) || !std::isfinite(half_width)) throw Error("Lattice: half_width must be positive");
  if (dim == 1) center_[1] = 0.0;
  h_ = 2.0 * half_width / (n_per_axis - 1);
  size_ = dim == 1 ? static_cast<std::size_t>(n_) : static_cast<std::size_t>(n_) * n_;
}

MultiIndex Lattice::multi_index(std::size_t idx) const {
  if (dim_ == 1) return {static_cast<int>(idx), 0};
  return {static_cast<int>(idx / n_), static_cast<int>(idx % n_)};
}

std::size_t Lattice::index(const MultiIndex& m) const {
  if (dim_ == 1) return static_cast<std::size_t>(m[0]);
  return static_cast<std::size_t>(m[0]) * n_ + m[1];
}

bool Lattice::valid(const MultiIndex& m) const {
  if (m[0] < 0 || m[0] >= n_) return false;
  if (dim_ == 1) return m[1] == 0;
  return m[1] >= 0 && m[1] < n_;
}

Point Lattice::point(const MultiIndex& m) const {
  const int mid = (n_ - 1) / 2;
  Point x{center_[0] + h_ * (m[0] - mid), 0.0};
  if (dim_ == 2) x[1] = center_[1] + h_ * (m[1] - mid);
  return x;
}

Point Lattice::point(std::size_t idx) const { return point(multi_index(idx)); }

std::optional<std::size_t> Lattice::node_at(const Point& x) const {
  const int mid = (n_ - 1) / 2;
  MultiIndex m{0, 0};
  for (int a = 0; a < dim_; ++a) {
    const double t = (x[a] - center_[a]) / h_;
    const double r = std::round(t);
    if (std::abs(t - r) > 1e-9) return std::nullopt;
    m[a] = static_cast<int>(r) + mid;
  }
  if (!valid(m)) return std::nullopt;
  return index(m);
}

bool Lattice::in_cell_box(const Point& x) const {
  return sup_norm(Point{x[0] - center_[0], x[1] - center_[1]}, dim_) <= cell_box_half_width();
}

std::optional<std::size_t> Lattice::cell_of(const Point& x) const {
  if (!in_cell_box(x)) return std::nullopt;
  const int mid = (n_ - 1) / 2;
  MultiIndex m{0, 0};
  for (int a = 0; a < dim_; ++a) {
    const int k = static_cast<int>(std::lround((x[a] - center_[a]) / h_)) + mid;
    m[a] = std::clamp(k, 0, n_ - 1);
  }
  return index(m);
}

bool Lattice::operator==(const Lattice& o) const {
  return dim_ == o.dim_ && center_ == o.center_ && half_width_ == o.half_width_ && n_ == o.n_;
}

Lattice make_lattice(int dim, Point center, double half_width, int n_per_axis) {
  return Lattice(dim, center, half_width, n_per_axis);
}

// ---------------------------------------------------------------- Region

bool Region::contains(const Point& x, int dim) const {
  const Point d{x[0] - center[0], x[1] - center[1]};
  return (kind == Kind::Ball ? norm(d, dim) : sup_norm(d, dim)) < radius;
}

double Region::measure(int dim) const {
  if (dim == 1) return 2.0 * radius;
  return kind == Kind::Ball ? M_PI * radius * radius : 4.0 * radius * radius;
}

PointClass classify(const Lattice& lattice, const Region& domain, const Point& x) {
  if (domain.contains(x, lattice.dim())) return PointClass::Interior;
  if (lattice.in_cell_box(x)) return PointClass::Collar;
  return PointClass::Exterior;
}

std::vector<std::size_t> nodes_in(const Lattice& lattice, const Region& region) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < lattice.size(); ++i)
    if (region.contains(lattice.point(i), lattice.dim())) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------- TailModel

double TailModel::value(double r) const {
  if (kind == Kind::Zero) return 0.0;
  return amplitude * std::pow(r, exponent);
}

bool TailModel::converges(double q, double alpha) const {
  if (kind == Kind::Zero || amplitude == 0.0) return true;
  return q * exponent < alpha;
}

// ---------------------------------------------------------------- Annulus

namespace {

void tile_rectangle(std::vector<AnnulusCell>& cells, const Point& lo, const Point& hi, double target, int dim,
                    const Point& shift) {
  const int nx = std::max(1, static_cast<int>(std::lround((hi[0] - lo[0]) / target)));
  const int ny = dim == 1 ? 1 : std::max(1, static_cast<int>(std::lround((hi[1] - lo[1]) / target)));
  const double wx = (hi[0] - lo[0]) / nx;
  const double wy = dim == 1 ? 0.0 : (hi[1] - lo[1]) / ny;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      AnnulusCell c;
      c.center = {shift[0] + lo[0] + (i + 0.5) * wx, dim == 1 ? 0.0 : shift[1] + lo[1] + (j + 0.5) * wy};
      c.half_size = {0.5 * wx, 0.5 * wy};
      c.volume = dim == 1 ? wx : wx * wy;
      cells.push_back(c);
    }
  }
}

}  // namespace

Annulus::Annulus(const Lattice& lattice, double r_trunc_requested, int cells_across)
    : lattice_(lattice), inner_(lattice.cell_box_half_width()) {
  if (!(r_trunc_requested > 0.0)) throw Error("Annulus: truncation radius must be positive");
  const int dim = lattice.dim();
  if (cells_across <= 0)
    cells_across = dim == 1 ? static_cast<int>(std::ceil(inner_ / lattice.h() - 1e-9)) : 12;
  cells_across_ = cells_across;
  levels_ = 0;
  double b = inner_;
  while (b < r_trunc_requested * (1.0 - 1e-12)) {
    b *= 2.0;
    ++levels_;
  }
  outer_ = b;
  const Point shift = lattice.center();
  b = inner_;
  double size = inner_ / cells_across;
  for (int k = 0; k < levels_; ++k) {
    const double B = 2.0 * b;
    if (dim == 1) {
      tile_rectangle(cells_, {-B, 0.0}, {-b, 0.0}, size, dim, shift);
      tile_rectangle(cells_, {b, 0.0}, {B, 0.0}, size, dim, shift);
    } else {
      tile_rectangle(cells_, {-B, -B}, {B, -b}, size, dim, shift);
      tile_rectangle(cells_, {-B, b}, {B, B}, size, dim, shift);
      tile_rectangle(cells_, {-B, -b}, {-b, b}, size, dim, shift);
      tile_rectangle(cells_, {b, -b}, {B, b}, size, dim, shift);
    }
    b = B;
    size *= 2.0;
  }
}

std::optional<std::size_t> Annulus::locate(const Point& x) const {
  const int dim = lattice_.dim();
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const auto& c = cells_[k];
    bool inside = std::abs(x[0] - c.center[0]) <= c.half_size[0];
    if (dim == 2) inside = inside && std::abs(x[1] - c.center[1]) <= c.half_size[1];
    if (inside) return k;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- ExteriorClosure

ExteriorClosure::ExteriorClosure(std::shared_ptr<const Annulus> annulus, std::vector<double> values, TailModel tail,
                                 const Params& params)
    : annulus_(std::move(annulus)), values_(std::move(values)), tail_(tail) {
  if (!annulus_) throw Error("ExteriorClosure: missing annulus");
  if (values_.size() != annulus_->cells().size())
    throw Error("ExteriorClosure: annulus sample count does not match the annulus");
  for (double v : values_)
    if (!std::isfinite(v)) throw Error("ExteriorClosure: non-finite annulus sample");
  if (!std::isfinite(tail_.amplitude) || !std::isfinite(tail_.exponent))
    throw Error("ExteriorClosure: non-finite tail model");
  if (!tail_.converges(params.p - 1.0, params.sp()))
    throw Error("ExteriorClosure: power-law tail with exponent " + std::to_string(tail_.exponent) +
                " violates (p-1) t < s p; the function is not in the tail space");
}

double ExteriorClosure::tail_value(const Point& x) const {
  const auto& c = annulus_->lattice().center();
  return tail_.value(distance(x, c, annulus_->lattice().dim()));
}

double ExteriorClosure::evaluate(const Point& x) const {
  if (auto k = annulus_->locate(x)) return values_[*k];
  return tail_value(x);
}

ExteriorClosure ExteriorClosure::positive_part(const Params& params) const {
  std::vector<double> v(values_);
  for (auto& x : v) x = std::max(x, 0.0);
  TailModel t = tail_;
  if (t.kind == TailModel::Kind::PowerLaw && t.amplitude < 0.0) t = TailModel::zero();
  return ExteriorClosure(annulus_, std::move(v), t, params);
}

// ---------------------------------------------------------------- LatticeFunction

LatticeFunction::LatticeFunction(Lattice lattice, std::vector<double> values,
                                 std::shared_ptr<const ExteriorClosure> exterior)
    : lattice_(std::move(lattice)), values_(std::move(values)), exterior_(std::move(exterior)) {
  if (values_.size() != lattice_.size()) throw Error("LatticeFunction: value count does not match the lattice");
  if (!exterior_) throw Error("LatticeFunction: missing exterior closure");
  if (!(exterior_->annulus().lattice() == lattice_))
    throw Error("LatticeFunction: exterior closure was built for a different lattice");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      const auto x = lattice_.point(i);
      throw Error("LatticeFunction: non-finite value at (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) + ")");
    }
  }
}

double LatticeFunction::evaluate(const Point& x) const {
  if (auto k = lattice_.cell_of(x)) return values_[*k];
  return exterior_->evaluate(x);
}

LatticeFunction LatticeFunction::with_values(std::vector<double> values) const {
  return LatticeFunction(lattice_, std::move(values), exterior_);
}

// ---------------------------------------------------------------- CSV

void write_csv(std::ostream& out, const LatticeFunction& u) {
  const auto& L = u.lattice();
  out << (L.dim() == 1 ? "i,value\n" : "i,j,value\n");
  char buf[64];
  for (std::size_t k = 0; k < L.size(); ++k) {
    const auto m = L.multi_index(k);
    std::snprintf(buf, sizeof buf, "%.17g", u[k]);
    if (L.dim() == 1)
      out << m[0] << ',' << buf << '\n';
    else
      out << m[0] << ',' << m[1] << ',' << buf << '\n';
  }
}

std::vector<double> read_csv(std::istream& in, const Lattice& lattice) {
  std::vector<double> values(lattice.size(), 0.0);
  std::vector<bool> seen(lattice.size(), false);
  std::string line;
  if (!std::getline(in, line)) throw Error("read_csv: empty input");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (static_cast<int>(fields.size()) != lattice.dim() + 1) throw Error("read_csv: malformed row '" + line + "'");
    MultiIndex m{std::stoi(fields[0]), lattice.dim() == 2 ? std::stoi(fields[1]) : 0};
    if (!lattice.valid(m)) throw Error("read_csv: index out of range in row '" + line + "'");
    const auto k = lattice.index(m);
    values[k] = std::stod(fields.back());
    seen[k] = true;
    ++rows;
  }
  if (rows != lattice.size() || std::find(seen.begin(), seen.end(), false) != seen.end())
    throw Error("read_csv: expected one row per lattice node");
  return values;
}

}  // namespace mixlap
