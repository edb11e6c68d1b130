#include "mixlap/descriptor.hpp"

#include <cmath>

namespace mixlap {

namespace {

Point diff(const Point& x, const Point& c) { return {x[0] - c[0], x[1] - c[1]}; }

double dot(const Point& a, const Point& b, int dim) { return dim == 1 ? a[0] * b[0] : a[0] * b[0] + a[1] * b[1]; }

Point point_from_json(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.empty() || j.size() > 2) throw Error("expected a point as a number or an array of 1-2 numbers");
  return {j[0].get<double>(), j.size() > 1 ? j[1].get<double>() : 0.0};
}

}  // namespace

double FunctionSpec::operator()(const Point& x, int dim) const {
  switch (kind) {
    case Kind::Constant:
      return value;
    case Kind::Affine:
      return value + dot(slope, x, dim);
    case Kind::Quadratic: {
      const double r = norm(diff(x, center), dim);
      return amplitude * r * r;
    }
    case Kind::Power: {
      const double r = norm(diff(x, center), dim);
      if (r == 0.0) return exponent > 0.0 ? 0.0 : (exponent == 0.0 ? amplitude : NAN);
      return amplitude * std::pow(r, exponent);
    }
    case Kind::Gaussian: {
      const double r = norm(diff(x, center), dim) / width;
      return amplitude * std::exp(-r * r);
    }
    case Kind::Bump: {
      const double r = norm(diff(x, center), dim) / width;
      if (r >= 1.0) return 0.0;
      return amplitude * std::exp(1.0 - 1.0 / (1.0 - r * r));
    }
    case Kind::Cone:
      return amplitude * std::abs(dot(slope, x, dim) - value);
    case Kind::Sum: {
      double acc = 0.0;
      for (const auto& t : terms) acc += t(x, dim);
      return acc;
    }
  }
  return NAN;
}

FunctionSpec FunctionSpec::constant(double c) {
  FunctionSpec f;
  f.kind = Kind::Constant;
  f.value = c;
  return f;
}

FunctionSpec FunctionSpec::affine(Point s, double offset) {
  FunctionSpec f;
  f.kind = Kind::Affine;
  f.slope = s;
  f.value = offset;
  return f;
}

FunctionSpec FunctionSpec::quadratic(double a, Point c) {
  FunctionSpec f;
  f.kind = Kind::Quadratic;
  f.amplitude = a;
  f.center = c;
  return f;
}

FunctionSpec FunctionSpec::power(double a, double t, Point c) {
  FunctionSpec f;
  f.kind = Kind::Power;
  f.amplitude = a;
  f.exponent = t;
  f.center = c;
  return f;
}

FunctionSpec FunctionSpec::gaussian(double a, double w, Point c) {
  FunctionSpec f;
  f.kind = Kind::Gaussian;
  f.amplitude = a;
  f.width = w;
  f.center = c;
  return f;
}

FunctionSpec FunctionSpec::bump(double a, double w, Point c) {
  FunctionSpec f;
  f.kind = Kind::Bump;
  f.amplitude = a;
  f.width = w;
  f.center = c;
  return f;
}

FunctionSpec FunctionSpec::cone(double a, Point direction, double offset) {
  FunctionSpec f;
  f.kind = Kind::Cone;
  f.amplitude = a;
  f.slope = direction;
  f.value = offset;
  return f;
}

FunctionSpec FunctionSpec::sum(std::vector<FunctionSpec> t) {
  FunctionSpec f;
  f.kind = Kind::Sum;
  f.terms = std::move(t);
  return f;
}

std::string to_string(FunctionSpec::Kind kind) {
  using K = FunctionSpec::Kind;
  switch (kind) {
    case K::Constant: return "constant";
    case K::Affine: return "affine";
    case K::Quadratic: return "quadratic";
    case K::Power: return "power";
    case K::Gaussian: return "gaussian";
    case K::Bump: return "bump";
    case K::Cone: return "cone";
    case K::Sum: return "sum";
  }
  return "unknown";
}

FunctionSpec::Kind function_kind_from_string(const std::string& name) {
  using K = FunctionSpec::Kind;
  for (K k : {K::Constant, K::Affine, K::Quadratic, K::Power, K::Gaussian, K::Bump, K::Cone, K::Sum})
    if (to_string(k) == name) return k;
  throw Error("unknown function kind '" + name + "'");
}

void to_json(nlohmann::json& j, const FunctionSpec& f) {
  using K = FunctionSpec::Kind;
  j = nlohmann::json{{"kind", to_string(f.kind)}};
  switch (f.kind) {
    case K::Constant:
      j["value"] = f.value;
      break;
    case K::Affine:
      j["slope"] = {f.slope[0], f.slope[1]};
      j["value"] = f.value;
      break;
    case K::Quadratic:
      j["amplitude"] = f.amplitude;
      j["center"] = {f.center[0], f.center[1]};
      break;
    case K::Power:
      j["amplitude"] = f.amplitude;
      j["exponent"] = f.exponent;
      j["center"] = {f.center[0], f.center[1]};
      break;
    case K::Gaussian:
    case K::Bump:
      j["amplitude"] = f.amplitude;
      j["width"] = f.width;
      j["center"] = {f.center[0], f.center[1]};
      break;
    case K::Cone:
      j["amplitude"] = f.amplitude;
      j["slope"] = {f.slope[0], f.slope[1]};
      j["value"] = f.value;
      break;
    case K::Sum:
      j["terms"] = f.terms;
      break;
  }
}

void from_json(const nlohmann::json& j, FunctionSpec& f) {
  f = FunctionSpec{};
  f.kind = function_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("value")) f.value = j["value"].get<double>();
  if (j.contains("amplitude")) f.amplitude = j["amplitude"].get<double>();
  if (j.contains("exponent")) f.exponent = j["exponent"].get<double>();
  if (j.contains("width")) f.width = j["width"].get<double>();
  if (j.contains("center")) f.center = point_from_json(j["center"]);
  if (j.contains("slope")) f.slope = point_from_json(j["slope"]);
  if (j.contains("terms")) f.terms = j["terms"].get<std::vector<FunctionSpec>>();
  if ((f.kind == FunctionSpec::Kind::Gaussian || f.kind == FunctionSpec::Kind::Bump) && !(f.width > 0.0))
    throw Error("function spec: width must be positive");
}

void to_json(nlohmann::json& j, const TailModel& t) {
  if (t.kind == TailModel::Kind::Zero)
    j = nlohmann::json{{"kind", "zero"}};
  else
    j = nlohmann::json{{"kind", "power_law"}, {"amplitude", t.amplitude}, {"exponent", t.exponent}};
}

void from_json(const nlohmann::json& j, TailModel& t) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "zero")
    t = TailModel::zero();
  else if (kind == "power_law")
    t = TailModel::power_law(j.at("amplitude").get<double>(), j.at("exponent").get<double>());
  else
    throw Error("unknown tail model kind '" + kind + "'");
}

TailChoice default_tail(const FunctionSpec& fn, const Point& center, const Params& params) {
  using K = FunctionSpec::Kind;
  switch (fn.kind) {
    case K::Constant:
      return {TailModel::power_law(fn.value, 0.0), false};
    case K::Gaussian:
    case K::Bump:
      return {TailModel::zero(), false};
    case K::Power: {
      if (fn.center != center) return {TailModel::zero(), true};
      TailModel t = TailModel::power_law(fn.amplitude, fn.exponent);
      if (!t.converges(params.p - 1.0, params.sp())) return {TailModel::zero(), true};
      return {t, false};
    }
    case K::Affine:
      if (fn.slope[0] == 0.0 && fn.slope[1] == 0.0) return {TailModel::power_law(fn.value, 0.0), false};
      return {TailModel::zero(), true};
    case K::Quadratic:
    case K::Cone:
      if (fn.amplitude == 0.0) return {TailModel::zero(), false};
      return {TailModel::zero(), true};
    case K::Sum: {
      double constant = 0.0;
      std::optional<TailModel> growing;
      bool truncated = false;
      for (const auto& term : fn.terms) {
        const auto c = default_tail(term, center, params);
        truncated = truncated || c.truncated;
        if (c.model.kind == TailModel::Kind::Zero) continue;
        if (c.model.exponent == 0.0) {
          constant += c.model.amplitude;
        } else if (!growing) {
          growing = c.model;
        } else {
          truncated = true;
        }
      }
      if (growing) {
        if (constant != 0.0) truncated = true;
        return {*growing, truncated};
      }
      if (constant != 0.0) return {TailModel::power_law(constant, 0.0), truncated};
      return {TailModel::zero(), truncated};
    }
  }
  return {TailModel::zero(), true};
}

ExteriorClosure sample_closure(const FunctionSpec& fn, std::shared_ptr<const Annulus> annulus, const TailModel& tail,
                               const Params& params) {
  if (!annulus) throw Error("sample_closure: missing annulus");
  const int dim = annulus->lattice().dim();
  std::vector<double> values;
  values.reserve(annulus->cells().size());
  for (const auto& c : annulus->cells()) {
    const double v = fn(c.center, dim);
    if (!std::isfinite(v))
      throw Error("sample_closure: non-finite value at (" + std::to_string(c.center[0]) + ", " +
                  std::to_string(c.center[1]) + ")");
    values.push_back(v);
  }
  return ExteriorClosure(std::move(annulus), std::move(values), tail, params);
}

LatticeFunction sample(const FunctionSpec& fn, const Lattice& lattice, std::shared_ptr<const ExteriorClosure> exterior) {
  std::vector<double> values(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const Point x = lattice.point(i);
    const double v = fn(x, lattice.dim());
    if (!std::isfinite(v))
      throw Error("sample: non-finite value at (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) + ")");
    values[i] = v;
  }
  return LatticeFunction(lattice, std::move(values), std::move(exterior));
}

}  // namespace mixlap
