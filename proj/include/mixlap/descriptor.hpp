#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mixlap/lattice.hpp"
#include "json.hpp"

namespace mixlap {

/// Closed-form function used for boundary data, right-hand sides and
/// manufactured solutions. Only the fields relevant to `kind` are read.
///
///   constant   value
///   affine     value + slope . x
///   quadratic  amplitude |x - center|^2
///   power      amplitude |x - center|^exponent
///   gaussian   amplitude exp(-|x - center|^2 / width^2)
///   bump       amplitude exp(1 - 1/(1 - |x - center|^2 / width^2)) inside the ball, 0 outside
///   cone       amplitude |slope . x - value|
///   sum        sum of terms
struct FunctionSpec {
  enum class Kind { Constant, Affine, Quadratic, Power, Gaussian, Bump, Cone, Sum };
  Kind kind = Kind::Constant;
  double value = 0.0;
  double amplitude = 1.0;
  double exponent = 1.0;
  double width = 1.0;
  Point center{0.0, 0.0};
  Point slope{0.0, 0.0};
  std::vector<FunctionSpec> terms;

  double operator()(const Point& x, int dim) const;

  static FunctionSpec constant(double c);
  static FunctionSpec affine(Point slope, double offset);
  static FunctionSpec quadratic(double amplitude, Point center = {0.0, 0.0});
  static FunctionSpec power(double amplitude, double exponent, Point center = {0.0, 0.0});
  static FunctionSpec gaussian(double amplitude, double width, Point center = {0.0, 0.0});
  static FunctionSpec bump(double amplitude, double width, Point center = {0.0, 0.0});
  static FunctionSpec cone(double amplitude, Point direction, double offset);
  static FunctionSpec sum(std::vector<FunctionSpec> terms);
};

std::string to_string(FunctionSpec::Kind kind);
FunctionSpec::Kind function_kind_from_string(const std::string& name);

void to_json(nlohmann::json& j, const FunctionSpec& f);
void from_json(const nlohmann::json& j, FunctionSpec& f);

void to_json(nlohmann::json& j, const TailModel& t);
void from_json(const nlohmann::json& j, TailModel& t);

/// Far-field model implied by a closed form around `center`. Functions whose
/// growth is not a radial power law in the tail space get a zero tail and
/// `truncated` is set.
struct TailChoice {
  TailModel model;
  bool truncated = false;
};
TailChoice default_tail(const FunctionSpec& fn, const Point& center, const Params& params);

/// Samples fn at the annulus cell centers.
ExteriorClosure sample_closure(const FunctionSpec& fn, std::shared_ptr<const Annulus> annulus, const TailModel& tail,
                               const Params& params);

/// Pointwise samples on the lattice with the closure attached unchanged.
LatticeFunction sample(const FunctionSpec& fn, const Lattice& lattice, std::shared_ptr<const ExteriorClosure> exterior);

}  // namespace mixlap
