#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mixlap {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem constants of -Delta_p u + A (-Delta_p)^s u = f.
///
/// q = kInfinity stands for bounded right-hand sides (N/q = 0).
struct Params {
  double p = 2.0;
  double s = 0.5;
  double A = 1.0;
  int N = 1;
  double q = kInfinity;

  double sp() const { return s * p; }
  double n_over_q() const { return std::isinf(q) ? 0.0 : N / q; }

  /// Checks the ranges every routine relies on; the solver accepts 1 < p.
  void validate() const {
    if (!(p > 1.0) || !std::isfinite(p)) throw Error("Params: p must satisfy 1 < p < inf");
    if (!(s > 0.0 && s < 1.0)) throw Error("Params: s must lie in (0,1)");
    if (!(A >= 0.0) || !std::isfinite(A)) throw Error("Params: A must be a finite nonnegative number");
    if (N != 1 && N != 2) throw Error("Params: only N = 1 or N = 2 is supported");
    if (!(q >= 1.0)) throw Error("Params: q must be >= 1");
  }

  /// Regularity estimates assume p >= 2.
  void require_regularity() const {
    validate();
    if (p < 2.0) throw Error("Params: regularity routines need p >= 2 (got p = " + std::to_string(p) + ")");
  }
};

}  // namespace mixlap
