#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mixlap {

struct InequalityCheck {
  double lhs;
  double rhs;
  bool ok;
};

/// <J_p(a) - J_p(b), a - b> >= 2^{2-p} |a - b|^p for vectors a, b.
InequalityCheck check_ineq_I(std::span<const double> a, std::span<const double> b, double p, double tol = 1e-9);
/// <J_p(b) - J_p(a), b - a> >= (4/p^2) | |b|^{(p-2)/2} b - |a|^{(p-2)/2} a |^2.
InequalityCheck check_ineq_V(std::span<const double> a, std::span<const double> b, double p, double tol = 1e-9);
/// |J_p(b) - J_p(a)| <= (p-1)(|b|^{(p-2)/2} + |a|^{(p-2)/2}) | |b|^{(p-2)/2} b - |a|^{(p-2)/2} a |.
InequalityCheck check_ineq_VI(std::span<const double> a, std::span<const double> b, double p, double tol = 1e-9);

struct PowerTest {
  double product;
  double power_term;
  /// power_term / product when both are positive, otherwise 0.
  double ratio;
  /// Magnitude used for the round-off tolerance on product.
  double scale;
};

/// product = (J_p(a-c) - J_p(b-d)) (J_{g+1}(a-b) - J_{g+1}(c-d)),
/// power_term = | |a-b|^{(g-1)/p}(a-b) - |c-d|^{(g-1)/p}(c-d) |^p.
PowerTest check_powertest(double a, double b, double c, double d, double p, double gamma);

struct FuzzConfig {
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 20240601;
  double magnitude_lo = 1e-6;
  double magnitude_hi = 1e6;
  std::vector<double> p_values{2.0, 2.5, 3.0, 4.0};
  std::vector<double> gamma_values{1.0, 2.0, 5.0};
  double tolerance_rel = 1e-9;
  double product_tolerance = 1e-12;
  std::uint64_t block_size = 65536;

  void validate() const;
};

void to_json(nlohmann::json& j, const FuzzConfig& c);
void from_json(const nlohmann::json& j, FuzzConfig& c);

struct FuzzRecord {
  std::string inequality;  // "I", "V", "VI", "powertest"
  double p = 0.0;
  double gamma = 0.0;  // powertest only
  std::uint64_t samples = 0;
  std::uint64_t violations = 0;
  std::uint64_t degenerate = 0;
  /// Most negative normalized slack seen (0 when none is negative).
  double worst_slack = 0.0;
  double max_ratio = 0.0;  // powertest only
};

struct FuzzReport {
  FuzzConfig config;
  std::vector<FuzzRecord> records;
  std::uint64_t total_violations() const;
};

/// Runs every inequality for every p (and every gamma for the power test).
/// Samples are split into fixed blocks with their own generator stream, so
/// results do not depend on the number of threads.
FuzzReport run_fuzz(const FuzzConfig& config);

nlohmann::json to_json(const FuzzReport& report);

/// splitmix64 step, used to derive per-block seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mixlap
