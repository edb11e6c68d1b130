#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "mixlap/analysis.hpp"
#include "mixlap/descriptor.hpp"
#include "mixlap/energy_solver.hpp"
#include "mixlap/inequalities.hpp"

namespace mixlap {

inline constexpr const char* kVersionTag = "mixlap 0.1.0";

void to_json(nlohmann::json& j, const Params& p);
void from_json(const nlohmann::json& j, Params& p);
void to_json(nlohmann::json& j, const Region& r);
void from_json(const nlohmann::json& j, Region& r);
void to_json(nlohmann::json& j, const QuadratureSettings& q);
void from_json(const nlohmann::json& j, QuadratureSettings& q);

/// Solver settings as declared in a config.
struct SolverConfig {
  double tol_residual = 0.0;
  int max_iter = 50000;
  SolverOptions::Init init = SolverOptions::Init::Datum;
  double init_amplitude = 1.0;
  double precond_band = 0.0;
  /// Extra solves from random starting points (manufactured runs).
  int random_inits = 0;

  SolverOptions options(std::uint64_t seed) const;
};

void to_json(nlohmann::json& j, const SolverConfig& c);
void from_json(const nlohmann::json& j, SolverConfig& c);

/// Dyadic oscillation fit: radii r_max 2^{-k}, k = 0..levels, none below min_radius_cells * h.
struct FitConfig {
  std::optional<Point> center;  // default: domain center
  double r_max = 0.0;           // 0: half the domain radius
  int levels = 6;
  double min_radius_cells = 4.0;
};

void to_json(nlohmann::json& j, const FitConfig& c);
void from_json(const nlohmann::json& j, FitConfig& c);

struct ExperimentConfig {
  enum class Kind { Solve, Manufactured, Sharpness, HomogeneousProbe, ComparisonBounds, Fuzz };
  Kind kind = Kind::Solve;
  Params params;
  Region domain = Region::ball({0.0, 0.0}, 1.0);
  /// Lattice half-width over domain radius.
  double buffer_ratio = 1.5;
  int n_per_axis = 129;
  QuadratureSettings quadrature;
  std::optional<FunctionSpec> f_spec;
  std::optional<FunctionSpec> g_spec;
  /// Overrides the far-field model derived from g_spec.
  std::optional<TailModel> g_tail;
  /// Manufactured solution.
  std::optional<FunctionSpec> target;
  /// Sharpness barrier |x - center|^gamma_eps.
  std::optional<double> gamma_eps;
  SolverConfig solver;
  FitConfig fit;
  /// Inner ball of the comparison problem (default: half the domain, same center).
  std::optional<Region> comparison_ball;
  /// Rescaling check of homogeneous solutions: u(R x) / M (M = 0 picks R^{p/(p-1)}).
  std::optional<double> rescale_R;
  double rescale_M = 0.0;
  FuzzConfig fuzz;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  /// Checks that the fields the kind needs are present and consistent.
  void validate() const;
};

std::string to_string(ExperimentConfig::Kind kind);
ExperimentConfig::Kind experiment_kind_from_string(const std::string& name);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& data);
/// Hash of the config without output_dir, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

struct ExperimentResult {
  nlohmann::json report;
  /// Data files keyed by file name (CSV, SVG).
  std::map<std::string, std::string> files;
};

struct RunOptions {
  bool emit_svg = false;
};

ExperimentResult run_solve(const ExperimentConfig& c, const RunOptions& o = {});
ExperimentResult run_manufactured(const ExperimentConfig& c, const RunOptions& o = {});
ExperimentResult run_sharpness(const ExperimentConfig& c, const RunOptions& o = {});
ExperimentResult run_homogeneous_probe(const ExperimentConfig& c, const RunOptions& o = {});
ExperimentResult run_comparison_bounds(const ExperimentConfig& c, const RunOptions& o = {});
ExperimentResult run_fuzz_experiment(const ExperimentConfig& c, const RunOptions& o = {});

/// Dispatches on the config kind.
ExperimentResult run_experiment(const ExperimentConfig& c, const RunOptions& o = {});

/// Writes report.json and the data files into dir (created if needed).
void write_result(const ExperimentResult& r, const std::string& dir);

/// The lattice, quadrature and closures shared by every runner.
struct ExperimentSetup {
  Lattice lattice;
  std::shared_ptr<const KernelQuadrature> quad;
};
ExperimentSetup make_setup(const ExperimentConfig& c);

/// Samples fn with its default far-field model (or the given override) on the
/// setup's annulus. truncated reports whether the far field was cut to zero.
LatticeFunction sample_with_closure(const ExperimentSetup& s, const FunctionSpec& fn,
                                    const std::optional<TailModel>& tail_override, bool* truncated = nullptr);

/// Zero closure on the setup's annulus, used for right-hand sides.
LatticeFunction sample_interior(const ExperimentSetup& s, const FunctionSpec& fn);

}  // namespace mixlap
