#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mixlap/lattice.hpp"
#include "mixlap/operators.hpp"

namespace mixlap {

/// Exterior kernel stencils (annulus cells and far field) of the free nodes,
/// flattened: entries begin[i] .. begin[i+1] belong to free node i.
struct ExteriorStencils {
  std::vector<std::size_t> begin;
  std::vector<double> value;
  std::vector<double> weight;
};

/// -Delta_p u + A (-Delta_p)^s u = f in the domain, u = g outside it.
/// The lattice box plays the role of the buffer set around the domain; lattice
/// nodes outside the domain (the collar) and the exterior closure carry g.
struct DirichletProblem {
  Params params;
  Region domain;
  Region buffer;
  std::shared_ptr<const KernelQuadrature> quad;
  LatticeFunction f;
  LatticeFunction g;
  std::vector<std::size_t> free;
  std::shared_ptr<const ExteriorStencils> stencils;

  const Lattice& lattice() const { return quad->lattice(); }
  /// Lattice nodes inside the domain, ascending.
  const std::vector<std::size_t>& free_nodes() const { return free; }
};

/// Validates the geometry (collar of at least two lattice spacings around the
/// domain) and that g's closure lives on the quadrature's annulus.
DirichletProblem make_dirichlet_problem(const Region& domain, LatticeFunction f, LatticeFunction g,
                                        std::shared_ptr<const KernelQuadrature> quad);

/// Terms of the discrete energy: local gradient energy, nonlocal energy of
/// the lattice box, cross term with the exterior of the box, forcing term.
struct EnergyTerms {
  double local = 0.0;
  double nonlocal = 0.0;
  double cross = 0.0;
  double forcing = 0.0;
  double total = 0.0;
};

/// Throws if v differs from g off the domain or carries a different closure.
EnergyTerms assemble_energy(const DirichletProblem& prob, const LatticeFunction& v);

/// First variation divided by the cell volume, on the free nodes. Equals
/// mixed_apply(v) - f there.
NodalField energy_gradient(const DirichletProblem& prob, const LatticeFunction& v);

struct SolverOptions {
  /// Absolute tolerance on max |mixed_apply(u) - f| over free nodes; 0 means 1e-8 * problem_scale.
  double tol_residual = 0.0;
  int max_iter = 50000;
  enum class Init { Datum, Zero, Random };
  Init init = Init::Datum;
  std::uint64_t seed = 0;
  /// Amplitude of the uniform perturbation used by Init::Random.
  double init_amplitude = 1.0;
  /// Explicit starting values on the free nodes (overrides init).
  std::optional<std::vector<double>> initial_values;
  /// Radius (in lattice spacings) of nonlocal pairs kept in the preconditioner; 0 picks a default.
  double precond_band = 0.0;
  /// Keep the per-iteration trace.
  bool record_trace = true;
};

struct TraceEntry {
  double energy;
  double step;
  double residual;
};

struct SolveReport {
  LatticeFunction solution;
  EnergyTerms energy;
  double residual_inf;
  double tol_residual;
  int iterations;
  bool converged;
  std::vector<TraceEntry> trace;
};

/// Thrown when the solver stops before reaching the tolerance; carries the
/// best iterate.
class SolveFailure : public Error {
 public:
  SolveFailure(const std::string& what, SolveReport report) : Error(what), report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

/// max(1, sup |f| on the free nodes).
double problem_scale(const DirichletProblem& prob);

/// Minimizes the discrete energy over the free nodes by preconditioned
/// descent with backtracking (sufficient decrease 1e-4, factor 0.5).
SolveReport solve_dirichlet(const DirichletProblem& prob, const SolverOptions& opts = {});

/// The problem with f = 0 on the ball and u as datum everywhere else.
DirichletProblem homogeneous_comparison_problem(const DirichletProblem& prob, const LatticeFunction& u,
                                                const Region& ball);
SolveReport solve_homogeneous_comparison(const DirichletProblem& prob, const LatticeFunction& u, const Region& ball,
                                         const SolverOptions& opts = {});

}  // namespace mixlap
