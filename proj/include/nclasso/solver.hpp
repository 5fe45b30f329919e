#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nclasso/objective.hpp"

namespace nclasso {

enum class SolverMethod { GradientDescent, TrustRegionNewtonCG, ProxGradient };

std::string to_string(SolverMethod m);
/// Accepts "gd", "tr-newton-cg", "prox-grad".
SolverMethod solver_method_from_string(const std::string& s);

struct SolverConfig {
  SolverMethod method = SolverMethod::TrustRegionNewtonCG;
  int max_iters = 1000;
  /// Stop when ‖∇f‖ ≤ grad_tol·max(1, ‖∇f(P₀)‖).
  double grad_tol = 1e-9;
  double tr_initial_radius = 1.0;
  double tr_max_radius = 1000.0;
  double tr_eta = 0.15;
  int cg_max_iters = 0;  // 0: the problem dimension
  double backtrack_shrink = 0.5;
  double sufficient_decrease = 1e-4;
  /// Prox-grad stops once the relative objective decrease drops below this.
  double objective_rtol = 1e-10;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  bool record_trace = false;

  /// Throws std::invalid_argument on nonpositive tolerances etc.
  void validate() const;
};

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double tr_radius = 0.0;  // step length for gd / prox-grad
  double model_decrease = 0.0;
  double cauchy_decrease = 0.0;
  bool accepted = true;
};

struct SolveResult {
  std::optional<FactorPoint> point;  // factored solvers
  Matrix M;                          // product UVᵀ / UUᵀ, or the prox-grad iterate
  double objective = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  bool converged = false;
  std::uint64_t seed = 0;
  std::string message;
  std::vector<TraceRow> trace;
};

/// U, V entries init_scale·N(0,1)/√max(d1,d2), deterministic in seed.
FactorPoint random_factor_point(int d1, int d2, int r, bool symmetric, double init_scale,
                                std::uint64_t seed);

/// Local minimization of f_λ at search rank r from a random start.
/// Throws std::runtime_error when a non-finite objective is produced.
SolveResult solve_factored(const ProblemInstance& inst, int r, const SolverConfig& config);
SolveResult solve_factored_from(const ProblemInstance& inst, const FactorPoint& start,
                                const SolverConfig& config);

/// Proximal gradient on φ(M) + λ‖M‖_* (PSD-constrained trace penalty in
/// symmetric mode). grad_norm reports the fixed-point residual
/// ‖M − prox(M − s∇φ(M))‖/s.
SolveResult solve_convex_prox(const ProblemInstance& inst, const SolverConfig& config,
                              const std::optional<Matrix>& start = std::nullopt);

struct MultistartReport {
  std::vector<SolveResult> runs;
  std::vector<double> errors;  // ‖M − M*‖_F per run, empty without truth
  double best_objective = 0.0;
  /// Fraction of runs whose objective is within tol of the best.
  double fraction_at_best = 0.0;
  /// Terminal objective values grouped at tolerance tol (sorted ascending).
  std::vector<double> cluster_values;
  std::vector<int> cluster_sizes;
};

/// n_starts independent solves with seeds config.seed … config.seed+n_starts−1.
MultistartReport multistart(const ProblemInstance& inst, int r, const SolverConfig& config,
                            int n_starts, double cluster_tol = 1e-6);

/// Same aggregation over explicitly provided starting points.
MultistartReport multistart_from(const ProblemInstance& inst, const std::vector<FactorPoint>& starts,
                                 const SolverConfig& config, double cluster_tol = 1e-6);

}  // namespace nclasso
