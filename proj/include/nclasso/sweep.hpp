#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "nclasso/solver.hpp"

namespace nclasso {

/// Rank-sweep experiment: fresh Gaussian operator and M* per trial, one
/// factored solve per (r, trial), then error and criticality certificate.
struct SweepConfig {
  int d1 = 50;
  int d2 = 51;
  int r_star = 2;
  int n = 0;  // 0: ⌈2.35·r*·(d1+d2)⌉
  double lambda = 1e-4;
  std::vector<int> r_values = {2, 3, 4, 5, 6, 7, 8, 20};
  int n_trials = 50;
  std::uint64_t seed = 0;
  std::vector<double> singular_values;  // empty: all ones
  int workers = 0;                      // 0: hardware concurrency
  SolverConfig solver;

  int resolved_n() const;
  std::vector<double> resolved_singular_values() const;
  /// Throws std::invalid_argument on an invalid configuration.
  void validate() const;
};

struct SweepRow {
  int r = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double final_error = 0.0;
  double final_objective = 0.0;
  double grad_norm = 0.0;
  double hess_min_eig = 0.0;
  bool certified = false;
  double wall_ms = 0.0;
  std::string error;  // non-empty when the trial failed
};

struct SweepSummary {
  int r = 0;
  int count = 0;  // finite rows aggregated
  double mean_error = 0.0, median_error = 0.0;
  double mean_objective = 0.0, median_objective = 0.0;
  double mean_grad_norm = 0.0, median_grad_norm = 0.0;
  double mean_hess_min_eig = 0.0, median_hess_min_eig = 0.0;
  double certified_fraction = 0.0;
  double mean_wall_ms = 0.0, median_wall_ms = 0.0;
};

/// Per-trial seed (operator, M*, and initialization streams derive from it).
std::uint64_t trial_seed(std::uint64_t seed, int trial);

/// Rows in (r, trial) order regardless of worker count. `progress` is called
/// from the collecting thread after each finished row.
std::vector<SweepRow> run_sweep(const SweepConfig& config,
                                const std::function<void(const SweepRow&)>& progress = {});

/// Instance of the trial with per-trial seed `seed`: Gaussian operator,
/// M* = P·diag(s)·Qᵀ with random orthonormal P, Q, and ξ = 0.
ProblemInstance sweep_instance(const SweepConfig& config, std::uint64_t seed);
/// Initialization seed of the factored solve at rank r in that trial.
std::uint64_t sweep_init_seed(std::uint64_t seed, int r);

/// One trial, exposed for testing.
SweepRow run_sweep_trial(const SweepConfig& config, int r, int trial);

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows);

inline const char* kSweepColumns =
    "r,trial,seed,final_error,final_objective,grad_norm,hess_min_eig,certified,wall_ms";

/// Resolved configuration as "# key = value" comment lines.
std::string sweep_config_header(const SweepConfig& config);
/// Inverse of sweep_config_header: reads leading "# key = value" lines.
/// Throws std::invalid_argument on unknown keys or an invalid result.
SweepConfig sweep_config_from_header(std::istream& in);

/// Header comments, the column line, per-trial rows, then "mean" and
/// "median" summary rows per r.
void write_sweep_csv(std::ostream& out, const SweepConfig& config, const std::vector<SweepRow>& rows);

/// Columns iter, objective, grad_norm, tr_radius.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

/// Example 2 threshold sweep: one row per κ_sp with the spurious point's
/// certificate.
struct ThresholdRow {
  int r_sp = 0;
  int r_star = 0;
  double kappa_sp = 0.0;
  double kappa_crit = 0.0;
  double hess_min_eig = 0.0;
  double grad_norm = 0.0;
};

std::vector<ThresholdRow> run_threshold_sweep(int r_sp, int r_star, int d, double kappa_lo,
                                              double kappa_hi, int points, std::uint64_t seed);

inline const char* kThresholdColumns = "r_sp,r_star,kappa_sp,kappa_crit,hess_min_eig,grad_norm";

void write_threshold_csv(std::ostream& out, const std::vector<ThresholdRow>& rows,
                         const std::string& header_comment);

}  // namespace nclasso
