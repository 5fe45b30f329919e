#pragma once

#include <utility>

namespace nclasso {

/// Constants at rank level r + r*. Requires r ≥ r* ≥ 1, 0 ≤ mu ≤ L,
/// 0 ≤ L2 ≤ L, L > 0, lambda ≥ 0, noise_opnorm ≥ 0.
struct TheoryParams {
  int r = 1;
  int r_star = 1;
  double mu = 1.0;
  double L = 1.0;
  double L2 = 1.0;
  double lambda = 0.0;
  double noise_opnorm = 0.0;  // ‖∇φ(M*)‖_op

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

double delta_crit(int r, int r_star);
double kappa_crit(int r, int r_star);

struct MuEff {
  double value = 0.0;
  /// μ > L₂/(2√(r/r*) + L₂/L); equivalent to value > 0.
  bool feasible = false;
};

MuEff mu_eff_closed(const TheoryParams& p);

/// μ at which mu_eff_closed vanishes for the given (r, r*, L, L2).
double mu_eff_zero(int r, int r_star, double L, double L2);

struct MuEffOracle {
  double value = 0.0;
  double alpha = 0.0;  // minimizing α
  double beta = 0.0;   // minimizing β
  double t1 = 0.0;     // inner maximizer t1 at (α, β)
};

/// Brute-force evaluation of the min over feasible (α, β) of the max over
/// t1 ≥ t2 ≥ 0, using the closed-form inner maximum. α runs over a uniform
/// grid of grid_n points in [0,1]; for each α the β grid is supplemented by
/// the largest feasible β, where the nonincreasing inner value is smallest.
/// Requires grid_n ≥ 100.
MuEffOracle mu_eff_oracle(const TheoryParams& p, int grid_n);

/// Inner maximum over t1 ≥ t2 ≥ 0 with (1−α²)t1² + α²t2² = 1, in the
/// unscaled constants, minus (L−μ)/2.
double mu_eff_inner(const TheoryParams& p, double alpha, double beta);
bool mu_eff_feasible_point(const TheoryParams& p, double alpha, double beta);

struct ErrorBound {
  double value = 0.0;  // +inf when the hypothesis fails
  bool feasible = false;
  double denominator = 0.0;
  /// Thm-2 path only: μ_eff(1−δ, 1+δ, 1+δ) ≥ δ_crit − δ_k held.
  bool chain_ok = true;
};

ErrorBound error_bound_thm3(const TheoryParams& p);
ErrorBound error_bound_thm2(int r, int r_star, double delta_k, double lambda, double noise_opnorm);

struct Example1Bound {
  double exact = 0.0;        // √(r* + (1−λ/noise)₊² r)·noise
  double lower_bound = 0.0;  // (1/√2)(√r*·λ + √(r+r*)(noise − λ)₊)
  bool dominates = false;
};

/// Requires 0 ≤ lambda ≤ noise_opnorm.
Example1Bound example1_lower_bound(int r, int r_star, double lambda, double noise_opnorm);

/// (1−δ, 1+δ) for 0 ≤ δ < 1.
std::pair<double, double> rip_to_constants(double delta_k);
/// (L−μ)/(L+μ) for 0 ≤ μ ≤ L, L > 0.
double constants_to_delta(double mu, double L);

}  // namespace nclasso
