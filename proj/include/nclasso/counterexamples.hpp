#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nclasso/certify.hpp"
#include "nclasso/objective.hpp"

namespace nclasso {

/// Position of a point relative to the second-order condition
/// c·c⊥·r* ≥ 1 − c²r* − c⊥²r.
enum class SpurCondition { Strict, Equality, Violated };

std::string to_string(SpurCondition s);

struct SpurGenSpec {
  int r_star = 1;
  int r_max = 1;
  int d = 2;
  double epsilon = 0.5;
  double c = 0.5;
  double c_perp = 0.5;
  double lambda = 0.0;
  int r = 1;  // search rank, r_star ≤ r ≤ r_max
  bool symmetric = true;
  std::uint64_t seed = 0;
  /// Use coordinate vectors for Q, Q⊥ instead of a random orthonormal frame.
  bool coordinate_basis = false;

  /// c²r* + c⊥²r_max − (1 − ε).
  double constraint_residual() const;
  /// c·c⊥·r* − (1 − c²r* − c⊥²r).
  double spur_cond_margin() const;
  SpurCondition spur_condition() const;
  /// Throws std::invalid_argument if any field invariant fails.
  void validate() const;
};

struct CounterexampleInstance {
  std::string family;  // "spur-gen", "thm5", "thm6", "example2"
  SpurGenSpec spec;
  Matrix P, P_perp;  // left frames (equal to Q, Q_perp except for example2)
  Matrix Q, Q_perp;
  Matrix G;          // normal operator E ↦ E − ⟨G,E⟩G
  Matrix M_star;
  double a = 0.0, a_perp = 0.0;
  double system_det = 0.0;
  double x = 0.0;
  std::optional<ProblemInstance> problem;
  FactorPoint spurious_point;
  /// μ_k, L_k from the closed form for k = 1 … r* + r_max.
  std::vector<RestrictedConstants> predicted_constants;
  SpurCondition condition = SpurCondition::Strict;
  double spur_cond_margin = 0.0;
  double kappa_sp = 0.0;  // example2 only

  const ProblemInstance& instance() const { return *problem; }
};

/// Closed-form μ_k of the construction: 1 − c²·min(k, r*) − c⊥²·min((k − r*)₊, r_max).
double spur_gen_mu(const SpurGenSpec& spec, int k);

CounterexampleInstance build_spur_gen(const SpurGenSpec& spec);

/// ε = μ, r_max = r, c²r* = c⊥²r = (1−μ)/2. Any μ ∈ (0,1) is accepted; the
/// stored condition says whether the point is a local minimum or a saddle.
/// d = 0 selects d = r + r_star.
CounterexampleInstance build_thm5(int r, int r_star, int d, double mu, double lambda,
                                  bool symmetric, std::uint64_t seed = 0);
SpurGenSpec thm5_spec(int r, int r_star, int d, double mu, double lambda, bool symmetric,
                      std::uint64_t seed = 0);
/// μ above which no spurious second-order point of this form exists.
double thm5_threshold(int r, int r_star);

/// Search rank r2 = ⌈(r*μ + r1)/(1−μ)⌉ with d = r* + r2, μ_{r1+r*} = μ.
CounterexampleInstance build_thm6(int r1, int r_star, double mu, double lambda, bool symmetric,
                                  std::uint64_t seed = 0);
SpurGenSpec thm6_spec(int r1, int r_star, double mu, double lambda, bool symmetric,
                      std::uint64_t seed = 0);
int thm6_rank(int r1, int r_star, double mu);

/// Unregularized rank-one-perturbed instance with M* = PQᵀ and the point
/// (c_sp P⊥, c_sp Q⊥). d2 = 0 selects d2 = d1.
CounterexampleInstance build_example2(int r_sp, int r_star, int d1, int d2, double kappa_sp,
                                      std::uint64_t seed = 0);
double example2_c_sp(int r_sp, int r_star, double kappa_sp);

struct ClauseResult {
  std::string id;    // "i" … "vi"
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyTolerances {
  double identity_tol = 1e-10;
  double convex_tol = 1e-8;
  double noise_tol = 1e-10;
  double grad_tol = 1e-10;
  double eig_tol = 1e-8;
  double saddle_gap = 1e-12;
};

struct VerificationReport {
  std::vector<ClauseResult> clauses;
  bool all_passed = false;
  CriticalityCertificate certificate;
  GlobalOptCertificate convex_certificate;
  /// "strict-local-minimum", "second-order-critical-minimality-undetermined" or "saddle".
  std::string minimality;

  const ClauseResult& clause(const std::string& id) const;
  std::vector<std::string> failed() const;
};

VerificationReport verify_instance(const CounterexampleInstance& inst, const VerifyTolerances& tols = {});

}  // namespace nclasso
