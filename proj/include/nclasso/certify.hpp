#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "nclasso/objective.hpp"

namespace nclasso {

enum class Verdict { SecondOrderCritical, FirstOrderOnly, NonCritical };
enum class EigMethod { Auto, Dense, Lanczos };

std::string to_string(Verdict v);
std::string to_string(EigMethod m);

/// Raised when the iterative eigensolver does not reach its residual target;
/// the point is then neither certified nor rejected.
class IndeterminateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CertifyTolerances {
  /// Unset values take the defaults 1e-8·(1+‖b‖) and 1e-8·(1+L_est).
  std::optional<double> grad_tol;
  std::optional<double> eig_tol;
  EigMethod method = EigMethod::Auto;
  /// Tangent dimension up to which Auto uses the dense eigensolver.
  int dense_limit = 2000;
  double lanczos_residual = 1e-8;
};

struct CriticalityCertificate {
  double grad_norm = 0.0;
  double hess_min_eig = 0.0;
  double grad_tol = 0.0;
  double eig_tol = 0.0;
  Verdict verdict = Verdict::NonCritical;
  EigMethod method = EigMethod::Dense;
  int tangent_dim = 0;
  int lanczos_iters = 0;
  double lanczos_residual = 0.0;
};

CriticalityCertificate certify_point(const ProblemInstance& inst, const FactorPoint& P,
                                     const CertifyTolerances& tols = {});

struct LanczosResult {
  double value = 0.0;
  Vector vector;
  double residual = 0.0;
  int iters = 0;
};

/// Smallest eigenvalue of the Hessian at P by Lanczos with full
/// reorthogonalization. Throws IndeterminateError if the residual target is
/// missed.
LanczosResult hessian_min_eig_lanczos(const HessianAt& H, double residual_tol,
                                      int max_iters = 0, std::uint64_t seed = 1);
double hessian_min_eig_dense(const HessianAt& H);

struct RichardDiagnostics {
  double alpha = 0.0;
  double beta = 0.0;
  int r = 0;
  int r_star = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// α = ‖M⊥‖_F/‖H‖_F and β = σ_r(M)/‖H‖_F · ‖M⊥‖_*/‖M⊥‖_F, with H = M − M*
/// and M⊥ = P_U^⊥ M* P_V^⊥. r is the column count of U; r* the rank of M*.
/// Throws std::invalid_argument when H = 0.
RichardDiagnostics richard_diagnostics(const FactorPoint& P, const Matrix& M_star);

struct GlobalOptCertificate {
  bool symmetric = false;
  /// Asymmetric: ‖P_T(W) − ŪV̄ᵀ‖_F with W = −∇φ(M)/λ; symmetric: ‖(∇φ+λI)M‖_F.
  double tangent_residual = 0.0;
  /// Asymmetric: (‖P_Ū^⊥ W P_V̄^⊥‖_op − 1)₊; symmetric: (−λ_min(∇φ+λI))₊.
  double orthogonal_excess = 0.0;
  /// ‖∇φ(M)‖_F, the λ = 0 criterion.
  double grad_norm = 0.0;
  int rank = 0;
  double tol = 0.0;
  bool passes = false;
};

/// Subgradient optimality test for the convex problem at M.
/// Symmetric instances require M ⪰ −tol·I; M is then projected onto the PSD cone.
GlobalOptCertificate certify_convex_global(const ProblemInstance& inst, const Matrix& M,
                                           double tol);

struct TruthError {
  double frob_error = 0.0;
  double relative_error = 0.0;
};

TruthError error_vs_truth(const Matrix& M, const Matrix& M_star);
TruthError error_vs_truth(const FactorPoint& P, const Matrix& M_star);

}  // namespace nclasso
