#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nclasso {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Isometric coordinates of a symmetric d×d matrix: the lower triangle in
/// column-major order, off-diagonal entries scaled by √2.
///
/// Throws std::invalid_argument if E is not symmetric to 1e-12 (relative to
/// max(1, ‖E‖_F)); within tolerance the symmetric part is used.
Vector sym_vectorize(const Matrix& E);
Matrix sym_unvectorize(const Vector& v, int d);

/// Length of sym_vectorize output for a d×d matrix.
inline int sym_dim(int d) { return d * (d + 1) / 2; }

enum class OperatorKind { Dense, Gaussian, RankOnePerturbed };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& s);

/// Linear map A from R^{d1×d2} (or S_d when symmetric) to R^n.
///
/// Internally every operator acts on a coordinate vector of the domain:
/// column-major vec for the rectangular domain, sym_vectorize for S_d. Both
/// are isometries, so inner products and norms transfer unchanged.
///
/// Dense and Gaussian operators store an n × coord_dim sensing matrix whose
/// i-th row holds the coordinates of A_i. Rank-one-perturbed operators keep
/// only a unit direction Ĝ and coefficient γ ∈ [0,1), with
///   A(E) = coords(E) − t⟨Ĝ,E⟩Ĝ,  t = 1 − √(1−γ),
/// so that A*A(E) = E − γ⟨Ĝ,E⟩Ĝ and n = coord_dim is virtual.
///
/// Immutable after construction.
class MeasurementOperator {
 public:
  static MeasurementOperator gaussian(int d1, int d2, int n, std::uint64_t seed, bool symmetric);
  static MeasurementOperator dense(const std::vector<Matrix>& measurements, bool symmetric);
  /// Normal action E ↦ E − ⟨G,E⟩G; requires ‖G‖_F < 1.
  static MeasurementOperator rank_one_from_g(const Matrix& G, bool symmetric);
  /// Normal action E ↦ E − γ⟨Ĝ,E⟩Ĝ with Ĝ = G/‖G‖_F; requires γ ∈ [0,1).
  /// G = 0 is allowed only with γ = 0 (the identity).
  static MeasurementOperator rank_one(const Matrix& G, double coefficient, bool symmetric);
  static MeasurementOperator identity(int d1, int d2, bool symmetric);

  OperatorKind kind() const { return kind_; }
  int d1() const { return d1_; }
  int d2() const { return d2_; }
  int n() const { return n_; }
  bool symmetric() const { return symmetric_; }
  int coord_dim() const { return coord_dim_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  Vector to_coords(const Matrix& E) const;
  Matrix from_coords(const Vector& v) const;

  Vector forward(const Matrix& E) const;
  Matrix adjoint(const Vector& y) const;
  /// A*A(E).
  Matrix normal(const Matrix& E) const;
  /// ‖A(E)‖².
  double energy(const Matrix& E) const;
  /// DᵀA*A D for a batch of coordinate columns D (coord_dim × T).
  Matrix gram(const Matrix& coord_columns) const;

  /// n × coord_dim; empty for rank-one-perturbed operators.
  const Matrix& sensing_matrix() const { return sensing_; }
  /// i-th measurement matrix A_i (dense/Gaussian only).
  Matrix measurement(int i) const;

  /// Unit direction Ĝ as a domain matrix (zero for the identity).
  Matrix direction() const;
  /// γ = 2t − t².
  double coefficient() const { return coefficient_; }
  double shrink() const { return shrink_; }

 private:
  MeasurementOperator() = default;
  void check_domain(const Matrix& E) const;

  OperatorKind kind_ = OperatorKind::Dense;
  int d1_ = 0, d2_ = 0, n_ = 0;
  bool symmetric_ = false;
  int coord_dim_ = 0;
  std::optional<std::uint64_t> seed_;
  Matrix sensing_;
  Vector direction_;
  double coefficient_ = 0.0;
  double shrink_ = 0.0;
};

/// Restricted strong convexity / smoothness constants at rank level k:
/// mu ≤ ‖A(E)‖²/‖E‖_F² ≤ L for every E of rank ≤ k.
struct RestrictedConstants {
  int k = 0;
  double mu = 0.0;
  double L = 0.0;
  double kappa = 0.0;  // L/mu, +inf when mu = 0
  double delta = 0.0;  // (L − mu)/(L + mu)
  bool exact = false;
  std::string note;
};

RestrictedConstants make_constants(int k, double mu, double L, bool exact);

/// Closed form for rank-one-perturbed operators.
/// k larger than the maximal rank is clamped (recorded in `note`).
RestrictedConstants restricted_constants_exact(const MeasurementOperator& op, int k);

/// Sampled one-sided bounds for any operator: the returned mu is an upper
/// bound on the true μ_k and L a lower bound on the true L_k. Random rank-k
/// probes, then `refine_steps` rounds of alternating subspace/core refinement
/// from the extreme probes.
RestrictedConstants restricted_constants_estimate(const MeasurementOperator& op, int k,
                                                  int trials, std::uint64_t seed,
                                                  int refine_steps = 50);

/// Power-iteration estimate of ‖A*A‖_op (a lower bound).
double normal_norm_estimate(const MeasurementOperator& op, int iters = 100,
                            std::uint64_t seed = 7);

}  // namespace nclasso
