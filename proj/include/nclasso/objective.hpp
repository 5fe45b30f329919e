#pragma once

#include <cmath>
#include <functional>
#include <optional>

#include "nclasso/matops.hpp"

namespace nclasso {

/// (U, V) in asymmetric mode, U alone in symmetric mode (M = U Uᵀ).
/// Also used for gradients and search directions of the same shape.
struct FactorPoint {
  Matrix U;
  Matrix V;  // empty in symmetric mode
  bool symmetric = false;

  static FactorPoint asymmetric(Matrix U, Matrix V);
  static FactorPoint symmetric_point(Matrix U);

  int rank() const { return static_cast<int>(U.cols()); }
  Matrix product() const;
  /// Number of free coordinates: r(d1+d2) or r·d.
  int dim() const { return static_cast<int>(U.size() + V.size()); }
  double squared_norm() const { return U.squaredNorm() + V.squaredNorm(); }
  double norm() const { return std::sqrt(squared_norm()); }
  bool all_finite() const { return U.allFinite() && V.allFinite(); }

  /// Same shape, all zeros.
  FactorPoint zeros_like() const;
  double dot(const FactorPoint& other) const;
  /// this + a·other
  FactorPoint axpy(double a, const FactorPoint& other) const;
  FactorPoint scaled(double a) const;
};

/// Stacked coordinates [vec U; vec V] (column-major).
Vector flatten(const FactorPoint& P);
FactorPoint unflatten(const Vector& x, const FactorPoint& shape);

struct GroundTruth {
  Matrix M_star;
  Vector xi;
};

/// Quadratic least-squares instance φ(M) = ½‖A(M) − b‖² with penalty λ.
class ProblemInstance {
 public:
  /// Throws std::invalid_argument on inconsistent dimensions, negative λ, or
  /// a truth that does not reproduce b to 1e-12·‖b‖.
  ProblemInstance(MeasurementOperator op, Vector b, double lambda,
                  std::optional<GroundTruth> truth = std::nullopt);

  const MeasurementOperator& op() const { return op_; }
  const Vector& b() const { return b_; }
  double lambda() const { return lambda_; }
  bool symmetric() const { return op_.symmetric(); }
  const std::optional<GroundTruth>& truth() const { return truth_; }
  int d1() const { return op_.d1(); }
  int d2() const { return op_.d2(); }

 private:
  MeasurementOperator op_;
  Vector b_;
  double lambda_;
  std::optional<GroundTruth> truth_;
};

/// Smooth loss as a value/gradient/Hessian-action triple. The factored
/// objective below accepts any such φ; instances ship the quadratic one.
struct SmoothLoss {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> grad;
  /// (M, Ṁ) ↦ ∇²φ(M)[Ṁ]
  std::function<Matrix(const Matrix&, const Matrix&)> hess_apply;
};

SmoothLoss quadratic_loss(const ProblemInstance& inst);

double phi_value(const ProblemInstance& inst, const Matrix& M);
Matrix phi_grad(const ProblemInstance& inst, const Matrix& M);

double f_value(const ProblemInstance& inst, const FactorPoint& P);
FactorPoint f_grad(const ProblemInstance& inst, const FactorPoint& P);
FactorPoint f_hvp(const ProblemInstance& inst, const FactorPoint& P, const FactorPoint& dir);
double f_hess_quadform(const ProblemInstance& inst, const FactorPoint& P, const FactorPoint& dir);

double f_value(const SmoothLoss& phi, double lambda, const FactorPoint& P);
FactorPoint f_grad(const SmoothLoss& phi, double lambda, const FactorPoint& P);
FactorPoint f_hvp(const SmoothLoss& phi, double lambda, const FactorPoint& P,
                  const FactorPoint& dir);

/// Hessian of f_λ frozen at one point. Caches ∇φ(M) and, for explicit
/// operators, the Jacobian of P ↦ A(M(P)), so repeated products are cheap.
class HessianAt {
 public:
  HessianAt(const ProblemInstance& inst, const FactorPoint& P);

  int dim() const { return dim_; }
  const Matrix& grad_phi() const { return grad_phi_; }
  FactorPoint apply(const FactorPoint& dir) const;
  Vector apply(const Vector& x) const;
  /// Full dim×dim matrix in flatten() coordinates.
  Matrix dense() const;

 private:
  Vector curvature_apply(const Vector& x) const;

  const ProblemInstance* inst_;
  FactorPoint P_;
  Matrix grad_phi_;
  Matrix jac_;  // n × dim; empty when products go through op.normal()
  int dim_;
};

/// Coordinates of dM/dP along each flatten() basis direction
/// (coord_dim × dim).
Matrix product_jacobian_coords(const MeasurementOperator& op, const FactorPoint& P);

double nuclear_norm(const Matrix& M);
/// Shrinks every singular value by tau, flooring at zero.
Matrix svd_soft_threshold(const Matrix& M, double tau);
/// Prox of tau·tr(M) + indicator(M ⪰ 0) for symmetric M.
Matrix psd_soft_threshold(const Matrix& M, double tau);

/// φ(M) + λ‖M‖_*.
double convex_value(const ProblemInstance& inst, const Matrix& M);

}  // namespace nclasso
