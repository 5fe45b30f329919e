#include "nclasso/objective.hpp"

#include <stdexcept>

namespace nclasso {

namespace {

void require_same_shape(const FactorPoint& a, const FactorPoint& b) {
  if (a.symmetric != b.symmetric || a.U.rows() != b.U.rows() || a.U.cols() != b.U.cols() ||
      a.V.rows() != b.V.rows() || a.V.cols() != b.V.cols())
    throw std::invalid_argument("factor point shape mismatch");
}

void require_domain(const ProblemInstance& inst, const FactorPoint& P) {
  if (P.symmetric != inst.symmetric())
    throw std::invalid_argument("factor point mode does not match instance");
  if (P.U.rows() != inst.d1() || (!P.symmetric && P.V.rows() != inst.d2()))
    throw std::invalid_argument("factor point dimensions do not match instance");
}

void require_matrix(const ProblemInstance& inst, const Matrix& M) {
  if (M.rows() != inst.d1() || M.cols() != inst.d2())
    throw std::invalid_argument("matrix shape does not match instance domain");
}

// Tangent map Ṁ for a factor direction.
Matrix product_derivative(const FactorPoint& P, const FactorPoint& dir) {
  if (P.symmetric) {
    Matrix X = dir.U * P.U.transpose();
    return X + X.transpose();
  }
  return dir.U * P.V.transpose() + P.U * dir.V.transpose();
}

// Adjoint of product_derivative applied to a matrix N.
FactorPoint product_derivative_adjoint(const FactorPoint& P, const Matrix& N) {
  if (P.symmetric) return FactorPoint::symmetric_point((N + N.transpose()) * P.U);
  return FactorPoint::asymmetric(N * P.V, N.transpose() * P.U);
}

// The λ- and ∇φ-dependent part of the Hessian action.
FactorPoint linear_term(const Matrix& G, double lambda, const FactorPoint& dir) {
  if (dir.symmetric) return FactorPoint::symmetric_point(2.0 * (G * dir.U + lambda * dir.U));
  return FactorPoint::asymmetric(G * dir.V + lambda * dir.U, G.transpose() * dir.U + lambda * dir.V);
}

}  // namespace

FactorPoint FactorPoint::asymmetric(Matrix U, Matrix V) {
  if (U.cols() != V.cols()) throw std::invalid_argument("U and V must have the same rank");
  FactorPoint P;
  P.U = std::move(U);
  P.V = std::move(V);
  P.symmetric = false;
  return P;
}

FactorPoint FactorPoint::symmetric_point(Matrix U) {
  FactorPoint P;
  P.U = std::move(U);
  P.symmetric = true;
  return P;
}

Matrix FactorPoint::product() const {
  return symmetric ? Matrix(U * U.transpose()) : Matrix(U * V.transpose());
}

FactorPoint FactorPoint::zeros_like() const {
  FactorPoint Z;
  Z.symmetric = symmetric;
  Z.U = Matrix::Zero(U.rows(), U.cols());
  Z.V = Matrix::Zero(V.rows(), V.cols());
  return Z;
}

double FactorPoint::dot(const FactorPoint& other) const {
  require_same_shape(*this, other);
  return U.cwiseProduct(other.U).sum() + V.cwiseProduct(other.V).sum();
}

FactorPoint FactorPoint::axpy(double a, const FactorPoint& other) const {
  require_same_shape(*this, other);
  FactorPoint R;
  R.symmetric = symmetric;
  R.U = U + a * other.U;
  R.V = V + a * other.V;
  return R;
}

FactorPoint FactorPoint::scaled(double a) const {
  FactorPoint R;
  R.symmetric = symmetric;
  R.U = a * U;
  R.V = a * V;
  return R;
}

Vector flatten(const FactorPoint& P) {
  Vector x(P.dim());
  x.head(P.U.size()) = P.U.reshaped();
  if (P.V.size() > 0) x.tail(P.V.size()) = P.V.reshaped();
  return x;
}

FactorPoint unflatten(const Vector& x, const FactorPoint& shape) {
  if (x.size() != shape.dim()) throw std::invalid_argument("unflatten: length mismatch");
  FactorPoint P;
  P.symmetric = shape.symmetric;
  P.U = x.head(shape.U.size()).reshaped(shape.U.rows(), shape.U.cols());
  P.V = x.tail(shape.V.size()).reshaped(shape.V.rows(), shape.V.cols());
  return P;
}

ProblemInstance::ProblemInstance(MeasurementOperator op, Vector b, double lambda,
                                 std::optional<GroundTruth> truth)
    : op_(std::move(op)), b_(std::move(b)), lambda_(lambda), truth_(std::move(truth)) {
  if (b_.size() != op_.n()) throw std::invalid_argument("observation length does not match n");
  if (!(lambda_ >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (truth_) {
    if (truth_->M_star.rows() != op_.d1() || truth_->M_star.cols() != op_.d2())
      throw std::invalid_argument("M_star shape does not match domain");
    if (truth_->xi.size() == 0) truth_->xi = Vector::Zero(op_.n());
    if (truth_->xi.size() != op_.n()) throw std::invalid_argument("noise length does not match n");
    const double mismatch = (b_ - op_.forward(truth_->M_star) - truth_->xi).norm();
    if (mismatch > 1e-12 * std::max(1.0, b_.norm()))
      throw std::invalid_argument("truth is inconsistent with b = A(M*) + xi");
  }
}

SmoothLoss quadratic_loss(const ProblemInstance& inst) {
  SmoothLoss loss;
  loss.value = [&inst](const Matrix& M) { return phi_value(inst, M); };
  loss.grad = [&inst](const Matrix& M) { return phi_grad(inst, M); };
  loss.hess_apply = [&inst](const Matrix&, const Matrix& Mdot) { return inst.op().normal(Mdot); };
  return loss;
}

double phi_value(const ProblemInstance& inst, const Matrix& M) {
  require_matrix(inst, M);
  return 0.5 * (inst.op().forward(M) - inst.b()).squaredNorm();
}

Matrix phi_grad(const ProblemInstance& inst, const Matrix& M) {
  require_matrix(inst, M);
  return inst.op().adjoint(inst.op().forward(M) - inst.b());
}

double f_value(const SmoothLoss& phi, double lambda, const FactorPoint& P) {
  const double reg = P.symmetric ? lambda * P.U.squaredNorm() : 0.5 * lambda * P.squared_norm();
  return phi.value(P.product()) + reg;
}

FactorPoint f_grad(const SmoothLoss& phi, double lambda, const FactorPoint& P) {
  const Matrix G = phi.grad(P.product());
  if (P.symmetric) return FactorPoint::symmetric_point(2.0 * (G * P.U + lambda * P.U));
  return FactorPoint::asymmetric(G * P.V + lambda * P.U, G.transpose() * P.U + lambda * P.V);
}

FactorPoint f_hvp(const SmoothLoss& phi, double lambda, const FactorPoint& P,
                  const FactorPoint& dir) {
  require_same_shape(P, dir);
  const Matrix M = P.product();
  const Matrix G = phi.grad(M);
  const Matrix N = phi.hess_apply(M, product_derivative(P, dir));
  FactorPoint h = linear_term(G, lambda, dir);
  const FactorPoint c = product_derivative_adjoint(P, N);
  // Symmetric mode: product_derivative_adjoint already carries (N + Nᵀ)U = 2NU.
  return h.axpy(1.0, c);
}

double f_value(const ProblemInstance& inst, const FactorPoint& P) {
  require_domain(inst, P);
  return f_value(quadratic_loss(inst), inst.lambda(), P);
}

FactorPoint f_grad(const ProblemInstance& inst, const FactorPoint& P) {
  require_domain(inst, P);
  return f_grad(quadratic_loss(inst), inst.lambda(), P);
}

FactorPoint f_hvp(const ProblemInstance& inst, const FactorPoint& P, const FactorPoint& dir) {
  require_domain(inst, P);
  return f_hvp(quadratic_loss(inst), inst.lambda(), P, dir);
}

double f_hess_quadform(const ProblemInstance& inst, const FactorPoint& P, const FactorPoint& dir) {
  require_domain(inst, P);
  require_same_shape(P, dir);
  const Matrix G = phi_grad(inst, P.product());
  const Matrix Mdot = product_derivative(P, dir);
  const double curvature = inst.op().energy(Mdot);
  if (P.symmetric) {
    return 2.0 * (dir.U.cwiseProduct(G * dir.U).sum() + inst.lambda() * dir.U.squaredNorm()) +
           curvature;
  }
  return 2.0 * (dir.U * dir.V.transpose()).cwiseProduct(G).sum() +
         inst.lambda() * dir.squared_norm() + curvature;
}

Matrix product_jacobian_coords(const MeasurementOperator& op, const FactorPoint& P) {
  const int d1 = static_cast<int>(P.U.rows());
  const int r = P.rank();
  Matrix D(op.coord_dim(), P.dim());
  Matrix E = Matrix::Zero(op.d1(), op.d2());
  Eigen::Index col = 0;
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < d1; ++i) {
      E.setZero();
      if (P.symmetric) {
        E.row(i) += P.U.col(j).transpose();
        E.col(i) += P.U.col(j);
      } else {
        E.row(i) = P.V.col(j).transpose();
      }
      D.col(col++) = op.to_coords(E);
    }
  if (!P.symmetric) {
    const int d2 = static_cast<int>(P.V.rows());
    for (int j = 0; j < r; ++j)
      for (int k = 0; k < d2; ++k) {
        E.setZero();
        E.col(k) = P.U.col(j);
        D.col(col++) = op.to_coords(E);
      }
  }
  return D;
}

HessianAt::HessianAt(const ProblemInstance& inst, const FactorPoint& P)
    : inst_(&inst), P_(P), dim_(P.dim()) {
  require_domain(inst, P);
  grad_phi_ = phi_grad(inst, P.product());
  const MeasurementOperator& op = inst.op();
  constexpr double kJacobianBudget = 3e7;
  if (op.kind() == OperatorKind::RankOnePerturbed ||
      static_cast<double>(op.n()) * dim_ > kJacobianBudget)
    return;
  // Row m of the Jacobian is the factor-space gradient of ⟨A_m, M(P)⟩.
  const int n = op.n();
  const int d1 = op.d1(), d2 = op.d2(), r = P.rank();
  jac_.resize(n, dim_);
  const Matrix& S = op.sensing_matrix();
  Vector row(op.coord_dim());
  for (int m = 0; m < n; ++m) {
    row = S.row(m).transpose();
    if (P.symmetric) {
      const Matrix Am = sym_unvectorize(row, d1);
      jac_.row(m) = (2.0 * Am * P.U).reshaped().transpose();
    } else {
      const Eigen::Map<const Matrix> Am(row.data(), d1, d2);
      jac_.row(m).head(d1 * r) = (Am * P.V).reshaped().transpose();
      jac_.row(m).tail(d2 * r) = (Am.transpose() * P.U).reshaped().transpose();
    }
  }
}

Vector HessianAt::curvature_apply(const Vector& x) const {
  if (jac_.size() > 0) return jac_.transpose() * (jac_ * x);
  const FactorPoint dir = unflatten(x, P_);
  const Matrix N = inst_->op().normal(product_derivative(P_, dir));
  return flatten(product_derivative_adjoint(P_, N));
}

Vector HessianAt::apply(const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("HessianAt: direction length mismatch");
  const FactorPoint dir = unflatten(x, P_);
  return flatten(linear_term(grad_phi_, inst_->lambda(), dir)) + curvature_apply(x);
}

FactorPoint HessianAt::apply(const FactorPoint& dir) const {
  require_same_shape(P_, dir);
  return unflatten(apply(flatten(dir)), P_);
}

Matrix HessianAt::dense() const {
  Matrix H = Matrix::Zero(dim_, dim_);
  if (jac_.size() > 0) {
    H.selfadjointView<Eigen::Lower>().rankUpdate(jac_.transpose());
    H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
  } else {
    H = inst_->op().gram(product_jacobian_coords(inst_->op(), P_));
  }
  const double lambda = inst_->lambda();
  const int r = P_.rank();
  const int d1 = static_cast<int>(P_.U.rows());
  if (P_.symmetric) {
    const Matrix B = 2.0 * (grad_phi_ + lambda * Matrix::Identity(d1, d1));
    for (int j = 0; j < r; ++j) H.block(j * d1, j * d1, d1, d1) += B;
  } else {
    const int d2 = static_cast<int>(P_.V.rows());
    const int off = d1 * r;
    for (int j = 0; j < r; ++j) {
      H.block(j * d1, off + j * d2, d1, d2) += grad_phi_;
      H.block(off + j * d2, j * d1, d2, d1) += grad_phi_.transpose();
    }
    H.diagonal().array() += lambda;
  }
  return H;
}

double nuclear_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::BDCSVD<Matrix>(M).singularValues().sum();
}

Matrix svd_soft_threshold(const Matrix& M, double tau) {
  if (tau < 0.0) throw std::invalid_argument("soft threshold must be >= 0");
  if (tau == 0.0 || M.size() == 0) return M;
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = (svd.singularValues().array() - tau).max(0.0).matrix();
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Matrix psd_soft_threshold(const Matrix& M, double tau) {
  if (M.rows() != M.cols()) throw std::invalid_argument("psd_soft_threshold: matrix not square");
  const Matrix S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Vector w = (es.eigenvalues().array() - tau).max(0.0).matrix();
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

double convex_value(const ProblemInstance& inst, const Matrix& M) {
  return phi_value(inst, M) + inst.lambda() * nuclear_norm(M);
}

}  // namespace nclasso
