#include "nclasso/matops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace nclasso {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

Matrix orthonormal_columns(const Matrix& X) {
  Eigen::HouseholderQR<Matrix> qr(X);
  return qr.householderQ() * Matrix::Identity(X.rows(), std::min(X.rows(), X.cols()));
}

Matrix gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) X(i, j) = normal(rng);
  return X;
}

}  // namespace

Vector sym_vectorize(const Matrix& E) {
  if (E.rows() != E.cols()) throw std::invalid_argument("sym_vectorize: matrix is not square");
  const double scale = std::max(1.0, E.norm());
  if ((E - E.transpose()).norm() > 1e-12 * scale)
    throw std::invalid_argument("sym_vectorize: matrix is not symmetric");
  const int d = static_cast<int>(E.rows());
  Vector v(sym_dim(d));
  int idx = 0;
  for (int j = 0; j < d; ++j) {
    v(idx++) = E(j, j);
    for (int i = j + 1; i < d; ++i) v(idx++) = kSqrt2 * 0.5 * (E(i, j) + E(j, i));
  }
  return v;
}

Matrix sym_unvectorize(const Vector& v, int d) {
  if (v.size() != sym_dim(d)) throw std::invalid_argument("sym_unvectorize: length mismatch");
  Matrix E(d, d);
  int idx = 0;
  for (int j = 0; j < d; ++j) {
    E(j, j) = v(idx++);
    for (int i = j + 1; i < d; ++i) {
      const double x = v(idx++) / kSqrt2;
      E(i, j) = x;
      E(j, i) = x;
    }
  }
  return E;
}

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Dense: return "dense-ensemble";
    case OperatorKind::Gaussian: return "gaussian-ensemble";
    case OperatorKind::RankOnePerturbed: return "rank-one-perturbed-identity";
  }
  return "unknown";
}

OperatorKind operator_kind_from_string(const std::string& s) {
  if (s == "dense-ensemble") return OperatorKind::Dense;
  if (s == "gaussian-ensemble") return OperatorKind::Gaussian;
  if (s == "rank-one-perturbed-identity") return OperatorKind::RankOnePerturbed;
  throw std::invalid_argument("unknown operator kind: " + s);
}

MeasurementOperator MeasurementOperator::gaussian(int d1, int d2, int n, std::uint64_t seed,
                                                  bool symmetric) {
  if (d1 < 1 || d2 < 1 || n < 1)
    throw std::invalid_argument("gaussian ensemble: dimensions must be positive");
  if (symmetric && d1 != d2)
    throw std::invalid_argument("gaussian ensemble: symmetric domain needs d1 == d2");
  MeasurementOperator op;
  op.kind_ = OperatorKind::Gaussian;
  op.d1_ = d1;
  op.d2_ = d2;
  op.n_ = n;
  op.symmetric_ = symmetric;
  op.coord_dim_ = symmetric ? sym_dim(d1) : d1 * d2;
  op.seed_ = seed;
  // Entry variance 1/n gives E‖A(E)‖² = ‖E‖_F². Row i (measurement A_i) is
  // drawn contiguously so a prefix of measurements is seed-stable.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
  op.sensing_.resize(n, op.coord_dim_);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < op.coord_dim_; ++j) op.sensing_(i, j) = normal(rng);
  return op;
}

MeasurementOperator MeasurementOperator::dense(const std::vector<Matrix>& measurements,
                                               bool symmetric) {
  if (measurements.empty()) throw std::invalid_argument("dense ensemble: no measurements");
  MeasurementOperator op;
  op.kind_ = OperatorKind::Dense;
  op.d1_ = static_cast<int>(measurements.front().rows());
  op.d2_ = static_cast<int>(measurements.front().cols());
  op.n_ = static_cast<int>(measurements.size());
  op.symmetric_ = symmetric;
  if (op.d1_ < 1 || op.d2_ < 1) throw std::invalid_argument("dense ensemble: empty matrices");
  if (symmetric && op.d1_ != op.d2_)
    throw std::invalid_argument("dense ensemble: symmetric domain needs square matrices");
  op.coord_dim_ = symmetric ? sym_dim(op.d1_) : op.d1_ * op.d2_;
  op.sensing_.resize(op.n_, op.coord_dim_);
  for (int i = 0; i < op.n_; ++i) {
    const Matrix& Ai = measurements[i];
    if (Ai.rows() != op.d1_ || Ai.cols() != op.d2_)
      throw std::invalid_argument("dense ensemble: inconsistent measurement shapes");
    op.sensing_.row(i) = op.to_coords(Ai).transpose();
  }
  return op;
}

MeasurementOperator MeasurementOperator::rank_one_from_g(const Matrix& G, bool symmetric) {
  const double g2 = G.squaredNorm();
  if (!(g2 < 1.0))
    throw std::invalid_argument("rank-one perturbation: ‖G‖_F must be < 1");
  return rank_one(G, g2, symmetric);
}

MeasurementOperator MeasurementOperator::rank_one(const Matrix& G, double coefficient,
                                                  bool symmetric) {
  if (!(coefficient >= 0.0 && coefficient < 1.0))
    throw std::invalid_argument("rank-one perturbation: coefficient must lie in [0,1)");
  if (G.rows() < 1 || G.cols() < 1)
    throw std::invalid_argument("rank-one perturbation: empty direction");
  if (symmetric && G.rows() != G.cols())
    throw std::invalid_argument("rank-one perturbation: symmetric domain needs square G");
  MeasurementOperator op;
  op.kind_ = OperatorKind::RankOnePerturbed;
  op.d1_ = static_cast<int>(G.rows());
  op.d2_ = static_cast<int>(G.cols());
  op.symmetric_ = symmetric;
  op.coord_dim_ = symmetric ? sym_dim(op.d1_) : op.d1_ * op.d2_;
  op.n_ = op.coord_dim_;
  const double gnorm = G.norm();
  if (gnorm == 0.0) {
    if (coefficient != 0.0)
      throw std::invalid_argument("rank-one perturbation: zero direction needs coefficient 0");
    op.direction_ = Vector::Zero(op.coord_dim_);
  } else {
    op.direction_ = op.to_coords(G / gnorm);
  }
  op.coefficient_ = coefficient;
  op.shrink_ = 1.0 - std::sqrt(1.0 - coefficient);
  return op;
}

MeasurementOperator MeasurementOperator::identity(int d1, int d2, bool symmetric) {
  return rank_one(Matrix::Zero(d1, d2), 0.0, symmetric);
}

void MeasurementOperator::check_domain(const Matrix& E) const {
  if (E.rows() != d1_ || E.cols() != d2_)
    throw std::invalid_argument("measurement operator: matrix shape does not match domain");
}

Vector MeasurementOperator::to_coords(const Matrix& E) const {
  check_domain(E);
  if (symmetric_) return sym_vectorize(E);
  return E.reshaped();
}

Matrix MeasurementOperator::from_coords(const Vector& v) const {
  if (v.size() != coord_dim_) throw std::invalid_argument("coordinate vector length mismatch");
  if (symmetric_) return sym_unvectorize(v, d1_);
  return v.reshaped(d1_, d2_);
}

Vector MeasurementOperator::forward(const Matrix& E) const {
  const Vector c = to_coords(E);
  if (kind_ == OperatorKind::RankOnePerturbed) return c - shrink_ * direction_.dot(c) * direction_;
  return sensing_ * c;
}

Matrix MeasurementOperator::adjoint(const Vector& y) const {
  if (y.size() != n_) throw std::invalid_argument("adjoint: vector length mismatch");
  if (kind_ == OperatorKind::RankOnePerturbed)
    return from_coords(y - shrink_ * direction_.dot(y) * direction_);
  return from_coords(sensing_.transpose() * y);
}

Matrix MeasurementOperator::normal(const Matrix& E) const {
  const Vector c = to_coords(E);
  if (kind_ == OperatorKind::RankOnePerturbed)
    return from_coords(c - coefficient_ * direction_.dot(c) * direction_);
  return from_coords(sensing_.transpose() * (sensing_ * c));
}

double MeasurementOperator::energy(const Matrix& E) const {
  const Vector c = to_coords(E);
  if (kind_ == OperatorKind::RankOnePerturbed) {
    const double g = direction_.dot(c);
    return c.squaredNorm() - coefficient_ * g * g;
  }
  return (sensing_ * c).squaredNorm();
}

Matrix MeasurementOperator::gram(const Matrix& D) const {
  if (D.rows() != coord_dim_) throw std::invalid_argument("gram: coordinate dimension mismatch");
  const Eigen::Index T = D.cols();
  Matrix K = Matrix::Zero(T, T);
  if (kind_ == OperatorKind::RankOnePerturbed) {
    K.selfadjointView<Eigen::Lower>().rankUpdate(D.transpose());
    const Vector g = D.transpose() * direction_;
    K.selfadjointView<Eigen::Lower>().rankUpdate(g, -coefficient_);
  } else {
    const Matrix J = sensing_ * D;
    K.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
  }
  K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
  return K;
}

Matrix MeasurementOperator::measurement(int i) const {
  if (kind_ == OperatorKind::RankOnePerturbed)
    throw std::logic_error("rank-one-perturbed operators have no explicit measurement matrices");
  if (i < 0 || i >= n_) throw std::out_of_range("measurement index");
  return from_coords(sensing_.row(i).transpose());
}

Matrix MeasurementOperator::direction() const {
  return from_coords(direction_);
}

RestrictedConstants make_constants(int k, double mu, double L, bool exact) {
  RestrictedConstants rc;
  rc.k = k;
  rc.mu = mu;
  rc.L = L;
  rc.kappa = mu > 0.0 ? L / mu : std::numeric_limits<double>::infinity();
  rc.delta = (L + mu) > 0.0 ? (L - mu) / (L + mu) : 0.0;
  rc.exact = exact;
  return rc;
}

RestrictedConstants restricted_constants_exact(const MeasurementOperator& op, int k) {
  if (op.kind() != OperatorKind::RankOnePerturbed)
    throw std::invalid_argument("exact restricted constants need a rank-one-perturbed operator");
  if (k < 1) throw std::invalid_argument("restricted constants: k must be >= 1");
  const int max_rank = std::min(op.d1(), op.d2());
  std::string note;
  int kk = k;
  if (k > max_rank) {
    kk = max_rank;
    note = "k clamped to " + std::to_string(max_rank);
  }
  const double gamma = op.coefficient();
  const Matrix G = op.direction();
  // sup over unit rank-k E of ⟨Ĝ,E⟩² is the sum of the k largest σ_i²(Ĝ).
  // For symmetric Ĝ the σ_i are the |eigenvalues|, attained by symmetric E.
  Vector sigma;
  if (op.symmetric()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
    sigma = es.eigenvalues().cwiseAbs();
    std::sort(sigma.data(), sigma.data() + sigma.size(), std::greater<>());
  } else {
    sigma = Eigen::JacobiSVD<Matrix>(G).singularValues();
  }
  const double top = sigma.head(kk).squaredNorm();
  const double mu = 1.0 - gamma * top;

  // inf over unit rank-k E of ⟨Ĝ,E⟩² is zero unless the domain is too small
  // to hold such an E orthogonal to Ĝ.
  double min_proj = 0.0;
  if (op.coord_dim() == 1) {
    min_proj = G.squaredNorm();
  } else if (op.symmetric() && kk == 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo > 0.0) min_proj = lo * lo;
    else if (hi < 0.0) min_proj = hi * hi;
  }
  const double L = 1.0 - gamma * min_proj;
  RestrictedConstants rc = make_constants(kk, mu, L, true);
  rc.note = note;
  return rc;
}

namespace {

struct RatioTracker {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  Matrix arg_lo, arg_hi;
  void observe(double ratio, const Matrix& E) {
    if (!std::isfinite(ratio)) return;
    if (ratio < lo) {
      lo = ratio;
      arg_lo = E;
    }
    if (ratio > hi) {
      hi = ratio;
      arg_hi = E;
    }
  }
};

double rayleigh(const MeasurementOperator& op, const Matrix& E) {
  const double e2 = E.squaredNorm();
  if (e2 == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return op.energy(E) / e2;
}

// Leading-k left/right singular subspaces of E.
void thin_factors(const Matrix& E, int k, Matrix& U, Matrix& V) {
  Eigen::JacobiSVD<Matrix> svd(E, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int kk = std::min<int>(k, static_cast<int>(svd.singularValues().size()));
  U = svd.matrixU().leftCols(kk);
  V = svd.matrixV().leftCols(kk);
}

// Exact extremum of the Rayleigh quotient over E = U C Vᵀ (asymmetric) or
// E = U C Uᵀ with C symmetric.
Matrix core_step(const MeasurementOperator& op, const Matrix& U, const Matrix& V, bool maximize) {
  const int k = static_cast<int>(U.cols());
  const int kv = static_cast<int>(V.cols());
  std::vector<Matrix> basis;
  if (op.symmetric()) {
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b) {
        Matrix S = Matrix::Zero(k, k);
        if (a == b) {
          S(a, a) = 1.0;
        } else {
          S(a, b) = S(b, a) = 1.0 / kSqrt2;
        }
        basis.push_back(S);
      }
  } else {
    for (int b = 0; b < kv; ++b)
      for (int a = 0; a < k; ++a) {
        Matrix S = Matrix::Zero(k, kv);
        S(a, b) = 1.0;
        basis.push_back(S);
      }
  }
  Matrix D(op.coord_dim(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const Matrix E = op.symmetric() ? Matrix(U * basis[j] * U.transpose())
                                    : Matrix(U * basis[j] * V.transpose());
    D.col(static_cast<Eigen::Index>(j)) = op.to_coords(E);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(op.gram(D));
  const Vector w = maximize ? Vector(es.eigenvectors().rightCols(1))
                            : Vector(es.eigenvectors().leftCols(1));
  Matrix C = Matrix::Zero(k, op.symmetric() ? k : kv);
  for (std::size_t j = 0; j < basis.size(); ++j) C += w(static_cast<Eigen::Index>(j)) * basis[j];
  return op.symmetric() ? Matrix(U * C * U.transpose()) : Matrix(U * C * V.transpose());
}

// Best rank-k matrix inside span(W)·span(Z)ᵀ, approximated by solving the
// enlarged core and truncating.
Matrix truncated_core(const MeasurementOperator& op, const Matrix& W, const Matrix& Z, int k,
                      bool maximize) {
  const Matrix big = core_step(op, W, Z, maximize);
  Matrix U, V;
  thin_factors(big, k, U, V);
  return core_step(op, U, op.symmetric() ? U : V, maximize);
}

Matrix join_orthonormal(const Matrix& A, const Matrix& B) {
  Matrix X(A.rows(), A.cols() + B.cols());
  X << A, B;
  return orthonormal_columns(X);
}

void refine(const MeasurementOperator& op, Matrix E, int k, int steps, bool maximize,
            double shift, RatioTracker& tracker) {
  for (int s = 0; s < steps; ++s) {
    Matrix U, V;
    thin_factors(E, k, U, V);
    if (U.cols() == 0) return;
    E = core_step(op, U, V, maximize);
    tracker.observe(rayleigh(op, E), E);

    // Block power step. The current subspace is kept next to the new one so
    // a stationary but non-extreme subspace can still be left.
    Matrix N = op.normal(E);
    if (!maximize) N = shift * E - N;
    if (op.symmetric()) {
      const Matrix W = join_orthonormal(U, N * U);
      E = truncated_core(op, W, W, k, maximize);
      tracker.observe(rayleigh(op, E), E);
    } else {
      const Matrix W = join_orthonormal(U, N * V);
      E = truncated_core(op, W, V, k, maximize);
      tracker.observe(rayleigh(op, E), E);
      thin_factors(E, k, U, V);
      Matrix N2 = op.normal(E);
      if (!maximize) N2 = shift * E - N2;
      const Matrix Z = join_orthonormal(V, N2.transpose() * U);
      E = truncated_core(op, U, Z, k, maximize);
      tracker.observe(rayleigh(op, E), E);
    }
  }
}

}  // namespace

double normal_norm_estimate(const MeasurementOperator& op, int iters, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix E = gaussian_matrix(op.d1(), op.d2(), rng);
  if (op.symmetric()) E = (0.5 * (E + E.transpose())).eval();
  double est = 0.0;
  for (int i = 0; i < iters; ++i) {
    E /= E.norm();
    Matrix N = op.normal(E);
    est = N.norm();
    if (est == 0.0) return 0.0;
    E = N;
  }
  return est;
}

RestrictedConstants restricted_constants_estimate(const MeasurementOperator& op, int k,
                                                  int trials, std::uint64_t seed,
                                                  int refine_steps) {
  if (trials < 1) throw std::invalid_argument("restricted_constants_estimate: trials must be >= 1");
  if (k < 1) throw std::invalid_argument("restricted_constants_estimate: k must be >= 1");
  const int kk = std::min({k, op.d1(), op.d2()});
  std::mt19937_64 rng(seed);
  RatioTracker tracker;
  for (int t = 0; t < trials; ++t) {
    Matrix E;
    if (op.symmetric()) {
      const Matrix U = gaussian_matrix(op.d1(), kk, rng);
      Vector s(kk);
      for (int j = 0; j < kk; ++j) s(j) = (rng() & 1u) ? 1.0 : -1.0;
      E = U * s.asDiagonal() * U.transpose();
    } else {
      E = gaussian_matrix(op.d1(), kk, rng) * gaussian_matrix(op.d2(), kk, rng).transpose();
    }
    tracker.observe(rayleigh(op, E), E);
  }
  if (refine_steps > 0) {
    // slightly above the top of the spectrum so shift·I − A*A stays PSD but
    // the power step is not swamped by the identity part
    const double shift = 1.05 * normal_norm_estimate(op, 50, seed ^ 0x9e3779b97f4a7c15ULL) + 1e-12;
    const Matrix hi0 = tracker.arg_hi;
    const Matrix lo0 = tracker.arg_lo;
    refine(op, hi0, kk, refine_steps, true, shift, tracker);
    refine(op, lo0, kk, refine_steps, false, shift, tracker);
  }
  RestrictedConstants rc = make_constants(k, std::max(0.0, tracker.lo), tracker.hi, false);
  rc.note = "Monte-Carlo estimate: mu is an upper bound, L a lower bound";
  return rc;
}

}  // namespace nclasso
