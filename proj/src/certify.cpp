#include "nclasso/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace nclasso {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::SecondOrderCritical: return "second-order-critical";
    case Verdict::FirstOrderOnly: return "first-order-only";
    case Verdict::NonCritical: return "non-critical";
  }
  return "unknown";
}

std::string to_string(EigMethod m) {
  switch (m) {
    case EigMethod::Auto: return "auto";
    case EigMethod::Dense: return "dense-eig";
    case EigMethod::Lanczos: return "iterative-lanczos";
  }
  return "unknown";
}

double hessian_min_eig_dense(const HessianAt& H) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(H.dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

LanczosResult hessian_min_eig_lanczos(const HessianAt& H, double residual_tol, int max_iters,
                                      std::uint64_t seed) {
  const int n = H.dim();
  if (n == 0) throw std::invalid_argument("empty Hessian");
  const int kmax = max_iters > 0 ? std::min(max_iters, n) : n;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector q(n);
  for (int i = 0; i < n; ++i) q(i) = normal(rng);
  q.normalize();

  Matrix Q(n, std::min(kmax, 64));
  std::vector<double> alpha, beta;
  LanczosResult out;
  double scale = 0.0;
  int next_check = std::min(10, kmax);
  for (int k = 0; k < kmax; ++k) {
    if (k >= Q.cols()) Q.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(kmax, 2 * Q.cols()));
    Q.col(k) = q;
    Vector w = H.apply(q);
    const double a = q.dot(w);
    alpha.push_back(a);
    // Full reorthogonalization, applied twice for stability.
    for (int pass = 0; pass < 2; ++pass) {
      const Vector c = Q.leftCols(k + 1).transpose() * w;
      w.noalias() -= Q.leftCols(k + 1) * c;
    }
    const double b = w.norm();
    scale = std::max({scale, std::abs(a), b});
    const bool exhausted = (k + 1 == kmax) || b <= 1e-13 * std::max(1.0, scale);
    if (k + 1 == next_check || exhausted) {
      const int m = k + 1;
      Vector diag = Eigen::Map<const Vector>(alpha.data(), m);
      Vector sub(std::max(0, m - 1));
      for (int i = 0; i + 1 < m; ++i) sub(i) = beta[i];
      Eigen::SelfAdjointEigenSolver<Matrix> es;
      es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      const double theta = es.eigenvalues()(0);
      const double last = es.eigenvectors()(m - 1, 0);
      const double res = std::abs(b * last);
      out.value = theta;
      out.residual = res;
      out.iters = m;
      const bool invariant = b <= 1e-13 * std::max(1.0, scale) || m == n;
      if (res <= residual_tol * std::max(1.0, scale) || invariant) {
        out.vector = Q.leftCols(m) * es.eigenvectors().col(0);
        if (invariant) out.residual = 0.0;
        return out;
      }
      next_check = std::min(kmax, m + std::max(10, m / 8));
    }
    if (exhausted) break;
    beta.push_back(b);
    q = w / b;
  }
  std::ostringstream os;
  os << "Lanczos did not converge: residual " << out.residual << " after " << out.iters
     << " iterations";
  throw IndeterminateError(os.str());
}

CriticalityCertificate certify_point(const ProblemInstance& inst, const FactorPoint& P,
                                     const CertifyTolerances& tols) {
  CriticalityCertificate cert;
  cert.grad_norm = f_grad(inst, P).norm();
  cert.grad_tol = tols.grad_tol ? *tols.grad_tol : 1e-8 * (1.0 + inst.b().norm());
  if (tols.eig_tol) {
    cert.eig_tol = *tols.eig_tol;
  } else {
    const double L_est = inst.op().kind() == OperatorKind::RankOnePerturbed
                             ? 1.0
                             : normal_norm_estimate(inst.op(), 30);
    cert.eig_tol = 1e-8 * (1.0 + L_est);
  }
  const HessianAt H(inst, P);
  cert.tangent_dim = H.dim();
  EigMethod method = tols.method;
  if (method == EigMethod::Auto)
    method = H.dim() <= tols.dense_limit ? EigMethod::Dense : EigMethod::Lanczos;
  cert.method = method;
  if (method == EigMethod::Dense) {
    cert.hess_min_eig = hessian_min_eig_dense(H);
  } else {
    const LanczosResult lz = hessian_min_eig_lanczos(H, tols.lanczos_residual);
    cert.hess_min_eig = lz.value;
    cert.lanczos_iters = lz.iters;
    cert.lanczos_residual = lz.residual;
  }
  if (cert.grad_norm > cert.grad_tol) {
    cert.verdict = Verdict::NonCritical;
  } else if (cert.hess_min_eig >= -cert.eig_tol) {
    cert.verdict = Verdict::SecondOrderCritical;
  } else {
    cert.verdict = Verdict::FirstOrderOnly;
  }
  return cert;
}

namespace {

// Orthonormal basis of range(X) with the σ ≤ 1e-10·σ_1 cutoff.
Matrix range_basis(const Matrix& X) {
  if (X.size() == 0) return Matrix(X.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return Matrix(X.rows(), 0);
  int k = 0;
  while (k < s.size() && s(k) > 1e-10 * s(0)) ++k;
  return svd.matrixU().leftCols(k);
}

int numerical_rank(const Matrix& X) { return static_cast<int>(range_basis(X).cols()); }

}  // namespace

RichardDiagnostics richard_diagnostics(const FactorPoint& P, const Matrix& M_star) {
  const Matrix M = P.product();
  if (M.rows() != M_star.rows() || M.cols() != M_star.cols())
    throw std::invalid_argument("richard_diagnostics: M_star shape mismatch");
  const Matrix H = M - M_star;
  const double h = H.norm();
  if (h == 0.0) throw std::invalid_argument("degenerate: H = 0");
  RichardDiagnostics out;
  out.r = P.rank();
  out.r_star = numerical_rank(M_star);
  if (out.r_star == 0) throw std::invalid_argument("richard_diagnostics: M_star must be nonzero");

  const Matrix BU = range_basis(P.U);
  const Matrix BV = P.symmetric ? BU : range_basis(P.V);
  Matrix Mperp = M_star - BU * (BU.transpose() * M_star);
  Mperp -= (Mperp * BV) * BV.transpose();
  double mperp_f = Mperp.norm();
  // projection roundoff, not a genuine component outside the spans
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() *
                       static_cast<double>(std::max(M.rows(), M.cols())) * M_star.norm();
  if (mperp_f <= floor) mperp_f = 0.0;
  out.alpha = mperp_f / h;
  if (mperp_f > 0.0) {
    const Vector sM = Eigen::BDCSVD<Matrix>(M).singularValues();
    const double sigma_r = out.r <= sM.size() ? sM(out.r - 1) : 0.0;
    out.beta = sigma_r / h * nuclear_norm(Mperp) / mperp_f;
  }
  out.lhs = out.alpha * out.alpha +
            static_cast<double>(out.r) / static_cast<double>(out.r_star) * out.beta * out.beta;
  const double gap = std::max(0.0, out.beta - out.alpha);
  out.rhs = 1.0 + gap * gap;
  out.holds = out.lhs <= out.rhs + 1e-10 * out.rhs;
  return out;
}

GlobalOptCertificate certify_convex_global(const ProblemInstance& inst, const Matrix& M_in,
                                           double tol) {
  if (!(tol >= 0.0)) throw std::invalid_argument("tolerance must be >= 0");
  GlobalOptCertificate cert;
  cert.symmetric = inst.symmetric();
  cert.tol = tol;
  const double lambda = inst.lambda();
  Matrix M = M_in;
  if (inst.symmetric()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
    if (es.eigenvalues()(0) < -tol)
      throw std::invalid_argument("certify_convex_global: M is not positive semidefinite");
    const Vector w = es.eigenvalues().cwiseMax(0.0);
    M = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
  }
  const Matrix G = phi_grad(inst, M);
  cert.grad_norm = G.norm();
  const Matrix Ubar = range_basis(M);
  cert.rank = static_cast<int>(Ubar.cols());

  if (inst.symmetric()) {
    const Matrix S = G + lambda * Matrix::Identity(M.rows(), M.cols());
    cert.tangent_residual = (S * M).norm();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    cert.orthogonal_excess = std::max(0.0, -es.eigenvalues()(0));
    cert.passes = cert.tangent_residual <= tol && cert.orthogonal_excess <= tol;
    return cert;
  }
  if (lambda == 0.0) {
    cert.passes = cert.grad_norm <= tol;
    return cert;
  }
  const Matrix W = -G / lambda;
  Matrix sign = Matrix::Zero(M.rows(), M.cols());
  Matrix Uthin(M.rows(), 0), Vbar(M.cols(), 0);
  if (cert.rank > 0) {
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Uthin = svd.matrixU().leftCols(cert.rank);
    Vbar = svd.matrixV().leftCols(cert.rank);
    sign = Uthin * Vbar.transpose();
  }
  const Matrix UW = Uthin * (Uthin.transpose() * W);
  const Matrix WV = (W * Vbar) * Vbar.transpose();
  const Matrix UWV = Uthin * (Uthin.transpose() * W * Vbar) * Vbar.transpose();
  const Matrix tangent = UW + WV - UWV;
  cert.tangent_residual = (tangent - sign).norm();
  const Matrix orth = W - tangent;
  const double op = orth.size() > 0 ? Eigen::BDCSVD<Matrix>(orth).singularValues()(0) : 0.0;
  cert.orthogonal_excess = std::max(0.0, op - 1.0);
  cert.passes = cert.tangent_residual <= tol && cert.orthogonal_excess <= tol;
  return cert;
}

TruthError error_vs_truth(const Matrix& M, const Matrix& M_star) {
  if (M.rows() != M_star.rows() || M.cols() != M_star.cols())
    throw std::invalid_argument("error_vs_truth: shape mismatch");
  TruthError e;
  e.frob_error = (M - M_star).norm();
  const double ref = M_star.norm();
  e.relative_error = ref > 0.0 ? e.frob_error / ref : std::numeric_limits<double>::infinity();
  return e;
}

TruthError error_vs_truth(const FactorPoint& P, const Matrix& M_star) {
  return error_vs_truth(P.product(), M_star);
}

}  // namespace nclasso
