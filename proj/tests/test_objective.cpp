#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nclasso/counterexamples.hpp"
#include "nclasso/objective.hpp"
#include "nclasso/solver.hpp"

using namespace nclasso;

namespace {

Matrix randn(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix M(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = normal(rng);
  return M;
}

double inner(const Matrix& A, const Matrix& B) { return (A.array() * B.array()).sum(); }

struct Case {
  ProblemInstance inst;
  FactorPoint P;
};

// Random instance and point; d ≤ 12 keeps finite differences quick.
Case random_case(std::mt19937_64& rng, bool symmetric, double lambda) {
  std::uniform_int_distribution<int> dim(2, 12), rank(1, 4), meas(5, 50);
  const int d1 = dim(rng), d2 = symmetric ? d1 : dim(rng), r = rank(rng);
  MeasurementOperator op = MeasurementOperator::gaussian(d1, d2, meas(rng), rng(), symmetric);
  Matrix M0 = randn(d1, d2, rng);
  if (symmetric) M0 = (M0 + M0.transpose()).eval();
  const Vector b = op.forward(M0) + 0.1 * randn(op.n(), 1, rng).col(0);
  ProblemInstance inst(std::move(op), b, lambda);
  FactorPoint P = symmetric ? FactorPoint::symmetric_point(randn(d1, r, rng))
                            : FactorPoint::asymmetric(randn(d1, r, rng), randn(d2, r, rng));
  return {std::move(inst), std::move(P)};
}

FactorPoint random_direction(const FactorPoint& P, std::mt19937_64& rng) {
  Vector x = randn(P.dim(), 1, rng).col(0);
  return unflatten(x / x.norm(), P);
}

}  // namespace

TEST(Phi, ZeroAtExactFit) {
  std::mt19937_64 rng(1);
  MeasurementOperator op = MeasurementOperator::gaussian(4, 5, 12, 3, false);
  const Matrix M_star = randn(4, 2, rng) * randn(5, 2, rng).transpose();
  const Vector b = op.forward(M_star);
  const ProblemInstance inst(std::move(op), b, 0.0, GroundTruth{M_star, Vector::Zero(12)});
  EXPECT_NEAR(phi_value(inst, M_star), 0.0, 1e-24);
  EXPECT_LE(phi_grad(inst, M_star).norm(), 1e-12);
}

TEST(Phi, IdentityGradientIsResidual) {
  std::mt19937_64 rng(2);
  const Matrix Mt = randn(3, 4, rng), M = randn(3, 4, rng);
  MeasurementOperator op = MeasurementOperator::identity(3, 4, false);
  const Vector b = op.forward(Mt);
  const ProblemInstance inst(std::move(op), b, 0.3);
  EXPECT_LE((phi_grad(inst, M) - (M - Mt)).norm(), 1e-14);
  EXPECT_NEAR(phi_value(inst, M), 0.5 * (M - Mt).squaredNorm(), 1e-13);
}

TEST(Phi, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Case c = random_case(rng, trial % 2 == 0, 0.1);
    const MeasurementOperator& op = c.inst.op();
    const Matrix M = c.P.product();
    const Vector g = op.to_coords(phi_grad(c.inst, M));
    const Vector m = op.to_coords(M);
    Vector fd(m.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      Vector mp = m, mm = m;
      mp(i) += h;
      mm(i) -= h;
      fd(i) = (phi_value(c.inst, op.from_coords(mp)) - phi_value(c.inst, op.from_coords(mm))) / (2 * h);
    }
    EXPECT_LE((fd - g).norm(), 1e-6 * g.norm()) << "trial " << trial;
  }
}

TEST(Instance, RejectsInconsistentInputs) {
  MeasurementOperator op = MeasurementOperator::gaussian(3, 3, 5, 1, false);
  EXPECT_THROW(ProblemInstance(op, Vector::Zero(4), 0.1), std::invalid_argument);
  EXPECT_THROW(ProblemInstance(op, Vector::Zero(5), -1.0), std::invalid_argument);
  const Matrix M = Matrix::Ones(3, 3);
  EXPECT_THROW(ProblemInstance(op, Vector::Zero(5), 0.1, GroundTruth{M, Vector::Zero(5)}),
               std::invalid_argument);
  EXPECT_NO_THROW(ProblemInstance(op, op.forward(M), 0.1, GroundTruth{M, Vector::Zero(5)}));
}

TEST(Instance, MissingNoiseIsFilledWithZeros) {
  MeasurementOperator op = MeasurementOperator::gaussian(3, 3, 5, 1, false);
  const Matrix M = Matrix::Ones(3, 3);
  const Vector b = op.forward(M);
  const ProblemInstance inst(std::move(op), b, 0.0, GroundTruth{M, Vector()});
  EXPECT_EQ(inst.truth()->xi.size(), 5);
}

TEST(FValue, ZeroFactorsGiveHalfSquaredObservation) {
  std::mt19937_64 rng(4);
  for (bool sym : {false, true}) {
    Case c = random_case(rng, sym, 0.7);
    EXPECT_NEAR(f_value(c.inst, c.P.zeros_like()), 0.5 * c.inst.b().squaredNorm(), 1e-12);
  }
}

TEST(FValue, ExactFitWithoutPenaltyIsZero) {
  std::mt19937_64 rng(5);
  const Matrix U = randn(5, 2, rng), V = randn(4, 2, rng);
  MeasurementOperator op = MeasurementOperator::gaussian(5, 4, 15, 2, false);
  const Vector b = op.forward(U * V.transpose());
  const ProblemInstance inst(std::move(op), b, 0.0);
  EXPECT_NEAR(f_value(inst, FactorPoint::asymmetric(U, V)), 0.0, 1e-24);
}

TEST(FValue, PenaltyForms) {
  std::mt19937_64 rng(6);
  const Matrix U = randn(4, 2, rng), V = randn(4, 2, rng);
  MeasurementOperator op = MeasurementOperator::identity(4, 4, true);
  const Vector b = Vector::Zero(op.n());
  const ProblemInstance sym(op, b, 0.5);
  const Matrix UU = U * U.transpose();
  EXPECT_NEAR(f_value(sym, FactorPoint::symmetric_point(U)),
              0.5 * UU.squaredNorm() + 0.5 * U.squaredNorm(), 1e-12);
  MeasurementOperator op2 = MeasurementOperator::identity(4, 4, false);
  const ProblemInstance asym(op2, Vector::Zero(16), 0.5);
  EXPECT_NEAR(f_value(asym, FactorPoint::asymmetric(U, V)),
              0.5 * (U * V.transpose()).squaredNorm() + 0.25 * (U.squaredNorm() + V.squaredNorm()),
              1e-12);
}

TEST(FValue, RescalingInvarianceOnlyWithoutPenalty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Case c0 = random_case(rng, false, 0.0);
    const int r = c0.P.rank();
    Matrix G = randn(r, r, rng) + 3.0 * Matrix::Identity(r, r);
    const FactorPoint Q = FactorPoint::asymmetric(c0.P.U * G, c0.P.V * G.inverse().transpose());
    const double f0 = f_value(c0.inst, c0.P);
    EXPECT_NEAR(f_value(c0.inst, Q), f0, 1e-10 * (1 + std::abs(f0)));
    const ProblemInstance pen(c0.inst.op(), c0.inst.b(), 0.5);
    EXPECT_GT(std::abs(f_value(pen, Q) - f_value(pen, c0.P)), 1e-6);
  }
}

TEST(FValue, SymmetricAsymmetricCoherence) {
  std::mt19937_64 rng(8);
  Case c = random_case(rng, true, 0.4);
  const SmoothLoss phi = quadratic_loss(c.inst);
  const FactorPoint twin = FactorPoint::asymmetric(c.P.U, c.P.U);
  EXPECT_NEAR(f_value(phi, 0.4, twin), f_value(c.inst, c.P), 1e-12 * (1 + f_value(c.inst, c.P)));
}

TEST(FValue, RejectsModeOrShapeMismatch) {
  std::mt19937_64 rng(9);
  Case c = random_case(rng, false, 0.1);
  EXPECT_THROW(f_value(c.inst, FactorPoint::symmetric_point(c.P.U)), std::invalid_argument);
  EXPECT_THROW(f_value(c.inst, FactorPoint::asymmetric(Matrix::Zero(c.inst.d1() + 1, 1),
                                                       Matrix::Zero(c.inst.d2(), 1))),
               std::invalid_argument);
  EXPECT_THROW(FactorPoint::asymmetric(Matrix::Zero(3, 2), Matrix::Zero(3, 1)), std::invalid_argument);
}

TEST(FGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    Case c = random_case(rng, trial % 2 == 1, 0.3);
    const Vector x = flatten(c.P), g = flatten(f_grad(c.inst, c.P));
    Vector fd(x.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vector xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      fd(i) = (f_value(c.inst, unflatten(xp, c.P)) - f_value(c.inst, unflatten(xm, c.P))) / (2 * h);
    }
    EXPECT_LE((fd - g).norm(), 1e-5 * g.norm()) << "trial " << trial;
  }
}

TEST(FGrad, SmoothLossOverloadAgrees) {
  std::mt19937_64 rng(11);
  for (bool sym : {false, true}) {
    Case c = random_case(rng, sym, 0.2);
    const SmoothLoss phi = quadratic_loss(c.inst);
    const FactorPoint D = random_direction(c.P, rng);
    EXPECT_NEAR(f_value(phi, 0.2, c.P), f_value(c.inst, c.P), 1e-12);
    EXPECT_LE((flatten(f_grad(phi, 0.2, c.P)) - flatten(f_grad(c.inst, c.P))).norm(), 1e-10);
    EXPECT_LE((flatten(f_hvp(phi, 0.2, c.P, D)) - flatten(f_hvp(c.inst, c.P, D))).norm(), 1e-10);
  }
}

TEST(FGrad, VanishesAtConstructedSpuriousPoint) {
  const CounterexampleInstance ce = build_thm5(4, 1, 0, 0.1, 0.2, true);
  EXPECT_LE(f_grad(ce.instance(), ce.spurious_point).norm(), 1e-10);
}

TEST(FGrad, CriticalPointsWithPenaltyAreBalanced) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    MeasurementOperator op = MeasurementOperator::gaussian(6, 5, 40, 100 + trial, false);
    const Matrix M = randn(6, 2, rng) * randn(5, 2, rng).transpose();
    const Vector b = op.forward(M);
    const ProblemInstance inst(std::move(op), b, 0.05);
    SolverConfig cfg;
    cfg.seed = trial;
    cfg.grad_tol = 1e-12;
    const SolveResult res = solve_factored(inst, 3, cfg);
    ASSERT_TRUE(res.converged) << res.message << " iters " << res.iters << " grad " << res.grad_norm;
    const FactorPoint& P = *res.point;
    EXPECT_LE((P.U.transpose() * P.U - P.V.transpose() * P.V).norm(), 1e-8);
  }
}

TEST(FHessian, QuadformMatchesSecondDifferences) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    Case c = random_case(rng, trial % 2 == 0, 0.25);
    const FactorPoint D = random_direction(c.P, rng);
    const double h = 1e-4;
    const double sd = (f_value(c.inst, c.P.axpy(h, D)) - 2 * f_value(c.inst, c.P) +
                       f_value(c.inst, c.P.axpy(-h, D))) /
                      (h * h);
    const double qf = f_hess_quadform(c.inst, c.P, D);
    const double scale = std::max(std::abs(qf), f_hvp(c.inst, c.P, D).norm());
    EXPECT_LE(std::abs(sd - qf), 1e-4 * scale) << "trial " << trial;
  }
}

TEST(FHessian, HvpMatchesGradientDifferences) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    Case c = random_case(rng, trial % 2 == 1, 0.1);
    const FactorPoint D = random_direction(c.P, rng);
    const double h = 1e-5;
    const Vector fd =
        (flatten(f_grad(c.inst, c.P.axpy(h, D))) - flatten(f_grad(c.inst, c.P.axpy(-h, D)))) / (2 * h);
    const Vector hv = flatten(f_hvp(c.inst, c.P, D));
    EXPECT_LE((fd - hv).norm(), 1e-4 * hv.norm()) << "trial " << trial;
    EXPECT_NEAR(f_hess_quadform(c.inst, c.P, D), hv.dot(flatten(D)), 1e-10 * (1 + hv.norm()));
  }
}

TEST(FHessian, CachedHessianAgreesWithHvp) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    Case c = random_case(rng, trial % 2 == 0, 0.15);
    const HessianAt H(c.inst, c.P);
    ASSERT_EQ(H.dim(), c.P.dim());
    const FactorPoint D = random_direction(c.P, rng);
    const Vector hv = flatten(f_hvp(c.inst, c.P, D));
    EXPECT_LE((H.apply(flatten(D)) - hv).norm(), 1e-10 * (1 + hv.norm()));
    EXPECT_LE((flatten(H.apply(D)) - hv).norm(), 1e-10 * (1 + hv.norm()));
    const Matrix Hd = H.dense();
    EXPECT_LE((Hd - Hd.transpose()).norm(), 1e-10 * (1 + Hd.norm()));
    EXPECT_LE((Hd * flatten(D) - hv).norm(), 1e-10 * (1 + hv.norm()));
  }
}

TEST(FHessian, CachedHessianOnRankOneOperator) {
  const CounterexampleInstance ce = build_thm5(2, 1, 4, 0.2, 0.1, false);
  const HessianAt H(ce.instance(), ce.spurious_point);
  std::mt19937_64 rng(16);
  const FactorPoint D = random_direction(ce.spurious_point, rng);
  const Vector hv = flatten(f_hvp(ce.instance(), ce.spurious_point, D));
  EXPECT_LE((H.dense() * flatten(D) - hv).norm(), 1e-12 * (1 + hv.norm()));
}

TEST(FHessian, ZeroPointQuadformIsCrossTerm) {
  std::mt19937_64 rng(17);
  Case c = random_case(rng, false, 0.0);
  const FactorPoint Z = c.P.zeros_like();
  const FactorPoint D = random_direction(Z, rng);
  const Matrix g0 = phi_grad(c.inst, Matrix::Zero(c.inst.d1(), c.inst.d2()));
  EXPECT_NEAR(f_hess_quadform(c.inst, Z, D), 2.0 * inner(g0, D.U * D.V.transpose()), 1e-12);
  const FactorPoint hv = f_hvp(c.inst, Z, D);
  EXPECT_LE((hv.U - g0 * D.V).norm(), 1e-12);
  EXPECT_LE((hv.V - g0.transpose() * D.U).norm(), 1e-12);
}

TEST(FHessian, StrictSpuriousPointIsPsdWithFlatOrthogonalDirections) {
  // r* = 1, r_max = 3, r = 2: directions Q⊥Ṙ⊥ with Ṙ⊥ᵀR = 0 have zero curvature.
  SpurGenSpec s;
  s.r_star = 1;
  s.r_max = 3;
  s.r = 2;
  s.d = 5;
  s.epsilon = 0.1;
  s.c_perp = std::sqrt(0.05);
  s.c = std::sqrt(1.0 - 0.1 - 0.05 * 3);
  s.lambda = 0.2;
  s.symmetric = true;
  s.seed = 4;
  ASSERT_EQ(s.spur_condition(), SpurCondition::Strict);
  const CounterexampleInstance ce = build_spur_gen(s);
  const ProblemInstance& inst = ce.instance();
  std::mt19937_64 rng(18);
  for (int k = 0; k < 1000; ++k) {
    const FactorPoint D = random_direction(ce.spurious_point, rng);
    ASSERT_GE(f_hess_quadform(inst, ce.spurious_point, D), -1e-12);
  }
  const Matrix W = randn(1, 2, rng);
  const FactorPoint flat = FactorPoint::symmetric_point(ce.Q_perp.col(2) * W);
  EXPECT_NEAR(f_hess_quadform(inst, ce.spurious_point, flat), 0.0, 1e-12);
}

TEST(Prox, NuclearNormIsSumOfSingularValues) {
  Matrix M = Matrix::Zero(3, 2);
  M(0, 0) = 3.0;
  M(1, 1) = -4.0;
  EXPECT_NEAR(nuclear_norm(M), 7.0, 1e-14);
}

TEST(Prox, SoftThresholdExamples) {
  std::mt19937_64 rng(19);
  Eigen::HouseholderQR<Matrix> ql(randn(5, 5, rng)), qr(randn(4, 4, rng));
  const Matrix L = ql.householderQ(), R = qr.householderQ();
  const Matrix Mt = L.leftCols(2) * R.leftCols(2).transpose();  // singular values 1
  for (double lam : {0.0, 0.3, 0.9, 1.0, 1.7})
    EXPECT_LE((svd_soft_threshold(Mt, lam) - std::max(0.0, 1.0 - lam) * Mt).norm(), 1e-13);
  const Matrix X = randn(5, 4, rng);
  EXPECT_LE((svd_soft_threshold(X, 0.0) - X).norm(), 1e-12);
  const double s1 = Eigen::JacobiSVD<Matrix>(X).singularValues()(0);
  EXPECT_LE(svd_soft_threshold(X, s1 + 1e-9).norm(), 1e-12);
  EXPECT_THROW(svd_soft_threshold(X, -1.0), std::invalid_argument);
}

TEST(Prox, SoftThresholdShrinksEachSingularValue) {
  std::mt19937_64 rng(20);
  const Matrix X = randn(6, 4, rng);
  const Vector s = Eigen::JacobiSVD<Matrix>(X).singularValues();
  const Vector t = Eigen::JacobiSVD<Matrix>(svd_soft_threshold(X, 0.8)).singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) EXPECT_NEAR(t(i), std::max(0.0, s(i) - 0.8), 1e-12);
}

TEST(Prox, PsdSoftThresholdShiftsEigenvalues) {
  Matrix M = Matrix::Zero(3, 3);
  M.diagonal() << 2.0, 0.5, -1.0;
  const Matrix out = psd_soft_threshold(M, 0.7);
  EXPECT_NEAR(out(0, 0), 1.3, 1e-14);
  EXPECT_NEAR(out(1, 1), 0.0, 1e-14);
  EXPECT_NEAR(out(2, 2), 0.0, 1e-14);
}

TEST(Convex, ZeroMatrixGivesHalfSquaredObservation) {
  std::mt19937_64 rng(21);
  Case c = random_case(rng, false, 0.5);
  EXPECT_NEAR(convex_value(c.inst, Matrix::Zero(c.inst.d1(), c.inst.d2())),
              0.5 * c.inst.b().squaredNorm(), 1e-12);
}

TEST(Convex, IdentityMinimizerIsSoftThreshold) {
  std::mt19937_64 rng(22);
  const Matrix B = randn(4, 5, rng);
  MeasurementOperator op = MeasurementOperator::identity(4, 5, false);
  const Vector b = op.forward(B);
  const ProblemInstance inst(std::move(op), b, 0.9);
  const Matrix Mhat = svd_soft_threshold(B, 0.9);
  const double best = convex_value(inst, Mhat);
  for (int k = 0; k < 100; ++k)
    EXPECT_GE(convex_value(inst, Mhat + 1e-3 * randn(4, 5, rng)), best);
}

TEST(Convex, FactoredValueDominatesConvexValue) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    Case c = random_case(rng, false, 0.4);
    EXPECT_GE(f_value(c.inst, c.P), convex_value(c.inst, c.P.product()) - 1e-12);
  }
  // Balanced SVD factors attain equality.
  Case c = random_case(rng, false, 0.4);
  Eigen::JacobiSVD<Matrix> svd(c.P.product(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int r = c.P.rank();
  const Vector sq = svd.singularValues().head(r).cwiseSqrt();
  const FactorPoint B = FactorPoint::asymmetric(svd.matrixU().leftCols(r) * sq.asDiagonal(),
                                                svd.matrixV().leftCols(r) * sq.asDiagonal());
  EXPECT_NEAR(f_value(c.inst, B), convex_value(c.inst, c.P.product()), 1e-10);
}

TEST(Convex, KeyInequalityWithExactConstants) {
  // Quadratic φ: ⟨∇φ(M2)−∇φ(M1), E⟩ = ⟨A(M2−M1), A(E)⟩. With M1, M2, E inside a
  // k-dimensional joint factor span, the exact rank-k constants bound the gap.
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 3 + trial % 4, d = k + 2;
    const int m = k / 3;
    const Matrix G = randn(d, d, rng);
    MeasurementOperator op = MeasurementOperator::rank_one(G, 0.85, false);
    const RestrictedConstants rc = restricted_constants_exact(op, k);
    Eigen::HouseholderQR<Matrix> ql(randn(d, k, rng)), qr(randn(d, k, rng));
    const Matrix X = Matrix(ql.householderQ()).leftCols(k), Y = Matrix(qr.householderQ()).leftCols(k);
    auto in_span = [&] { return Matrix(X * randn(k, m, rng) * randn(m, k, rng) * Y.transpose()); };
    const Matrix M1 = in_span(), M2 = in_span(), E = in_span();
    const ProblemInstance inst(op, randn(op.n(), 1, rng).col(0), 0.0);
    const double lhs = inner(phi_grad(inst, M2) - phi_grad(inst, M1), E) -
                       0.5 * (rc.L + rc.mu) * inner(M2 - M1, E);
    EXPECT_LE(std::abs(lhs), 0.5 * (rc.L - rc.mu) * (M2 - M1).norm() * E.norm() + 1e-10);
  }
}
