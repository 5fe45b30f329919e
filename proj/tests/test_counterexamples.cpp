#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "nclasso/certify.hpp"
#include "nclasso/counterexamples.hpp"
#include "nclasso/solver.hpp"
#include "nclasso/theory.hpp"

using namespace nclasso;

namespace {

// Hessian of f by central differences of the gradient, symmetrized.
Matrix fd_hessian(const ProblemInstance& inst, const FactorPoint& P, double h = 1e-5) {
  const Vector x0 = flatten(P);
  const int n = static_cast<int>(x0.size());
  Matrix H(n, n);
  for (int j = 0; j < n; ++j) {
    Vector xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    H.col(j) = (flatten(f_grad(inst, unflatten(xp, P))) - flatten(f_grad(inst, unflatten(xm, P)))) /
               (2 * h);
  }
  return 0.5 * (H + H.transpose());
}

double min_eig(const Matrix& H) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(H, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

SpurGenSpec small_spec(double lambda, bool sym, std::uint64_t seed) {
  // r* = 1, r_max = 3, ε = 0.1, c⊥² = 0.05 → c² = 0.9 − 0.15 = 0.75
  SpurGenSpec s;
  s.r_star = 1;
  s.r_max = 3;
  s.d = 5;
  s.epsilon = 0.1;
  s.c_perp = std::sqrt(0.05);
  s.c = std::sqrt(0.75);
  s.lambda = lambda;
  s.r = 2;
  s.symmetric = sym;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(SpurGenSpec, ConditionClassification) {
  auto s = small_spec(0.0, true, 0);
  // c c⊥ r* = √0.0375 ≈ 0.194, 1 − 0.75 − 0.1 = 0.15
  EXPECT_NEAR(s.spur_cond_margin(), std::sqrt(0.0375) - 0.15, 1e-15);
  EXPECT_EQ(s.spur_condition(), SpurCondition::Strict);
  EXPECT_NEAR(s.constraint_residual(), 0.0, 1e-15);
  EXPECT_EQ(to_string(SpurCondition::Equality), "equality");
}

TEST(SpurGenSpec, ValidationRejects) {
  auto s = small_spec(0.0, true, 0);
  s.epsilon = 0.2;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_spec(0.0, true, 0);
  s.d = 3;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_spec(0.0, true, 0);
  s.r = 4;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_spec(0.0, true, 0);
  std::swap(s.c, s.c_perp);
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_spec(-1.0, true, 0);
  EXPECT_THROW(build_spur_gen(s), std::invalid_argument);
}

TEST(SpurGen, ZeroLambdaMeansNoiseless) {
  for (bool sym : {true, false}) {
    const auto ce = build_spur_gen(small_spec(0.0, sym, 3));
    EXPECT_EQ(ce.a, 0.0);
    EXPECT_EQ(ce.a_perp, 0.0);
    EXPECT_LE((ce.instance().b() - ce.instance().op().forward(ce.M_star)).norm(), 1e-14);
    const auto rep = verify_instance(ce);
    EXPECT_LE(rep.clause("iii").value, 1e-14);
  }
}

TEST(SpurGen, DeterminantIsEpsilon) {
  const auto s = small_spec(0.3, true, 1);
  const auto ce = build_spur_gen(s);
  const double c = s.c, cp = s.c_perp;
  const double det = (1 - c * c * 1) * (1 - cp * cp * 3) - (c * cp * 3) * (c * cp * 1);
  EXPECT_NEAR(ce.system_det, det, 1e-15);
  EXPECT_NEAR(ce.system_det, s.epsilon, 1e-14);
  // the 2×2 system holds
  EXPECT_NEAR((1 - c * c) * ce.a + c * cp * 3 * ce.a_perp, 0.3, 1e-14);
  EXPECT_NEAR(c * cp * ce.a + (1 - cp * cp * 3) * ce.a_perp, 0.3, 1e-14);
}

TEST(SpurGen, Geometry) {
  for (bool sym : {true, false}) {
    const auto ce = build_spur_gen(small_spec(0.1, sym, 7));
    const int d = ce.spec.d;
    Matrix frame(d, 4);
    frame << ce.Q, ce.Q_perp;
    EXPECT_LE((frame.transpose() * frame - Matrix::Identity(4, 4)).norm(), 1e-13);
    const auto sv = Eigen::JacobiSVD<Matrix>(ce.M_star).singularValues();
    EXPECT_NEAR(sv(0), 1.0, 1e-13);
    EXPECT_NEAR(sv(1), 0.0, 1e-13);
    const auto& P = ce.spurious_point;
    const Matrix V = sym ? P.U : P.V;
    EXPECT_LE((P.U.transpose() * ce.M_star).norm(), 1e-13);
    EXPECT_LE((ce.M_star * V).norm(), 1e-13);
    EXPECT_LE((P.U.transpose() * P.U - ce.x * Matrix::Identity(2, 2)).norm(), 1e-13);
    const double x = ce.spec.c * ce.spec.c_perp / (1 - 0.05 * 2);
    EXPECT_NEAR(ce.x, x, 1e-15);
    Matrix G = ce.spec.c * ce.Q * ce.Q.transpose() - ce.spec.c_perp * ce.Q_perp * ce.Q_perp.transpose();
    EXPECT_LE((ce.G - G).norm(), 1e-14);
    // ranges are orthogonal, so ‖UVᵀ − M*‖² = r* + ‖UVᵀ‖² and ‖UVᵀ‖² = r·x²
    const double err = (P.product() - ce.M_star).norm();
    EXPECT_NEAR(err, std::sqrt(1.0 + 2.0 * x * x), 1e-13);
  }
}

TEST(SpurGen, PredictedConstantsMatchExact) {
  const auto ce = build_spur_gen(small_spec(0.0, true, 2));
  ASSERT_EQ(ce.predicted_constants.size(), 4u);
  for (int k = 1; k <= 4; ++k) {
    const auto ex = restricted_constants_exact(ce.instance().op(), k);
    EXPECT_NEAR(ce.predicted_constants[k - 1].mu, ex.mu, 1e-12) << "k=" << k;
    EXPECT_NEAR(ex.L, 1.0, 1e-12);
  }
  // μ_{r+r*} at r = 2
  EXPECT_NEAR(spur_gen_mu(ce.spec, 3), 1 - 0.75 - 0.1, 1e-15);
}

TEST(SpurGen, StrictInstancesVerify) {
  for (bool sym : {true, false})
    for (double lam : {0.0, 0.2}) {
      const auto rep = verify_instance(build_spur_gen(small_spec(lam, sym, 4)));
      EXPECT_TRUE(rep.all_passed) << "sym=" << sym << " lambda=" << lam;
      EXPECT_EQ(rep.minimality, "strict-local-minimum");
      EXPECT_TRUE(rep.failed().empty());
    }
}

TEST(SpurGen, HessianAgreesWithFiniteDifferences) {
  for (bool sym : {true, false}) {
    const auto ce = build_spur_gen(small_spec(0.2, sym, 5));
    const auto rep = verify_instance(ce);
    const double fd = min_eig(fd_hessian(ce.instance(), ce.spurious_point));
    EXPECT_NEAR(rep.certificate.hess_min_eig, fd, 1e-6);
    EXPECT_GE(fd, -1e-6);
  }
}

TEST(SpurGen, ClauseLookup) {
  const auto rep = verify_instance(build_spur_gen(small_spec(0.0, true, 0)));
  ASSERT_EQ(rep.clauses.size(), 6u);
  EXPECT_EQ(rep.clause("vi").name, "spurious point is far from M*");
  EXPECT_THROW(rep.clause("vii"), std::out_of_range);
}

// The operator keeps a continuous symmetry, so spurious minima come in an
// orbit; a perturbed start must come back to the orbit, not to the exact point.
TEST(SpurGen, EscapeTestReturnsToSpuriousOrbit) {
  for (bool sym : {true, false}) {
    const auto ce = build_spur_gen(small_spec(0.2, sym, 6));
    const Matrix M0 = ce.spurious_point.product();
    const Matrix M_star = ce.instance().truth()->M_star;
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    FactorPoint dir = ce.spurious_point.zeros_like();
    for (int i = 0; i < dir.U.size(); ++i) dir.U.data()[i] = n01(rng);
    for (int i = 0; i < dir.V.size(); ++i) dir.V.data()[i] = n01(rng);
    const FactorPoint start = ce.spurious_point.axpy(1e-4 / dir.norm(), dir);
    SolverConfig cfg;
    cfg.grad_tol = 1e-13;
    const auto res = solve_factored_from(ce.instance(), start, cfg);
    ASSERT_TRUE(res.converged) << res.message;
    EXPECT_NEAR(res.objective, f_value(ce.instance(), ce.spurious_point), 1e-12) << "sym=" << sym;
    const Vector s_res = Eigen::JacobiSVD<Matrix>(res.M).singularValues();
    const Vector s_0 = Eigen::JacobiSVD<Matrix>(M0).singularValues();
    EXPECT_LE((s_res - s_0).norm(), 1e-6) << "sym=" << sym;
    EXPECT_NEAR((res.M - M_star).norm(), (M0 - M_star).norm(), 1e-6) << "sym=" << sym;
    // nowhere near M*
    EXPECT_GE((res.M - M_star).norm(), 0.5 * (M0 - M_star).norm());
  }
}

TEST(SpurGen, MStarIsUniqueConvexOptimum) {
  const auto ce = build_spur_gen(small_spec(0.2, false, 8));
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n01;
  SolverConfig cfg;
  cfg.method = SolverMethod::ProxGradient;
  cfg.max_iters = 20000;
  cfg.grad_tol = 1e-12;
  cfg.objective_rtol = 1e-16;
  for (int s = 0; s < 5; ++s) {
    Matrix M0(5, 5);
    for (int i = 0; i < M0.size(); ++i) M0.data()[i] = n01(rng);
    const auto res = solve_convex_prox(ce.instance(), cfg, M0);
    EXPECT_LE((res.M - ce.M_star).norm(), 1e-6) << "start " << s;
  }
}

TEST(Thm5, ThresholdValues) {
  EXPECT_NEAR(thm5_threshold(4, 1), 0.2, 1e-15);
  EXPECT_NEAR(thm5_threshold(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(thm5_threshold(1, 2), std::invalid_argument);
}

TEST(Thm5, SpecShape) {
  const auto s = thm5_spec(4, 1, 0, 0.3, 0.1, true);
  EXPECT_EQ(s.d, 5);
  EXPECT_EQ(s.r_max, 4);
  EXPECT_EQ(s.r, 4);
  EXPECT_DOUBLE_EQ(s.epsilon, 0.3);
  EXPECT_NEAR(s.c * s.c * 1, 0.35, 1e-15);
  EXPECT_NEAR(s.c_perp * s.c_perp * 4, 0.35, 1e-15);
  EXPECT_NEAR(s.c * s.c_perp * 1, 0.35 * 0.5, 1e-15);
  EXPECT_THROW(thm5_spec(4, 1, 4, 0.3, 0.1, true), std::invalid_argument);
  EXPECT_THROW(thm5_spec(4, 1, 0, 1.0, 0.1, true), std::invalid_argument);
}

TEST(Thm5, EqualityAtOneThird) {
  const auto ce = build_thm5(1, 1, 0, 1.0 / 3.0, 0.1, true);
  EXPECT_EQ(ce.condition, SpurCondition::Equality);
  const auto rep = verify_instance(ce);
  EXPECT_EQ(rep.minimality, "second-order-critical-minimality-undetermined");
  EXPECT_TRUE(rep.all_passed);
}

TEST(Thm5, LocalMinimumBelowThresholdSaddleAbove) {
  for (bool sym : {true, false}) {
    const auto lo = build_thm5(4, 1, 0, 0.1, 0.1, sym);
    EXPECT_EQ(lo.condition, SpurCondition::Strict);
    const auto rl = verify_instance(lo);
    EXPECT_TRUE(rl.all_passed);
    EXPECT_GE(rl.certificate.hess_min_eig, -1e-8);

    const auto hi = build_thm5(4, 1, 0, 0.25, 0.1, sym);
    EXPECT_EQ(hi.condition, SpurCondition::Violated);
    const auto rh = verify_instance(hi);
    EXPECT_EQ(rh.minimality, "saddle");
    EXPECT_LT(rh.certificate.hess_min_eig, -1e-6);
    EXPECT_NEAR(rh.certificate.hess_min_eig,
                min_eig(fd_hessian(hi.instance(), hi.spurious_point)), 1e-6);
    EXPECT_TRUE(rh.all_passed);
  }
}

TEST(Thm5, AsymmetricMirrorsSymmetric) {
  for (double mu : {0.05, 0.15, 0.3, 0.6}) {
    const auto s = verify_instance(build_thm5(4, 1, 0, mu, 0.1, true, 2));
    const auto a = verify_instance(build_thm5(4, 1, 0, mu, 0.1, false, 2));
    EXPECT_EQ(s.minimality, a.minimality);
    if (s.certificate.hess_min_eig >= -1e-8) { EXPECT_GE(a.certificate.hess_min_eig, -1e-8); }
  }
}

TEST(Thm5, OperatorConstants) {
  const double mu = 0.15;
  const auto ce = build_thm5(4, 1, 7, mu, 0.0, true, 3);
  for (int k = 1; k <= 5; ++k) {
    const auto ex = restricted_constants_exact(ce.instance().op(), k);
    EXPECT_NEAR(ex.L, 1.0, 1e-12);
    EXPECT_GE(ex.mu, mu - 1e-12);
  }
  EXPECT_NEAR(restricted_constants_exact(ce.instance().op(), 5).mu, mu, 1e-12);
}

TEST(Thm5, NoiseNormEqualsLambda) {
  const auto rep = verify_instance(build_thm5(2, 1, 0, 0.2, 0.37, false, 1));
  EXPECT_LE(rep.clause("iii").value, 1e-10);
  EXPECT_LE(rep.clause("i").value, 1e-10);
}

TEST(Thm6, RankFormula) {
  EXPECT_EQ(thm6_rank(2, 1, 0.4), 4);  // (0.4 + 2)/0.6 = 4
  EXPECT_EQ(thm6_rank(1, 1, 0.5), 3);
  EXPECT_EQ(thm6_rank(3, 2, 0.1), 4);  // ⌈3.2/0.9⌉ = 4
  EXPECT_THROW(thm6_rank(1, 2, 0.4), std::invalid_argument);
  EXPECT_THROW(thm6_rank(2, 1, 1.0), std::invalid_argument);
}

TEST(Thm6, ConstructedConstants) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.05, 0.9);
  for (int k = 0; k < 15; ++k) {
    const int rs = 1 + k % 2, r1 = rs + k % 3;
    const double mu = u(rng);
    const auto s = thm6_spec(r1, rs, mu, 0.1, true, k);
    EXPECT_GE(s.c, s.c_perp);
    EXPECT_NEAR(spur_gen_mu(s, r1 + rs), mu, 1e-12);
    EXPECT_EQ(s.spur_condition(), SpurCondition::Strict);
    EXPECT_EQ(s.d, rs + s.r_max);
    EXPECT_GE(s.r_max, (rs * mu + r1) / (1 - mu) - 1e-12);
  }
}

TEST(Thm6, InstanceVerifiesAtRankR2) {
  const auto ce = build_thm6(2, 1, 0.4, 0.1, true, 0);
  EXPECT_EQ(ce.spurious_point.rank(), 4);
  EXPECT_NEAR(restricted_constants_exact(ce.instance().op(), 3).mu, 0.4, 1e-12);
  const auto rep = verify_instance(ce);
  EXPECT_TRUE(rep.all_passed);
  EXPECT_EQ(rep.minimality, "strict-local-minimum");
  // the rank-r1 landscape condition holds with L = L2 = 1
  TheoryParams p;
  p.r = 2;
  p.r_star = 1;
  p.mu = 0.4;
  EXPECT_TRUE(mu_eff_closed(p).feasible);
}

TEST(Example2, CspMatchesX) {
  for (double kap : {1.5, 3.0, 7.0}) {
    const auto ce = build_example2(4, 1, 6, 0, kap, 1);
    const double c_sp = example2_c_sp(4, 1, kap);
    EXPECT_NEAR(c_sp * c_sp, (kap - 1) / (kap + 1) * 0.5, 1e-15);
    EXPECT_NEAR(ce.x, c_sp * c_sp, 1e-14);
    EXPECT_LE((ce.spurious_point.U - c_sp * ce.P_perp).norm(), 1e-13);
    EXPECT_LE((ce.spurious_point.V - c_sp * ce.Q_perp).norm(), 1e-13);
  }
}

TEST(Example2, StructureAndCriticality) {
  const auto ce = build_example2(3, 2, 6, 7, 2.0, 5);
  EXPECT_EQ(ce.M_star.rows(), 6);
  EXPECT_EQ(ce.M_star.cols(), 7);
  EXPECT_EQ(ce.instance().lambda(), 0.0);
  EXPECT_LE((ce.M_star - ce.P * ce.Q.transpose()).norm(), 1e-15);
  EXPECT_LE((ce.instance().b() - ce.instance().op().forward(ce.M_star)).norm(), 1e-14);
  const auto rep = verify_instance(ce);
  EXPECT_LE(rep.certificate.grad_norm, 1e-10);
  // ‖G‖ = 1 for the unit direction; the operator stores √γ·G
  const double gamma = 0.5;
  EXPECT_NEAR(ce.G.norm(), std::sqrt(gamma), 1e-14);
}

TEST(Example2, PsdIffAboveKappaCrit) {
  for (auto [rsp, rs] : {std::pair{1, 1}, std::pair{4, 1}, std::pair{3, 2}}) {
    const double kc = kappa_crit(rsp, rs);
    const auto above = verify_instance(build_example2(rsp, rs, rsp + rs + 1, 0, 1.05 * kc, 2));
    const auto below = verify_instance(build_example2(rsp, rs, rsp + rs + 1, 0, 0.95 * kc, 2));
    EXPECT_GE(above.certificate.hess_min_eig, -1e-8) << rsp << "," << rs;
    EXPECT_LT(below.certificate.hess_min_eig, -1e-6) << rsp << "," << rs;
    EXPECT_TRUE(above.all_passed);
    EXPECT_TRUE(below.all_passed);
    EXPECT_EQ(below.minimality, "saddle");
  }
}

TEST(Example2, BelowThresholdFiniteDifferenceAgrees) {
  const auto ce = build_example2(2, 1, 4, 0, 0.9 * kappa_crit(2, 1), 3);
  const auto rep = verify_instance(ce);
  EXPECT_NEAR(rep.certificate.hess_min_eig, min_eig(fd_hessian(ce.instance(), ce.spurious_point)),
              1e-6);
}

TEST(Example2, KappaProfile) {
  const int rsp = 5, rs = 2;
  const double kap = 4.0;
  const auto ce = build_example2(rsp, rs, 8, 0, kap, 4);
  for (int r = rs; r <= rsp; ++r) {
    const auto ex = restricted_constants_exact(ce.instance().op(), r + rs);
    const double expected = 1.0 / (1.0 - (1.0 - 1.0 / kap) * (1.0 + double(r) / rsp) / 2.0);
    EXPECT_NEAR(ex.kappa, expected, 1e-10 * expected) << "r=" << r;
  }
}

TEST(Example2, InvalidParameters) {
  EXPECT_THROW(build_example2(1, 2, 5, 0, 2.0), std::invalid_argument);
  EXPECT_THROW(build_example2(2, 1, 5, 0, 1.0), std::invalid_argument);
  EXPECT_THROW(build_example2(2, 1, 2, 0, 2.0), std::invalid_argument);
  EXPECT_THROW(build_example2(2, 1, 3, 2, 2.0), std::invalid_argument);
}
