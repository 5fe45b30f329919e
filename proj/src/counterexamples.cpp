#include "nclasso/counterexamples.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace nclasso {

namespace {

constexpr double kCondTol = 1e-12;

// d × k orthonormal frame: QR of a seeded Gaussian block, or coordinate vectors.
Matrix orthonormal_frame(int d, int k, std::uint64_t seed, bool coordinate) {
  if (coordinate) return Matrix::Identity(d, k);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(d, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) X(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(X);
  return qr.householderQ() * Matrix::Identity(d, k);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Shared assembly for spur_gen-type instances with left frames (P, P⊥) and
// right frames (Q, Q⊥). op must realize E ↦ E − ⟨G,E⟩G.
CounterexampleInstance assemble(const std::string& family, const SpurGenSpec& spec, Matrix P,
                                Matrix P_perp, Matrix Q, Matrix Q_perp, Matrix G,
                                MeasurementOperator op) {
  CounterexampleInstance ce;
  ce.family = family;
  ce.spec = spec;
  ce.P = std::move(P);
  ce.P_perp = std::move(P_perp);
  ce.Q = std::move(Q);
  ce.Q_perp = std::move(Q_perp);
  ce.G = std::move(G);
  ce.M_star = ce.P * ce.Q.transpose();

  const double c = spec.c, cp = spec.c_perp;
  const double rs = spec.r_star, rm = spec.r_max;
  // [[1−c²r*, c c⊥ r_max], [c c⊥ r*, 1−c⊥² r_max]]·[a; a⊥] = [λ; λ]
  Eigen::Matrix2d S;
  S << 1.0 - c * c * rs, c * cp * rm, c * cp * rs, 1.0 - cp * cp * rm;
  ce.system_det = S.determinant();
  const Eigen::Vector2d sol = S.partialPivLu().solve(Eigen::Vector2d(spec.lambda, spec.lambda));
  ce.a = spec.lambda == 0.0 ? 0.0 : sol(0);
  ce.a_perp = spec.lambda == 0.0 ? 0.0 : sol(1);

  const Matrix target =
      (1.0 + ce.a) * ce.M_star + ce.a_perp * (ce.P_perp * ce.Q_perp.transpose());
  Vector b = op.forward(target);
  Vector xi = b - op.forward(ce.M_star);
  ce.problem.emplace(std::move(op), std::move(b), spec.lambda, GroundTruth{ce.M_star, xi});

  ce.x = c * cp * rs / (1.0 - cp * cp * spec.r);
  const double sx = std::sqrt(ce.x);
  const Matrix U = sx * ce.P_perp.leftCols(spec.r);
  if (spec.symmetric) {
    ce.spurious_point = FactorPoint::symmetric_point(U);
  } else {
    ce.spurious_point = FactorPoint::asymmetric(U, sx * ce.Q_perp.leftCols(spec.r));
  }

  for (int k = 1; k <= spec.r_star + spec.r_max; ++k)
    ce.predicted_constants.push_back(make_constants(k, spur_gen_mu(spec, k), 1.0, true));
  ce.spur_cond_margin = spec.spur_cond_margin();
  ce.condition = spec.spur_condition();
  return ce;
}

}  // namespace

std::string to_string(SpurCondition s) {
  switch (s) {
    case SpurCondition::Strict: return "strict";
    case SpurCondition::Equality: return "equality";
    case SpurCondition::Violated: return "violated";
  }
  return "unknown";
}

double SpurGenSpec::constraint_residual() const {
  return c * c * r_star + c_perp * c_perp * r_max - (1.0 - epsilon);
}

double SpurGenSpec::spur_cond_margin() const {
  return c * c_perp * r_star - (1.0 - c * c * r_star - c_perp * c_perp * r);
}

SpurCondition SpurGenSpec::spur_condition() const {
  const double m = spur_cond_margin();
  if (m > kCondTol) return SpurCondition::Strict;
  if (m < -kCondTol) return SpurCondition::Violated;
  return SpurCondition::Equality;
}

void SpurGenSpec::validate() const {
  if (r_star < 1) throw std::invalid_argument("spur_gen: r_star must be >= 1");
  if (r_max < r_star) throw std::invalid_argument("spur_gen: r_max must be >= r_star");
  if (d < r_star + r_max) throw std::invalid_argument("spur_gen: d must be >= r_star + r_max");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("spur_gen: epsilon must lie in (0,1)");
  if (!(c_perp > 0.0) || !(c >= c_perp)) throw std::invalid_argument("spur_gen: need c >= c_perp > 0");
  if (std::abs(constraint_residual()) > 1e-12)
    throw std::invalid_argument("spur_gen: c^2 r_star + c_perp^2 r_max must equal 1 - epsilon");
  if (!(lambda >= 0.0)) throw std::invalid_argument("spur_gen: lambda must be >= 0");
  if (r < r_star || r > r_max) throw std::invalid_argument("spur_gen: search rank must lie in [r_star, r_max]");
}

double spur_gen_mu(const SpurGenSpec& spec, int k) {
  const int head = std::min(k, spec.r_star);
  const int tail = std::min(std::max(k - spec.r_star, 0), spec.r_max);
  return 1.0 - spec.c * spec.c * head - spec.c_perp * spec.c_perp * tail;
}

CounterexampleInstance build_spur_gen(const SpurGenSpec& spec) {
  spec.validate();
  const Matrix frame = orthonormal_frame(spec.d, spec.r_star + spec.r_max, spec.seed,
                                         spec.coordinate_basis);
  const Matrix Q = frame.leftCols(spec.r_star);
  const Matrix Qp = frame.rightCols(spec.r_max);
  const Matrix G = spec.c * Q * Q.transpose() - spec.c_perp * Qp * Qp.transpose();
  MeasurementOperator op = MeasurementOperator::rank_one_from_g(G, spec.symmetric);
  return assemble("spur-gen", spec, Q, Qp, Q, Qp, G, std::move(op));
}

double thm5_threshold(int r, int r_star) {
  if (r_star < 1 || r < r_star) throw std::invalid_argument("need r >= r_star >= 1");
  return 1.0 / (1.0 + 2.0 * std::sqrt(static_cast<double>(r) / r_star));
}

SpurGenSpec thm5_spec(int r, int r_star, int d, double mu, double lambda, bool symmetric,
                      std::uint64_t seed) {
  if (r_star < 1 || r < r_star) throw std::invalid_argument("thm5: need r >= r_star >= 1");
  if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("thm5: mu must lie in (0,1)");
  if (d == 0) d = r + r_star;
  if (d < r + r_star) throw std::invalid_argument("thm5: d must be >= r + r_star");
  SpurGenSpec s;
  s.r_star = r_star;
  s.r_max = r;
  s.r = r;
  s.d = d;
  s.epsilon = mu;
  s.c = std::sqrt((1.0 - mu) / (2.0 * r_star));
  s.c_perp = std::sqrt((1.0 - mu) / (2.0 * r));
  s.lambda = lambda;
  s.symmetric = symmetric;
  s.seed = seed;
  return s;
}

CounterexampleInstance build_thm5(int r, int r_star, int d, double mu, double lambda,
                                  bool symmetric, std::uint64_t seed) {
  const SpurGenSpec s = thm5_spec(r, r_star, d, mu, lambda, symmetric, seed);
  const double expected = 0.5 * (1.0 - mu) * std::sqrt(static_cast<double>(r_star) / r);
  if (std::abs(s.c * s.c_perp * r_star - expected) > 1e-12)
    throw std::logic_error("thm5: c c_perp r_star does not match its closed form");
  CounterexampleInstance ce = build_spur_gen(s);
  ce.family = "thm5";
  return ce;
}

int thm6_rank(int r1, int r_star, double mu) {
  if (r_star < 1 || r1 < r_star) throw std::invalid_argument("thm6: need r1 >= r_star >= 1");
  if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("thm6: mu must lie in (0,1)");
  const double bound = (r_star * mu + r1) / (1.0 - mu);
  return std::max(r1 + 1, static_cast<int>(std::ceil(bound - 1e-12)));
}

SpurGenSpec thm6_spec(int r1, int r_star, double mu, double lambda, bool symmetric,
                      std::uint64_t seed) {
  const int r2 = thm6_rank(r1, r_star, mu);
  SpurGenSpec s;
  s.r_star = r_star;
  s.r_max = r2;
  s.r = r2;
  s.d = r_star + r2;
  s.lambda = lambda;
  s.symmetric = symmetric;
  s.seed = seed;
  // c⊥²(r2 − r1) = μ − ε and c²r* + c⊥²r2 = 1 − ε; shrink ε until the
  // point at rank r2 satisfies the second-order condition strictly.
  double eps = 0.5 * mu;
  for (int it = 0; it < 200; ++it) {
    const double cp2 = (mu - eps) / (r2 - r1);
    const double c2 = (1.0 - eps - cp2 * r2) / r_star;
    if (c2 > 0.0 && std::sqrt(c2 * cp2) * r_star > eps + 1e-9) {
      s.epsilon = eps;
      s.c_perp = std::sqrt(cp2);
      s.c = std::sqrt(c2);
      return s;
    }
    eps *= 0.5;
  }
  throw std::invalid_argument("thm6: no admissible epsilon found");
}

CounterexampleInstance build_thm6(int r1, int r_star, double mu, double lambda, bool symmetric,
                                  std::uint64_t seed) {
  const SpurGenSpec s = thm6_spec(r1, r_star, mu, lambda, symmetric, seed);
  CounterexampleInstance ce = build_spur_gen(s);
  ce.family = "thm6";
  const double mu_r1 = spur_gen_mu(s, r1 + r_star);
  if (std::abs(mu_r1 - mu) > 1e-12)
    throw std::logic_error("thm6: mu at rank r1 + r_star does not match the request");
  return ce;
}

double example2_c_sp(int r_sp, int r_star, double kappa_sp) {
  return std::sqrt((kappa_sp - 1.0) / (kappa_sp + 1.0) *
                   std::sqrt(static_cast<double>(r_star) / r_sp));
}

CounterexampleInstance build_example2(int r_sp, int r_star, int d1, int d2, double kappa_sp,
                                      std::uint64_t seed) {
  if (r_star < 1 || r_sp < r_star) throw std::invalid_argument("example2: need r_sp >= r_star >= 1");
  if (!(kappa_sp > 1.0)) throw std::invalid_argument("example2: kappa_sp must be > 1");
  if (d2 == 0) d2 = d1;
  if (d1 < r_sp + r_star || d2 < r_sp + r_star)
    throw std::invalid_argument("example2: d1, d2 must be >= r_sp + r_star");
  const int k = r_star + r_sp;
  const Matrix left = orthonormal_frame(d1, k, seed, false);
  const Matrix right = orthonormal_frame(d2, k, seed + 1, false);
  const Matrix P = left.leftCols(r_star), Pp = left.rightCols(r_sp);
  const Matrix Q = right.leftCols(r_star), Qp = right.rightCols(r_sp);
  const Matrix G_unit = P * Q.transpose() / std::sqrt(2.0 * r_star) -
                        Pp * Qp.transpose() / std::sqrt(2.0 * r_sp);
  const double gamma = 1.0 - 1.0 / kappa_sp;
  MeasurementOperator op = MeasurementOperator::rank_one(G_unit, gamma, false);

  SpurGenSpec s;
  s.r_star = r_star;
  s.r_max = r_sp;
  s.r = r_sp;
  s.d = std::min(d1, d2);
  s.epsilon = 1.0 - gamma;
  s.c = std::sqrt(gamma / (2.0 * r_star));
  s.c_perp = std::sqrt(gamma / (2.0 * r_sp));
  s.lambda = 0.0;
  s.symmetric = false;
  s.seed = seed;
  CounterexampleInstance ce =
      assemble("example2", s, P, Pp, Q, Qp, std::sqrt(gamma) * G_unit, std::move(op));
  ce.kappa_sp = kappa_sp;
  return ce;
}

const ClauseResult& VerificationReport::clause(const std::string& id) const {
  for (const auto& c : clauses)
    if (c.id == id) return c;
  throw std::out_of_range("no verification clause " + id);
}

std::vector<std::string> VerificationReport::failed() const {
  std::vector<std::string> out;
  for (const auto& c : clauses)
    if (!c.passed) out.push_back(c.id);
  return out;
}

VerificationReport verify_instance(const CounterexampleInstance& ce, const VerifyTolerances& tols) {
  if (!ce.problem) throw std::invalid_argument("verify_instance: instance has no problem");
  const ProblemInstance& inst = ce.instance();
  const double lambda = inst.lambda();
  VerificationReport rep;

  // (i) ∇φ(M*) = −λ(P Qᵀ + P⊥ Q⊥ᵀ); in the symmetric case this is
  // ∇φ(M*) + λI = λ(I − P_Q − P_Q⊥).
  {
    const Matrix grad = phi_grad(inst, ce.M_star);
    const Matrix expected = -lambda * (ce.P * ce.Q.transpose() + ce.P_perp * ce.Q_perp.transpose());
    ClauseResult c{"i", "dual certificate identity", false, (grad - expected).norm(),
                   tols.identity_tol, ""};
    c.passed = c.value <= c.tolerance;
    rep.clauses.push_back(c);
  }
  // (ii)
  {
    rep.convex_certificate = certify_convex_global(inst, ce.M_star, tols.convex_tol);
    const auto& g = rep.convex_certificate;
    ClauseResult c{"ii", "M* is a convex global optimum", g.passes,
                   std::max({g.tangent_residual, g.orthogonal_excess,
                             lambda == 0.0 && !inst.symmetric() ? g.grad_norm : 0.0}),
                   tols.convex_tol, ""};
    rep.clauses.push_back(c);
  }
  // (iii)
  {
    const Vector xi = inst.b() - inst.op().forward(ce.M_star);
    const Matrix At = inst.op().adjoint(xi);
    const double opn = Eigen::BDCSVD<Matrix>(At).singularValues()(0);
    ClauseResult c{"iii", "noise operator norm equals lambda", false, std::abs(opn - lambda),
                   tols.noise_tol, "||A*(xi)||_op = " + fmt(opn)};
    c.passed = c.value <= c.tolerance;
    rep.clauses.push_back(c);
  }
  // (iv), (v)
  {
    CertifyTolerances ct;
    ct.grad_tol = tols.grad_tol;
    ct.eig_tol = tols.eig_tol;
    rep.certificate = certify_point(inst, ce.spurious_point, ct);
    const auto& cert = rep.certificate;
    ClauseResult g{"iv", "spurious point is first-order critical", cert.grad_norm <= tols.grad_tol,
                   cert.grad_norm, tols.grad_tol, ""};
    rep.clauses.push_back(g);

    ClauseResult h{"v", "Hessian matches the second-order condition", false, cert.hess_min_eig,
                   tols.eig_tol, "condition " + to_string(ce.condition)};
    switch (ce.condition) {
      case SpurCondition::Strict:
        h.passed = cert.hess_min_eig >= -tols.eig_tol;
        rep.minimality = "strict-local-minimum";
        break;
      case SpurCondition::Equality:
        h.passed = cert.hess_min_eig >= -tols.eig_tol;
        rep.minimality = "second-order-critical-minimality-undetermined";
        break;
      case SpurCondition::Violated:
        h.passed = cert.hess_min_eig < -tols.saddle_gap;
        h.tolerance = tols.saddle_gap;
        rep.minimality = "saddle";
        break;
    }
    rep.clauses.push_back(h);
  }
  // (vi)
  {
    const double err = (ce.spurious_point.product() - ce.M_star).norm();
    const double floor = std::sqrt(static_cast<double>(ce.spec.r_star));
    ClauseResult c{"vi", "spurious point is far from M*", err >= floor * (1.0 - 1e-12), err, floor,
                   ""};
    rep.clauses.push_back(c);
  }
  rep.all_passed = std::all_of(rep.clauses.begin(), rep.clauses.end(),
                               [](const ClauseResult& c) { return c.passed; });
  return rep;
}

}  // namespace nclasso
