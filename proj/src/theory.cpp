#include "nclasso/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nclasso {

namespace {

void check_ranks(int r, int r_star) {
  if (r_star < 1) throw std::invalid_argument("r_star must be >= 1");
  if (r < r_star) throw std::invalid_argument("r must be >= r_star");
}

double rho_of(int r, int r_star) {
  return std::sqrt(static_cast<double>(r) / static_cast<double>(r_star));
}

// Largest β with α² + ρ²β² ≤ 1 + (β−α)₊² (infinite when unbounded).
double beta_max(double alpha, double rho) {
  const double s = std::sqrt(std::max(0.0, 1.0 - alpha * alpha)) / rho;
  if (s <= alpha) return s;
  const double q = rho * rho - 1.0;
  if (q <= 0.0) return alpha > 0.0 ? 1.0 / (2.0 * alpha) : std::numeric_limits<double>::infinity();
  return (-alpha + std::sqrt(alpha * alpha + q)) / q;
}

}  // namespace

void TheoryParams::validate() const {
  check_ranks(r, r_star);
  if (!(L > 0.0)) throw std::invalid_argument("L must be > 0");
  if (!(mu >= 0.0 && mu <= L)) throw std::invalid_argument("mu must lie in [0, L]");
  if (!(L2 >= 0.0 && L2 <= L)) throw std::invalid_argument("L2 must lie in [0, L]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(noise_opnorm >= 0.0)) throw std::invalid_argument("noise_opnorm must be >= 0");
}

double delta_crit(int r, int r_star) {
  check_ranks(r, r_star);
  return 1.0 / (1.0 + std::sqrt(static_cast<double>(r_star) / static_cast<double>(r)));
}

double kappa_crit(int r, int r_star) {
  check_ranks(r, r_star);
  return 1.0 + 2.0 * rho_of(r, r_star);
}

MuEff mu_eff_closed(const TheoryParams& p) {
  p.validate();
  const double ratio = static_cast<double>(p.r_star) / static_cast<double>(p.r);
  const double sum = p.L + p.mu;
  MuEff out;
  out.value = 0.5 * (std::sqrt(sum * sum + ratio * p.L2 * p.L2) - std::sqrt(ratio) * p.L2 -
                     (p.L - p.mu));
  out.feasible = p.mu > mu_eff_zero(p.r, p.r_star, p.L, p.L2);
  return out;
}

double mu_eff_zero(int r, int r_star, double L, double L2) {
  check_ranks(r, r_star);
  if (!(L > 0.0)) throw std::invalid_argument("L must be > 0");
  return L2 / (2.0 * rho_of(r, r_star) + L2 / L);
}

bool mu_eff_feasible_point(const TheoryParams& p, double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0) return false;
  const double rho2 = static_cast<double>(p.r) / static_cast<double>(p.r_star);
  const double gap = std::max(0.0, beta - alpha);
  const double lhs = alpha * alpha + rho2 * beta * beta;
  const double rhs = 1.0 + gap * gap;
  return lhs <= rhs * (1.0 + 1e-14);
}

double mu_eff_inner(const TheoryParams& p, double alpha, double beta) {
  const double a = 0.5 * (p.L + p.mu);
  double F;
  if (p.L2 == 0.0 || alpha == 0.0) {
    F = a;
  } else if (p.L2 * beta >= a * alpha) {
    F = a * std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
  } else {
    F = std::sqrt(std::max(0.0, a * a - 2.0 * a * p.L2 * alpha * beta + p.L2 * p.L2 * beta * beta));
  }
  return F - 0.5 * (p.L - p.mu);
}

MuEffOracle mu_eff_oracle(const TheoryParams& p, int grid_n) {
  p.validate();
  if (grid_n < 100) throw std::invalid_argument("grid_n must be >= 100");
  const double rho = rho_of(p.r, p.r_star);
  MuEffOracle best;
  best.value = std::numeric_limits<double>::infinity();
  auto consider = [&](double alpha, double beta) {
    const double v = mu_eff_inner(p, alpha, beta);
    if (v < best.value) {
      best.value = v;
      best.alpha = alpha;
      best.beta = beta;
    }
  };
  const double h = 1.0 / (grid_n - 1);
  for (int i = 0; i < grid_n; ++i) {
    const double alpha = i * h;
    for (int j = 0; j < grid_n; ++j) {
      const double beta = j * h;
      if (!mu_eff_feasible_point(p, alpha, beta)) break;  // feasible β form an interval [0, β_max]
      consider(alpha, beta);
    }
    double bmax = beta_max(alpha, rho);
    if (std::isinf(bmax)) bmax = std::max(1.0, 0.5 * (p.L + p.mu) * alpha / std::max(p.L2, 1e-300));
    consider(alpha, bmax);
  }
  const double F = best.value + 0.5 * (p.L - p.mu);
  best.t1 = F > 0.0 ? 0.5 * (p.L + p.mu) / F : std::numeric_limits<double>::infinity();
  return best;
}

ErrorBound error_bound_thm3(const TheoryParams& p) {
  const MuEff me = mu_eff_closed(p);
  ErrorBound out;
  out.denominator = me.value;
  out.feasible = me.feasible && me.value > 0.0;
  if (!out.feasible) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const double excess = std::max(0.0, p.noise_opnorm - p.lambda);
  out.value = (6.0 * std::sqrt(static_cast<double>(p.r_star)) * p.lambda +
               std::sqrt(static_cast<double>(p.r + p.r_star)) * excess) /
              me.value;
  return out;
}

ErrorBound error_bound_thm2(int r, int r_star, double delta_k, double lambda, double noise_opnorm) {
  check_ranks(r, r_star);
  if (!(delta_k >= 0.0 && delta_k < 1.0)) throw std::invalid_argument("delta_k must lie in [0,1)");
  if (!(lambda >= 0.0) || !(noise_opnorm >= 0.0))
    throw std::invalid_argument("lambda and noise_opnorm must be >= 0");
  ErrorBound out;
  out.denominator = delta_crit(r, r_star) - delta_k;
  out.feasible = out.denominator > 0.0;
  if (!out.feasible) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  TheoryParams p;
  p.r = r;
  p.r_star = r_star;
  p.mu = 1.0 - delta_k;
  p.L = 1.0 + delta_k;
  p.L2 = 1.0 + delta_k;
  const double me = mu_eff_closed(p).value;
  out.chain_ok = me >= out.denominator - 1e-12;
  const double excess = std::max(0.0, noise_opnorm - lambda);
  out.value = (6.0 * std::sqrt(static_cast<double>(r_star)) * lambda +
               std::sqrt(static_cast<double>(r + r_star)) * excess) /
              out.denominator;
  return out;
}

Example1Bound example1_lower_bound(int r, int r_star, double lambda, double noise_opnorm) {
  check_ranks(r, r_star);
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (lambda > noise_opnorm) throw std::invalid_argument("lambda must not exceed noise_opnorm");
  Example1Bound out;
  if (noise_opnorm > 0.0) {
    const double shrink = std::max(0.0, 1.0 - lambda / noise_opnorm);
    out.exact = std::sqrt(r_star + shrink * shrink * r) * noise_opnorm;
  }
  out.lower_bound = (std::sqrt(static_cast<double>(r_star)) * lambda +
                     std::sqrt(static_cast<double>(r + r_star)) *
                         std::max(0.0, noise_opnorm - lambda)) /
                    std::sqrt(2.0);
  out.dominates = out.exact >= out.lower_bound * (1.0 - 1e-14);
  return out;
}

std::pair<double, double> rip_to_constants(double delta_k) {
  if (!(delta_k >= 0.0 && delta_k < 1.0)) throw std::invalid_argument("delta_k must lie in [0,1)");
  return {1.0 - delta_k, 1.0 + delta_k};
}

double constants_to_delta(double mu, double L) {
  if (!(L > 0.0) || !(mu >= 0.0 && mu <= L))
    throw std::invalid_argument("constants must satisfy 0 <= mu <= L, L > 0");
  return (L - mu) / (L + mu);
}

}  // namespace nclasso
