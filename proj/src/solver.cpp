#include "nclasso/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace nclasso {

std::string to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::GradientDescent: return "gd";
    case SolverMethod::TrustRegionNewtonCG: return "tr-newton-cg";
    case SolverMethod::ProxGradient: return "prox-grad";
  }
  return "unknown";
}

SolverMethod solver_method_from_string(const std::string& s) {
  if (s == "gd") return SolverMethod::GradientDescent;
  if (s == "tr-newton-cg") return SolverMethod::TrustRegionNewtonCG;
  if (s == "prox-grad") return SolverMethod::ProxGradient;
  throw std::invalid_argument("unknown solver method: " + s);
}

void SolverConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be > 0");
  if (!(tr_initial_radius > 0.0) || !(tr_max_radius >= tr_initial_radius))
    throw std::invalid_argument("trust-region radii must satisfy 0 < initial <= max");
  if (!(tr_eta >= 0.0 && tr_eta < 0.25)) throw std::invalid_argument("tr_eta must lie in [0, 0.25)");
  if (!(backtrack_shrink > 0.0 && backtrack_shrink < 1.0))
    throw std::invalid_argument("backtrack_shrink must lie in (0,1)");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
    throw std::invalid_argument("sufficient_decrease must lie in (0,1)");
  if (!(objective_rtol > 0.0)) throw std::invalid_argument("objective_rtol must be > 0");
  if (!(init_scale > 0.0)) throw std::invalid_argument("init_scale must be > 0");
  if (cg_max_iters < 0) throw std::invalid_argument("cg_max_iters must be >= 0");
}

FactorPoint random_factor_point(int d1, int d2, int r, bool symmetric, double init_scale,
                                std::uint64_t seed) {
  if (r < 1) throw std::invalid_argument("search rank must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = init_scale / std::sqrt(static_cast<double>(std::max(d1, d2)));
  auto draw = [&](int rows) {
    Matrix X(rows, r);
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < rows; ++i) X(i, j) = scale * normal(rng);
    return X;
  };
  if (symmetric) return FactorPoint::symmetric_point(draw(d1));
  Matrix U = draw(d1);
  Matrix V = draw(d2);
  return FactorPoint::asymmetric(std::move(U), std::move(V));
}

namespace {

void check_finite(double f, int iter) {
  if (!std::isfinite(f)) {
    std::ostringstream os;
    os << "non-finite objective encountered at iteration " << iter;
    throw std::runtime_error(os.str());
  }
}

// Largest τ ≥ 0 with ‖z + τd‖ = radius.
double boundary_step(const Vector& z, const Vector& d, double radius) {
  const double a = d.squaredNorm();
  const double b = 2.0 * z.dot(d);
  const double c = z.squaredNorm() - radius * radius;
  const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
  // Stable root of the two; c ≤ 0 so this one is nonnegative.
  return b >= 0.0 ? (-2.0 * c) / (b + disc) : (-b + disc) / (2.0 * a);
}

struct SteihaugResult {
  Vector p;
  Vector Hp;
  bool on_boundary = false;
  double gHg = 0.0;  // curvature along −g from the first CG step
};

// Steihaug-Toint truncated CG for min gᵀp + ½pᵀHp, ‖p‖ ≤ radius.
SteihaugResult steihaug(const HessianAt& H, const Vector& g, double radius, int max_iters) {
  SteihaugResult out;
  const Eigen::Index n = g.size();
  out.p = Vector::Zero(n);
  out.Hp = Vector::Zero(n);
  const double gnorm = g.norm();
  const double tol = std::min(0.5, std::sqrt(gnorm)) * gnorm;
  Vector r = g;
  Vector d = -g;
  double rr = r.squaredNorm();
  for (int j = 0; j < max_iters; ++j) {
    const Vector Bd = H.apply(d);
    const double dBd = d.dot(Bd);
    if (j == 0) out.gHg = dBd;
    if (dBd <= 0.0) {
      const double tau = boundary_step(out.p, d, radius);
      out.p += tau * d;
      out.Hp += tau * Bd;
      out.on_boundary = true;
      return out;
    }
    const double alpha = rr / dBd;
    const Vector p_next = out.p + alpha * d;
    if (p_next.norm() >= radius) {
      const double tau = boundary_step(out.p, d, radius);
      out.p += tau * d;
      out.Hp += tau * Bd;
      out.on_boundary = true;
      return out;
    }
    out.p = p_next;
    out.Hp += alpha * Bd;
    r += alpha * Bd;
    const double rr_next = r.squaredNorm();
    if (std::sqrt(rr_next) < tol) return out;
    d = -r + (rr_next / rr) * d;
    rr = rr_next;
  }
  return out;
}

double model_decrease(const Vector& g, const Vector& p, const Vector& Hp) {
  return -(g.dot(p) + 0.5 * p.dot(Hp));
}

SolveResult finish(const ProblemInstance& inst, FactorPoint P, double f, double gnorm, int iters,
                   bool converged, std::vector<TraceRow> trace, std::string message) {
  SolveResult res;
  res.M = P.product();
  res.point = std::move(P);
  res.objective = f;
  res.grad_norm = gnorm;
  res.iters = iters;
  res.converged = converged;
  res.trace = std::move(trace);
  res.message = std::move(message);
  (void)inst;
  return res;
}

SolveResult run_trust_region(const ProblemInstance& inst, FactorPoint P, const SolverConfig& cfg) {
  double f = f_value(inst, P);
  check_finite(f, 0);
  Vector g = flatten(f_grad(inst, P));
  const double target = cfg.grad_tol * std::max(1.0, g.norm());
  const int cg_iters = cfg.cg_max_iters > 0 ? cfg.cg_max_iters : std::max(1, 2 * P.dim());
  double radius = cfg.tr_initial_radius;
  std::vector<TraceRow> trace;
  if (cfg.record_trace) trace.push_back({0, f, g.norm(), radius, 0.0, 0.0, true});
  int iter = 0;
  std::string message = "max_iters reached";
  bool converged = g.norm() <= target;
  while (!converged && iter < cfg.max_iters) {
    ++iter;
    const HessianAt H(inst, P);
    SteihaugResult step = steihaug(H, g, radius, cg_iters);
    double pred = model_decrease(g, step.p, step.Hp);

    // Cauchy point; the step falls back to it if CG roundoff left less decrease.
    const double gnorm = g.norm();
    const double tau = step.gHg <= 0.0
                           ? 1.0
                           : std::min(1.0, gnorm * gnorm * gnorm / (radius * step.gHg));
    const double cauchy = tau * radius * gnorm - 0.5 * tau * tau * radius * radius * step.gHg /
                                                     (gnorm * gnorm);
    if (pred < cauchy) {
      step.p = -(tau * radius / gnorm) * g;
      step.Hp = H.apply(step.p);
      step.on_boundary = tau >= 1.0;
      pred = model_decrease(g, step.p, step.Hp);
    }

    const FactorPoint trial = P.axpy(1.0, unflatten(step.p, P));
    const double f_trial = f_value(inst, trial);
    check_finite(f_trial, iter);
    const double actual = f - f_trial;
    double rho;
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
    const bool flat = std::abs(actual) <= noise && std::abs(pred) <= noise;
    Vector g_trial;
    if (flat) {
      // f is flat to roundoff here; judge the step by the gradient instead
      g_trial = flatten(f_grad(inst, trial));
      rho = g_trial.norm() < gnorm ? 1.0 : 0.0;
    } else {
      rho = pred > 0.0 ? actual / pred : -1.0;
    }

    const double step_norm = step.p.norm();
    if (rho < 0.25) {
      radius = 0.25 * std::min(radius, std::max(step_norm, 1e-300));
    } else if (rho > 0.75 && step.on_boundary) {
      radius = std::min(2.0 * radius, cfg.tr_max_radius);
    }
    const bool accept = rho > cfg.tr_eta && (flat || f_trial <= f);
    if (accept) {
      P = trial;
      f = f_trial;
      g = flat ? std::move(g_trial) : flatten(f_grad(inst, P));
    }
    if (cfg.record_trace) trace.push_back({iter, f, g.norm(), radius, pred, cauchy, accept});
    if (g.norm() <= target) {
      converged = true;
      message = "gradient tolerance reached";
      break;
    }
    if (radius < 1e-14 * std::max(1.0, P.norm())) {
      message = "trust region collapsed";
      break;
    }
  }
  if (converged && iter == 0) message = "gradient tolerance reached";
  return finish(inst, std::move(P), f, g.norm(), iter, converged, std::move(trace), message);
}

SolveResult run_gradient_descent(const ProblemInstance& inst, FactorPoint P,
                                 const SolverConfig& cfg) {
  double f = f_value(inst, P);
  check_finite(f, 0);
  FactorPoint G = f_grad(inst, P);
  const double target = cfg.grad_tol * std::max(1.0, G.norm());
  double step = 1.0;
  std::vector<TraceRow> trace;
  if (cfg.record_trace) trace.push_back({0, f, G.norm(), 0.0, 0.0, 0.0, true});
  int iter = 0;
  bool converged = G.norm() <= target;
  std::string message = converged ? "gradient tolerance reached" : "max_iters reached";
  while (!converged && iter < cfg.max_iters) {
    ++iter;
    const double g2 = G.squared_norm();
    step = std::min(1e6, 2.0 * step);
    FactorPoint trial = P.axpy(-step, G);
    double f_trial = f_value(inst, trial);
    while (!(f_trial <= f - cfg.sufficient_decrease * step * g2) && step > 1e-20) {
      step *= cfg.backtrack_shrink;
      trial = P.axpy(-step, G);
      f_trial = f_value(inst, trial);
    }
    if (!(f_trial <= f - cfg.sufficient_decrease * step * g2)) {
      message = "line search failed";
      break;
    }
    check_finite(f_trial, iter);
    P = std::move(trial);
    f = f_trial;
    G = f_grad(inst, P);
    if (cfg.record_trace) trace.push_back({iter, f, G.norm(), step, 0.0, 0.0, true});
    if (G.norm() <= target) {
      converged = true;
      message = "gradient tolerance reached";
    }
  }
  const double gnorm = G.norm();
  return finish(inst, std::move(P), f, gnorm, iter, converged, std::move(trace), message);
}

}  // namespace

SolveResult solve_factored_from(const ProblemInstance& inst, const FactorPoint& start,
                                const SolverConfig& config) {
  config.validate();
  if (start.symmetric != inst.symmetric())
    throw std::invalid_argument("starting point mode does not match instance");
  switch (config.method) {
    case SolverMethod::TrustRegionNewtonCG: {
      SolveResult res = run_trust_region(inst, start, config);
      res.seed = config.seed;
      return res;
    }
    case SolverMethod::GradientDescent: {
      SolveResult res = run_gradient_descent(inst, start, config);
      res.seed = config.seed;
      return res;
    }
    case SolverMethod::ProxGradient:
      throw std::invalid_argument("prox-grad solves the convex problem; use solve_convex_prox");
  }
  throw std::logic_error("unreachable");
}

SolveResult solve_factored(const ProblemInstance& inst, int r, const SolverConfig& config) {
  config.validate();
  const FactorPoint start = random_factor_point(inst.d1(), inst.d2(), r, inst.symmetric(),
                                                config.init_scale, config.seed);
  return solve_factored_from(inst, start, config);
}

SolveResult solve_convex_prox(const ProblemInstance& inst, const SolverConfig& config,
                              const std::optional<Matrix>& start) {
  config.validate();
  const double lambda = inst.lambda();
  auto prox = [&](const Matrix& X, double s) {
    return inst.symmetric() ? psd_soft_threshold(X, s * lambda) : svd_soft_threshold(X, s * lambda);
  };
  auto penalty = [&](const Matrix& X) { return lambda * nuclear_norm(X); };

  Matrix M = start ? *start : Matrix::Zero(inst.d1(), inst.d2());
  if (inst.symmetric()) M = psd_soft_threshold(M, 0.0);
  double phi = phi_value(inst, M);
  double F = phi + penalty(M);
  check_finite(F, 0);
  double s = 1.0 / std::max(1e-12, 1.01 * normal_norm_estimate(inst.op(), 50));

  std::vector<TraceRow> trace;
  if (config.record_trace) trace.push_back({0, F, 0.0, s, 0.0, 0.0, true});
  int iter = 0;
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  std::string message = "max_iters reached";
  while (iter < config.max_iters) {
    ++iter;
    const Matrix G = phi_grad(inst, M);
    Matrix M_next;
    double phi_next = 0.0;
    for (;;) {
      M_next = prox(M - s * G, s);
      phi_next = phi_value(inst, M_next);
      const Matrix D = M_next - M;
      if (phi_next <= phi + G.cwiseProduct(D).sum() + D.squaredNorm() / (2.0 * s) +
                          1e-15 * std::max(1.0, std::abs(phi)) ||
          s < 1e-20)
        break;
      s *= config.backtrack_shrink;
    }
    const double F_next = phi_next + penalty(M_next);
    check_finite(F_next, iter);
    const double step_norm = (M_next - M).norm();
    residual = step_norm / s;
    const double decrease = F - F_next;
    M = std::move(M_next);
    phi = phi_next;
    F = F_next;
    if (config.record_trace) trace.push_back({iter, F, residual, s, 0.0, 0.0, true});
    if (decrease < config.objective_rtol * std::max(1.0, std::abs(F)) &&
        step_norm <= config.grad_tol * (1.0 + M.norm())) {
      converged = true;
      message = "objective and fixed-point tolerance reached";
      break;
    }
  }
  SolveResult res;
  res.M = M;
  res.objective = F;
  res.grad_norm = residual;
  res.iters = iter;
  res.converged = converged;
  res.seed = config.seed;
  res.trace = std::move(trace);
  res.message = message;
  return res;
}

namespace {

MultistartReport aggregate(const ProblemInstance& inst, std::vector<SolveResult> runs,
                           double tol) {
  MultistartReport rep;
  rep.runs = std::move(runs);
  if (rep.runs.empty()) return rep;
  std::vector<double> objs;
  for (const auto& run : rep.runs) objs.push_back(run.objective);
  rep.best_objective = *std::min_element(objs.begin(), objs.end());
  int at_best = 0;
  for (double o : objs)
    if (o - rep.best_objective <= tol * std::max(1.0, std::abs(rep.best_objective))) ++at_best;
  rep.fraction_at_best = static_cast<double>(at_best) / static_cast<double>(objs.size());
  std::sort(objs.begin(), objs.end());
  for (double o : objs) {
    if (!rep.cluster_values.empty() &&
        o - rep.cluster_values.back() <= tol * std::max(1.0, std::abs(rep.cluster_values.back()))) {
      ++rep.cluster_sizes.back();
    } else {
      rep.cluster_values.push_back(o);
      rep.cluster_sizes.push_back(1);
    }
  }
  if (inst.truth()) {
    for (const auto& run : rep.runs) rep.errors.push_back((run.M - inst.truth()->M_star).norm());
  }
  return rep;
}

template <typename Job>
std::vector<SolveResult> run_pool(int count, Job job) {
  std::vector<SolveResult> results(count);
  const int workers =
      std::max(1, std::min<int>(count, static_cast<int>(std::thread::hardware_concurrency())));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) results[i] = job(i);
    return results;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) {
        try {
          results[i] = job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace

MultistartReport multistart(const ProblemInstance& inst, int r, const SolverConfig& config,
                            int n_starts, double cluster_tol) {
  if (n_starts < 1) throw std::invalid_argument("n_starts must be >= 1");
  config.validate();
  auto runs = run_pool(n_starts, [&](int i) {
    SolverConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(i);
    return solve_factored(inst, r, c);
  });
  return aggregate(inst, std::move(runs), cluster_tol);
}

MultistartReport multistart_from(const ProblemInstance& inst, const std::vector<FactorPoint>& starts,
                                 const SolverConfig& config, double cluster_tol) {
  if (starts.empty()) throw std::invalid_argument("multistart_from: no starting points");
  config.validate();
  auto runs = run_pool(static_cast<int>(starts.size()), [&](int i) {
    SolverConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(i);
    return solve_factored_from(inst, starts[i], c);
  });
  return aggregate(inst, std::move(runs), cluster_tol);
}

}  // namespace nclasso
