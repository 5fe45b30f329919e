#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "nclasso/certify.hpp"
#include "nclasso/counterexamples.hpp"
#include "nclasso/io.hpp"
#include "nclasso/solver.hpp"
#include "nclasso/sweep.hpp"
#include "nclasso/theory.hpp"

namespace nclasso::cli {

namespace {

json load(const std::string& path) {
  try {
    return read_json_file(path);
  } catch (const std::exception& e) {
    throw UsageError("cannot read JSON from " + path + ": " + e.what());
  }
}

void save(const std::string& path, const json& j) {
  if (path.empty()) return;
  try {
    write_json_file(path, j);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  return out;
}

// Accepts a bare instance or any report that embeds one.
const json& find_instance(const json& j) {
  if (j.contains("operator")) return j;
  for (const char* key : {"instance", "counterexample"})
    if (j.contains(key) && j.at(key).is_object()) return find_instance(j.at(key));
  throw UsageError("no problem instance in the given JSON");
}

const json& find_point(const json& j) {
  if (j.contains("U")) return j;
  if (j.contains("result") && j.at("result").contains("point")) return j.at("result").at("point");
  if (j.contains("spurious_point")) return j.at("spurious_point");
  if (j.contains("counterexample")) return find_point(j.at("counterexample"));
  throw UsageError("no factor point in the given JSON");
}

EigMethod eig_method_from_string(const std::string& s) {
  if (s == "auto") return EigMethod::Auto;
  if (s == "dense") return EigMethod::Dense;
  if (s == "lanczos") return EigMethod::Lanczos;
  throw UsageError("unknown eigensolver " + s);
}

std::string g(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

void print_certificate(const CriticalityCertificate& c) {
  std::printf("  grad norm       %s (tol %s)\n", g(c.grad_norm).c_str(), g(c.grad_tol).c_str());
  std::printf("  hess min eig    %s (tol %s, %s)\n", g(c.hess_min_eig).c_str(), g(c.eig_tol).c_str(),
              to_string(c.method).c_str());
  std::printf("  verdict         %s\n", to_string(c.verdict).c_str());
}

// ---------------------------------------------------------------- solve

struct SolveOpts {
  std::string instance;
  int r = 0;
  std::string method = "tr-newton-cg";
  int max_iters = 1000;
  double grad_tol = 1e-9;
  double tr_radius = 1.0;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
  int starts = 1;
  bool no_certify = false;
  std::string out, trace;
  SweepConfig synth;
  int trial = 0;
  CLI::Option* seed_opt = nullptr;
};

int run_solve(const SolveOpts& o) {
  json config = {{"r", o.r}, {"method", o.method}, {"starts", o.starts}};
  SolverConfig cfg;
  cfg.method = solver_method_from_string(o.method);
  cfg.max_iters = o.max_iters;
  cfg.grad_tol = o.grad_tol;
  cfg.tr_initial_radius = o.tr_radius;
  cfg.init_scale = o.init_scale;
  cfg.record_trace = !o.trace.empty();

  std::optional<ProblemInstance> inst;
  if (!o.instance.empty()) {
    inst.emplace(instance_from_json(find_instance(load(o.instance))));
    config["instance"] = o.instance;
    cfg.seed = o.seed;
  } else {
    o.synth.validate();
    const std::uint64_t ts = trial_seed(o.synth.seed, o.trial);
    inst.emplace(sweep_instance(o.synth, ts));
    config["synthetic"] = {{"d1", o.synth.d1},
                           {"d2", o.synth.d2},
                           {"r_star", o.synth.r_star},
                           {"n", o.synth.resolved_n()},
                           {"lambda", o.synth.lambda},
                           {"singular_values", o.synth.resolved_singular_values()},
                           {"sweep_seed", o.synth.seed},
                           {"trial", o.trial},
                           {"trial_seed", ts}};
    cfg.seed = o.seed_opt->count() > 0 ? o.seed : sweep_init_seed(ts, o.r);
  }
  cfg.validate();
  const bool factored = cfg.method != SolverMethod::ProxGradient;
  if (factored && o.r < 1) throw UsageError("--r is required for factored solvers");
  if (o.starts < 1) throw UsageError("--starts must be >= 1");

  json out = {{"schema", kSchemaVersion}, {"command", "solve"}, {"config", config},
              {"solver", to_json(cfg)}, {"instance", instance_to_json(*inst)}};
  SolveResult res;
  if (!factored) {
    res = solve_convex_prox(*inst, cfg);
    out["M"] = matrix_to_json(res.M);
  } else if (o.starts == 1) {
    res = solve_factored(*inst, o.r, cfg);
  } else {
    const MultistartReport ms = multistart(*inst, o.r, cfg, o.starts);
    std::size_t best = 0;
    for (std::size_t i = 1; i < ms.runs.size(); ++i)
      if (ms.runs[i].objective < ms.runs[best].objective) best = i;
    res = ms.runs[best];
    json runs = json::array();
    for (const auto& run : ms.runs) runs.push_back(to_json(run, false));
    out["multistart"] = {{"runs", runs},
                         {"errors", ms.errors},
                         {"best_objective", ms.best_objective},
                         {"fraction_at_best", ms.fraction_at_best},
                         {"cluster_values", ms.cluster_values},
                         {"cluster_sizes", ms.cluster_sizes}};
  }
  out["result"] = to_json(res);

  std::printf("solve: %s", o.method.c_str());
  if (factored) std::printf(" at rank %d", o.r);
  std::printf("\n  iterations      %d (%s)\n", res.iters, res.converged ? "converged" : "not converged");
  std::printf("  objective       %s\n  grad norm       %s\n", g(res.objective).c_str(),
              g(res.grad_norm).c_str());
  if (inst->truth()) {
    const TruthError te = error_vs_truth(res.M, inst->truth()->M_star);
    out["error_vs_truth"] = {{"frob_error", te.frob_error}, {"relative_error", te.relative_error}};
    std::printf("  ||M - M*||_F    %s\n", g(te.frob_error).c_str());
  }
  if (factored && !o.no_certify) {
    const CriticalityCertificate cert = certify_point(*inst, *res.point);
    out["certificate"] = to_json(cert);
    print_certificate(cert);
  }
  if (!o.trace.empty()) {
    auto f = open_out(o.trace);
    write_trace_csv(f, res.trace);
  }
  save(o.out, out);
  return kOk;
}

// ---------------------------------------------------------------- certify

struct CertifyOpts {
  std::string instance, point;
  double grad_tol = 0.0, eig_tol = 0.0;
  CLI::Option* grad_opt = nullptr;
  CLI::Option* eig_opt = nullptr;
  std::string method = "auto";
  int dense_limit = 2000;
  bool convex = false;
  double convex_tol = 1e-8;
  bool richard = false;
  std::string out;
};

int run_certify(const CertifyOpts& o) {
  const json ij = load(o.instance);
  const ProblemInstance inst = instance_from_json(find_instance(ij));
  const FactorPoint P = point_from_json(find_point(o.point.empty() ? ij : load(o.point)));
  CertifyTolerances tols;
  if (o.grad_opt->count()) tols.grad_tol = o.grad_tol;
  if (o.eig_opt->count()) tols.eig_tol = o.eig_tol;
  tols.method = eig_method_from_string(o.method);
  tols.dense_limit = o.dense_limit;

  json out = {{"schema", kSchemaVersion},
              {"command", "certify"},
              {"config", {{"instance", o.instance}, {"point", o.point.empty() ? o.instance : o.point},
                          {"method", o.method}, {"dense_limit", o.dense_limit},
                          {"convex", o.convex}, {"convex_tol", o.convex_tol}, {"richard", o.richard}}}};
  bool ok = true;
  std::printf("certify: rank %d point, %s mode\n", P.rank(), P.symmetric ? "symmetric" : "asymmetric");
  try {
    const CriticalityCertificate cert = certify_point(inst, P, tols);
    out["certificate"] = to_json(cert);
    print_certificate(cert);
    ok = cert.verdict == Verdict::SecondOrderCritical;
  } catch (const IndeterminateError& e) {
    out["certificate"] = nullptr;
    out["indeterminate"] = e.what();
    std::printf("  indeterminate: %s\n", e.what());
    ok = false;
  }
  if (o.convex) {
    const GlobalOptCertificate c = certify_convex_global(inst, P.product(), o.convex_tol);
    out["convex_certificate"] = to_json(c);
    std::printf("  convex global   %s (tangent %s, orthogonal excess %s)\n",
                c.passes ? "passes" : "fails", g(c.tangent_residual).c_str(),
                g(c.orthogonal_excess).c_str());
    ok = ok && c.passes;
  }
  if (o.richard) {
    if (!inst.truth()) throw UsageError("--richard needs an instance with ground truth");
    const RichardDiagnostics d = richard_diagnostics(P, inst.truth()->M_star);
    out["richard"] = to_json(d);
    std::printf("  alpha, beta     %s, %s (%s)\n", g(d.alpha).c_str(), g(d.beta).c_str(),
                d.holds ? "holds" : "violated");
    ok = ok && d.holds;
  }
  if (inst.truth()) {
    const TruthError te = error_vs_truth(P, inst.truth()->M_star);
    out["error_vs_truth"] = {{"frob_error", te.frob_error}, {"relative_error", te.relative_error}};
  }
  out["passed"] = ok;
  save(o.out, out);
  return ok ? kOk : kVerificationFailed;
}

// ---------------------------------------------------------------- counterexample

struct CounterexampleOpts {
  std::string family, mode = "sym";
  CLI::Option* mode_opt = nullptr;
  int r = 0, r_star = 1, d = 0, r_max = 0, r1 = 0, r_sp = 0, d1 = 0, d2 = 0;
  double mu = 0.0, lambda = 0.0, epsilon = 0.0, c_perp = 0.0, kappa = 0.0;
  std::uint64_t seed = 0;
  bool coordinate_basis = false;
  std::string out;
  CLI::App* app = nullptr;
};

bool given(const CLI::App* app, const std::string& name) { return app->get_option(name)->count() > 0; }

void require(const CounterexampleOpts& o, std::initializer_list<const char*> names) {
  for (const char* n : names)
    if (!given(o.app, n)) throw UsageError(std::string(n) + " is required for --family " + o.family);
}

int run_counterexample(const CounterexampleOpts& o) {
  const bool sym = o.mode == "sym";
  CounterexampleInstance ce;
  json config = {{"family", o.family}, {"mode", o.mode}, {"seed", o.seed}};
  if (o.family == "thm5") {
    require(o, {"--r", "--mu"});
    ce = build_thm5(o.r, o.r_star, o.d, o.mu, o.lambda, sym, o.seed);
    config.update({{"r", o.r}, {"r_star", o.r_star}, {"d", ce.spec.d}, {"mu", o.mu},
                   {"lambda", o.lambda}, {"threshold", thm5_threshold(o.r, o.r_star)}});
  } else if (o.family == "thm6") {
    require(o, {"--r1", "--mu"});
    ce = build_thm6(o.r1, o.r_star, o.mu, o.lambda, sym, o.seed);
    config.update({{"r1", o.r1}, {"r_star", o.r_star}, {"mu", o.mu}, {"lambda", o.lambda},
                   {"r2", ce.spec.r_max}});
  } else if (o.family == "example2") {
    require(o, {"--r-sp", "--kappa"});
    if (o.mode_opt->count() && sym) throw UsageError("example2 is asymmetric only");
    const int d1 = o.d1 > 0 ? o.d1 : o.r_sp + o.r_star + 1;
    ce = build_example2(o.r_sp, o.r_star, d1, o.d2, o.kappa, o.seed);
    config.update({{"r_sp", o.r_sp}, {"r_star", o.r_star}, {"d1", d1},
                   {"d2", ce.M_star.cols()}, {"kappa_sp", o.kappa},
                   {"kappa_crit", kappa_crit(o.r_sp, o.r_star)}});
  } else {
    require(o, {"--r-max", "--epsilon", "--c-perp"});
    SpurGenSpec s;
    s.r_star = o.r_star;
    s.r_max = o.r_max;
    s.r = o.r > 0 ? o.r : o.r_max;
    s.d = o.d > 0 ? o.d : o.r_star + o.r_max;
    s.epsilon = o.epsilon;
    s.c_perp = o.c_perp;
    const double c2 = (1.0 - o.epsilon - o.c_perp * o.c_perp * o.r_max) / o.r_star;
    if (!(c2 > 0.0)) throw UsageError("spur-gen: 1 - epsilon - c_perp^2 r_max must be positive");
    s.c = std::sqrt(c2);
    s.lambda = o.lambda;
    s.symmetric = sym;
    s.seed = o.seed;
    s.coordinate_basis = o.coordinate_basis;
    ce = build_spur_gen(s);
    config["spec"] = to_json(s);
  }
  const VerificationReport rep = verify_instance(ce);

  std::printf("counterexample: %s (%s), r* = %d, search rank %d, d = %d\n", ce.family.c_str(),
              sym && ce.family != "example2" ? "symmetric" : "asymmetric", ce.spec.r_star,
              ce.spec.r, static_cast<int>(ce.M_star.rows()));
  std::printf("  second-order condition: %s (margin %s)\n", to_string(ce.condition).c_str(),
              g(ce.spur_cond_margin).c_str());
  for (const auto& c : rep.clauses)
    std::printf("  (%s) %-45s %s  value %s  tol %s\n", c.id.c_str(), c.name.c_str(),
                c.passed ? "PASS" : "FAIL", g(c.value).c_str(), g(c.tolerance).c_str());
  std::printf("  point: %s\n", rep.minimality.c_str());
  std::printf("  %s\n", rep.all_passed ? "all clauses passed" : "verification FAILED");

  save(o.out, {{"schema", kSchemaVersion},
               {"command", "counterexample"},
               {"config", config},
               {"counterexample", to_json(ce)},
               {"report", to_json(rep)}});
  return rep.all_passed ? kOk : kVerificationFailed;
}

// ---------------------------------------------------------------- theory

struct TheoryOpts {
  TheoryParams p;
  CLI::Option* mu_opt = nullptr;
  CLI::Option* l2_opt = nullptr;
  CLI::Option* delta_opt = nullptr;
  double delta_k = 0.0;
  int grid = 2000;
  std::string out;
};

int run_theory(TheoryOpts o) {
  TheoryParams& p = o.p;
  if (o.l2_opt->count() == 0) p.L2 = p.L;
  const double dc = delta_crit(p.r, p.r_star);
  const double kc = kappa_crit(p.r, p.r_star);
  json out = {{"schema", kSchemaVersion}, {"command", "theory"}, {"delta_crit", dc}, {"kappa_crit", kc}};
  std::printf("theory: r = %d, r* = %d\n", p.r, p.r_star);
  std::printf("  delta_crit          %s\n  kappa_crit          %s\n", g(dc).c_str(), g(kc).c_str());
  if (o.mu_opt->count()) {
    p.validate();
    out["params"] = to_json(p);
    const MuEff me = mu_eff_closed(p);
    std::printf("  mu_eff (closed)     %s\n", g(me.value).c_str());
    json je = {{"closed", me.value}, {"feasible", me.feasible},
               {"zero_at_mu", mu_eff_zero(p.r, p.r_star, p.L, p.L2)}};
    if (o.grid > 0) {
      const MuEffOracle orc = mu_eff_oracle(p, o.grid);
      je["oracle"] = {{"value", orc.value}, {"alpha", orc.alpha}, {"beta", orc.beta},
                      {"t1", finite_or_null(orc.t1)}, {"grid_n", o.grid}};
      std::printf("  mu_eff (oracle)     %s (grid %d)\n", g(orc.value).c_str(), o.grid);
    }
    std::printf("  mu_eff > 0          %s (threshold mu = %s)\n", me.feasible ? "yes" : "no",
                g(mu_eff_zero(p.r, p.r_star, p.L, p.L2)).c_str());
    out["mu_eff"] = je;
    const ErrorBound b3 = error_bound_thm3(p);
    out["thm3_bound"] = {{"value", finite_or_null(b3.value)}, {"feasible", b3.feasible},
                         {"denominator", b3.denominator}};
    std::printf("  thm3 error bound    %s\n", b3.feasible ? g(b3.value).c_str() : "infeasible");
    out["delta_from_constants"] = constants_to_delta(p.mu, p.L);
  }
  if (o.delta_opt->count()) {
    const ErrorBound b2 = error_bound_thm2(p.r, p.r_star, o.delta_k, p.lambda, p.noise_opnorm);
    const auto [mu, L] = rip_to_constants(o.delta_k);
    out["thm2_bound"] = {{"delta_k", o.delta_k}, {"value", finite_or_null(b2.value)},
                         {"feasible", b2.feasible}, {"denominator", b2.denominator},
                         {"chain_ok", b2.chain_ok}, {"mu", mu}, {"L", L}};
    std::printf("  thm2 error bound    %s (delta_k = %s)\n",
                b2.feasible ? g(b2.value).c_str() : "infeasible", g(o.delta_k).c_str());
  }
  save(o.out, out);
  return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepOpts {
  SweepConfig c;
  std::string method = "tr-newton-cg";
  std::string from_csv, out;
  bool progress = false;
  CLI::App* app = nullptr;
};

int run_sweep_cmd(SweepOpts o) {
  SweepConfig c = o.c;
  if (!o.from_csv.empty()) {
    for (const CLI::Option* opt : o.app->get_options()) {
      const std::string n = opt->get_name();
      if (opt->count() > 0 && n != "--from-csv" && n != "--out" && n != "--workers" &&
          n != "--progress" && n != "--help")
        throw UsageError(n + " cannot be combined with --from-csv");
    }
    std::ifstream in(o.from_csv);
    if (!in) throw UsageError("cannot read " + o.from_csv);
    const int workers = c.workers;
    c = sweep_config_from_header(in);
    if (o.app->get_option("--workers")->count()) c.workers = workers;
  } else {
    c.solver.method = solver_method_from_string(o.method);
  }
  c.validate();
  auto file = open_out(o.out);
  std::fprintf(stderr, "sweep: %zu ranks x %d trials, n = %d\n", c.r_values.size(), c.n_trials,
               c.resolved_n());
  const auto rows = run_sweep(c, [&](const SweepRow& row) {
    if (o.progress)
      std::fprintf(stderr, "  r=%d trial=%d error=%s certified=%s%s\n", row.r, row.trial,
                   g(row.final_error).c_str(), row.certified ? "yes" : "no",
                   row.error.empty() ? "" : (" failed: " + row.error).c_str());
  });
  write_sweep_csv(file, c, rows);
  std::printf("%6s %14s %14s %10s\n", "r", "mean error", "median error", "certified");
  for (const auto& s : summarize(rows))
    std::printf("%6d %14.6g %14.6g %10.2f\n", s.r, s.mean_error, s.median_error, s.certified_fraction);
  return kOk;
}

// ---------------------------------------------------------------- threshold

struct ThresholdOpts {
  int r_sp = 1, r_star = 1, d = 0, points = 21;
  double kappa_lo = 0.0, kappa_hi = 0.0, eig_tol = 1e-8, grad_tol = 1e-10;
  std::uint64_t seed = 0;
  std::string out;
};

int run_threshold(const ThresholdOpts& o) {
  const double kc = kappa_crit(o.r_sp, o.r_star);
  const int d = o.d > 0 ? o.d : o.r_sp + o.r_star + 1;
  const double lo = o.kappa_lo > 0.0 ? o.kappa_lo : 0.9 * kc;
  const double hi = o.kappa_hi > 0.0 ? o.kappa_hi : 1.1 * kc;
  const auto rows = run_threshold_sweep(o.r_sp, o.r_star, d, lo, hi, o.points, o.seed);
  bool ok = true;
  std::printf("threshold: r_sp = %d, r* = %d, d = %d, kappa_crit = %s\n", o.r_sp, o.r_star, d,
              g(kc).c_str());
  std::printf("%14s %16s %12s\n", "kappa_sp", "hess_min_eig", "expected");
  for (const auto& r : rows) {
    const char* expect = "boundary";
    bool row_ok = r.grad_norm <= o.grad_tol;
    if (r.kappa_sp < kc * (1 - 1e-9)) {
      expect = "indefinite";
      row_ok = row_ok && r.hess_min_eig < -o.eig_tol;
    } else if (r.kappa_sp > kc * (1 + 1e-9)) {
      expect = "psd";
      row_ok = row_ok && r.hess_min_eig >= -o.eig_tol;
    }
    ok = ok && row_ok;
    std::printf("%14.6g %16.6g %12s%s\n", r.kappa_sp, r.hess_min_eig, expect, row_ok ? "" : "  MISMATCH");
  }
  if (!o.out.empty()) {
    auto f = open_out(o.out);
    std::ostringstream hdr;
    hdr.precision(17);
    hdr << "nclasso threshold, schema 1\nfamily = example2\nr_sp = " << o.r_sp
        << "\nr_star = " << o.r_star << "\nd = " << d << "\nkappa_lo = " << lo
        << "\nkappa_hi = " << hi << "\npoints = " << o.points << "\nseed = " << o.seed;
    write_threshold_csv(f, rows, hdr.str());
  }
  std::printf("  %s\n", ok ? "sign change matches kappa_crit" : "threshold check FAILED");
  return ok ? kOk : kVerificationFailed;
}

}  // namespace

std::function<int()> register_commands(CLI::App& app) {
  // solve
  auto so = std::make_shared<SolveOpts>();
  auto* solve = app.add_subcommand("solve", "Local solve of the factored (or convex) problem");
  auto* inst_opt = solve->add_option("--instance", so->instance, "Instance JSON (or any report embedding one)");
  solve->add_option("--r", so->r, "Search rank");
  solve->add_option("--method", so->method, "gd, tr-newton-cg or prox-grad")
      ->check(CLI::IsMember({"gd", "tr-newton-cg", "prox-grad"}));
  solve->add_option("--max-iters", so->max_iters);
  solve->add_option("--grad-tol", so->grad_tol);
  solve->add_option("--tr-radius", so->tr_radius, "Initial trust-region radius");
  solve->add_option("--init-scale", so->init_scale);
  so->seed_opt = solve->add_option("--seed", so->seed, "Initialization seed");
  solve->add_option("--starts", so->starts, "Number of random starts");
  solve->add_flag("--no-certify", so->no_certify);
  solve->add_option("--out", so->out, "Result JSON");
  solve->add_option("--trace", so->trace, "Iteration trace CSV");
  std::vector<CLI::Option*> synth = {
      solve->add_option("--d1", so->synth.d1, "Synthetic Gaussian instance rows"),
      solve->add_option("--d2", so->synth.d2),
      solve->add_option("--r-star", so->synth.r_star),
      solve->add_option("--n", so->synth.n, "Measurements (0: 2.35 r*(d1+d2) rounded up)"),
      solve->add_option("--lambda", so->synth.lambda),
      solve->add_option("--singular-values", so->synth.singular_values)->delimiter(','),
      solve->add_option("--sweep-seed", so->synth.seed, "Seed of the sweep whose trial to rebuild"),
      solve->add_option("--trial", so->trial)};
  for (auto* opt : synth) inst_opt->excludes(opt);

  // certify
  auto co = std::make_shared<CertifyOpts>();
  auto* certify = app.add_subcommand("certify", "Certify a factor point");
  certify->add_option("--instance", co->instance, "Instance JSON (or any report embedding one)")->required();
  certify->add_option("--point", co->point, "Point JSON (default: taken from --instance)");
  co->grad_opt = certify->add_option("--grad-tol", co->grad_tol);
  co->eig_opt = certify->add_option("--eig-tol", co->eig_tol);
  certify->add_option("--eig-method", co->method)->check(CLI::IsMember({"auto", "dense", "lanczos"}));
  certify->add_option("--dense-limit", co->dense_limit);
  certify->add_flag("--convex", co->convex, "Also test global optimality of UV^T for the convex problem");
  certify->add_option("--convex-tol", co->convex_tol);
  certify->add_flag("--richard", co->richard, "Report alpha/beta against the ground truth");
  certify->add_option("--out", co->out);

  // counterexample
  auto xo = std::make_shared<CounterexampleOpts>();
  auto* cx = app.add_subcommand("counterexample", "Build and verify a spurious-minimum instance");
  xo->app = cx;
  cx->add_option("--family", xo->family)->required()->check(
      CLI::IsMember({"example2", "thm5", "thm6", "spur-gen"}));
  xo->mode_opt = cx->add_option("--mode", xo->mode)->check(CLI::IsMember({"sym", "asym"}));
  cx->add_option("--r", xo->r, "Search rank (thm5, spur-gen)");
  cx->add_option("--r-star", xo->r_star);
  cx->add_option("--d", xo->d, "Ambient dimension (thm5, spur-gen)");
  cx->add_option("--mu", xo->mu);
  cx->add_option("--lambda", xo->lambda);
  cx->add_option("--r1", xo->r1, "Benign rank (thm6)");
  cx->add_option("--r-max", xo->r_max);
  cx->add_option("--epsilon", xo->epsilon);
  cx->add_option("--c-perp", xo->c_perp);
  cx->add_flag("--coordinate-basis", xo->coordinate_basis);
  cx->add_option("--r-sp", xo->r_sp);
  cx->add_option("--kappa", xo->kappa, "kappa_sp (example2)");
  cx->add_option("--d1", xo->d1);
  cx->add_option("--d2", xo->d2);
  cx->add_option("--seed", xo->seed);
  cx->add_option("--out", xo->out);

  // theory
  auto to = std::make_shared<TheoryOpts>();
  auto* th = app.add_subcommand("theory", "Closed-form constants and error bounds");
  th->add_option("--r", to->p.r)->required();
  th->add_option("--r-star", to->p.r_star)->required();
  to->mu_opt = th->add_option("--mu", to->p.mu);
  th->add_option("--L", to->p.L);
  to->l2_opt = th->add_option("--L2", to->p.L2, "Default: L");
  th->add_option("--lambda", to->p.lambda);
  th->add_option("--noise", to->p.noise_opnorm, "Operator norm of grad phi(M*)");
  to->delta_opt = th->add_option("--delta-k", to->delta_k, "RIP constant for the Theorem 2 bound");
  th->add_option("--grid", to->grid, "Oracle grid size (0 skips the oracle)");
  th->add_option("--out", to->out);

  // sweep
  auto wo = std::make_shared<SweepOpts>();
  auto* sw = app.add_subcommand("sweep", "Rank sweep over random Gaussian instances (CSV)");
  wo->app = sw;
  sw->add_option("--d1", wo->c.d1);
  sw->add_option("--d2", wo->c.d2);
  sw->add_option("--r-star", wo->c.r_star);
  sw->add_option("--n", wo->c.n);
  sw->add_option("--lambda", wo->c.lambda);
  sw->add_option("--r-values", wo->c.r_values)->delimiter(',');
  sw->add_option("--trials", wo->c.n_trials);
  sw->add_option("--seed", wo->c.seed);
  sw->add_option("--singular-values", wo->c.singular_values)->delimiter(',');
  sw->add_option("--workers", wo->c.workers, "0: hardware concurrency");
  sw->add_option("--method", wo->method)->check(CLI::IsMember({"gd", "tr-newton-cg"}));
  sw->add_option("--max-iters", wo->c.solver.max_iters);
  sw->add_option("--grad-tol", wo->c.solver.grad_tol);
  sw->add_option("--tr-radius", wo->c.solver.tr_initial_radius);
  sw->add_option("--init-scale", wo->c.solver.init_scale);
  sw->add_option("--from-csv", wo->from_csv, "Replay the configuration stored in a sweep CSV header");
  sw->add_option("--out", wo->out, "Output CSV")->required();
  sw->add_flag("--progress", wo->progress);

  // threshold
  auto ho = std::make_shared<ThresholdOpts>();
  auto* tt = app.add_subcommand("threshold", "Example 2 Hessian sign across kappa_crit (CSV)");
  tt->add_option("--r-sp", ho->r_sp)->required();
  tt->add_option("--r-star", ho->r_star)->required();
  tt->add_option("--d", ho->d);
  tt->add_option("--kappa-lo", ho->kappa_lo, "Default: 0.9 kappa_crit");
  tt->add_option("--kappa-hi", ho->kappa_hi, "Default: 1.1 kappa_crit");
  tt->add_option("--points", ho->points);
  tt->add_option("--eig-tol", ho->eig_tol);
  tt->add_option("--seed", ho->seed);
  tt->add_option("--out", ho->out);

  return [=, &app]() -> int {
    if (app.got_subcommand(solve)) return run_solve(*so);
    if (app.got_subcommand(certify)) return run_certify(*co);
    if (app.got_subcommand(cx)) return run_counterexample(*xo);
    if (app.got_subcommand(th)) return run_theory(*to);
    if (app.got_subcommand(sw)) return run_sweep_cmd(*wo);
    if (app.got_subcommand(tt)) return run_threshold(*ho);
    throw UsageError("no subcommand");
  };
}

}  // namespace nclasso::cli
