#include "nclasso/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "nclasso/certify.hpp"
#include "nclasso/counterexamples.hpp"
#include "nclasso/theory.hpp"

namespace nclasso {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream));
}

Matrix random_orthonormal(int d, int k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(d, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) X(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(X);
  return qr.householderQ() * Matrix::Identity(d, k);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

int SweepConfig::resolved_n() const {
  if (n > 0) return n;
  // ⌈2.35·r*·(d1+d2)⌉ with the product formed in integers (235/100).
  const long long num = 235LL * r_star * (d1 + d2);
  return static_cast<int>((num + 99) / 100);
}

std::vector<double> SweepConfig::resolved_singular_values() const {
  if (!singular_values.empty()) return singular_values;
  return std::vector<double>(static_cast<std::size_t>(r_star), 1.0);
}

void SweepConfig::validate() const {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("sweep: d1, d2 must be >= 1");
  if (r_star < 1 || r_star > std::min(d1, d2)) throw std::invalid_argument("sweep: invalid r_star");
  if (n < 0) throw std::invalid_argument("sweep: n must be >= 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("sweep: lambda must be >= 0");
  if (r_values.empty()) throw std::invalid_argument("sweep: r_values must be non-empty");
  for (int r : r_values)
    if (r < 1) throw std::invalid_argument("sweep: every r must be >= 1");
  if (n_trials < 1) throw std::invalid_argument("sweep: n_trials must be >= 1");
  if (!singular_values.empty() && static_cast<int>(singular_values.size()) != r_star)
    throw std::invalid_argument("sweep: singular_values must have r_star entries");
  if (workers < 0) throw std::invalid_argument("sweep: workers must be >= 0");
  if (solver.method == SolverMethod::ProxGradient)
    throw std::invalid_argument("sweep: the factored solver must be gd or tr-newton-cg");
  solver.validate();
}

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  return seed + static_cast<std::uint64_t>(trial);
}

ProblemInstance sweep_instance(const SweepConfig& config, std::uint64_t seed) {
  MeasurementOperator op = MeasurementOperator::gaussian(config.d1, config.d2, config.resolved_n(),
                                                         stream_seed(seed, 0), false);
  std::mt19937_64 rng(stream_seed(seed, 1));
  const std::vector<double> sv = config.resolved_singular_values();
  const Matrix P = random_orthonormal(config.d1, config.r_star, rng);
  const Matrix Q = random_orthonormal(config.d2, config.r_star, rng);
  const Vector s = Eigen::Map<const Vector>(sv.data(), static_cast<Eigen::Index>(sv.size()));
  const Matrix M_star = P * s.asDiagonal() * Q.transpose();
  Vector b = op.forward(M_star);
  return ProblemInstance(std::move(op), std::move(b), config.lambda,
                         GroundTruth{M_star, Vector::Zero(config.resolved_n())});
}

std::uint64_t sweep_init_seed(std::uint64_t seed, int r) {
  return stream_seed(seed, 2 + static_cast<std::uint64_t>(r));
}

SweepRow run_sweep_trial(const SweepConfig& config, int r, int trial) {
  SweepRow row;
  row.r = r;
  row.trial = trial;
  row.seed = trial_seed(config.seed, trial);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const ProblemInstance inst = sweep_instance(config, row.seed);
    const Matrix& M_star = inst.truth()->M_star;

    SolverConfig sc = config.solver;
    sc.seed = sweep_init_seed(row.seed, r);
    const SolveResult res = solve_factored(inst, r, sc);
    row.final_error = error_vs_truth(res.M, M_star).frob_error;
    row.final_objective = res.objective;
    row.grad_norm = res.grad_norm;
    const CriticalityCertificate cert = certify_point(inst, *res.point);
    row.hess_min_eig = cert.hess_min_eig;
    row.certified = cert.verdict == Verdict::SecondOrderCritical;
  } catch (const std::exception& e) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (row.final_error == 0.0) row.final_error = nan;
    if (row.final_objective == 0.0) row.final_objective = nan;
    if (row.grad_norm == 0.0) row.grad_norm = nan;
    row.hess_min_eig = nan;
    row.certified = false;
    row.error = e.what();
  }
  row.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

std::vector<SweepRow> run_sweep(const SweepConfig& config,
                                const std::function<void(const SweepRow&)>& progress) {
  config.validate();
  std::vector<std::pair<int, int>> jobs;
  for (int r : config.r_values)
    for (int t = 0; t < config.n_trials; ++t) jobs.emplace_back(r, t);
  std::vector<SweepRow> rows(jobs.size());
  std::vector<char> done(jobs.size(), 0);
  int workers = config.workers > 0 ? config.workers
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));

  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      rows[i] = run_sweep_trial(config, jobs[i].first, jobs[i].second);
      if (progress) progress(rows[i]);
    }
    return rows;
  }

  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        SweepRow row = run_sweep_trial(config, jobs[i].first, jobs[i].second);
        {
          std::lock_guard<std::mutex> lock(mu);
          rows[i] = std::move(row);
          done[i] = 1;
        }
        cv.notify_one();
      }
    });
  }
  // Collector: report in (r, trial) order as rows become available.
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return done[i] != 0; });
    lock.unlock();
    if (progress) progress(rows[i]);
  }
  for (auto& t : pool) t.join();
  return rows;
}

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows) {
  std::vector<int> order;
  for (const auto& row : rows)
    if (std::find(order.begin(), order.end(), row.r) == order.end()) order.push_back(row.r);
  std::vector<SweepSummary> out;
  for (int r : order) {
    std::vector<double> err, obj, grad, eig, wall;
    int certified = 0, total = 0;
    for (const auto& row : rows) {
      if (row.r != r) continue;
      ++total;
      if (row.certified && row.error.empty()) ++certified;
      if (!row.error.empty() || !std::isfinite(row.final_error)) continue;
      err.push_back(row.final_error);
      obj.push_back(row.final_objective);
      grad.push_back(row.grad_norm);
      if (std::isfinite(row.hess_min_eig)) eig.push_back(row.hess_min_eig);
      wall.push_back(row.wall_ms);
    }
    SweepSummary s;
    s.r = r;
    s.count = static_cast<int>(err.size());
    s.mean_error = mean(err);
    s.median_error = median(err);
    s.mean_objective = mean(obj);
    s.median_objective = median(obj);
    s.mean_grad_norm = mean(grad);
    s.median_grad_norm = median(grad);
    s.mean_hess_min_eig = mean(eig);
    s.median_hess_min_eig = median(eig);
    s.certified_fraction = total > 0 ? static_cast<double>(certified) / total : 0.0;
    s.mean_wall_ms = mean(wall);
    s.median_wall_ms = median(wall);
    out.push_back(s);
  }
  return out;
}

std::string sweep_config_header(const SweepConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "# nclasso sweep, schema 1\n";
  os << "# d1 = " << c.d1 << "\n# d2 = " << c.d2 << "\n# r_star = " << c.r_star
     << "\n# n = " << c.resolved_n() << "\n# lambda = " << c.lambda << "\n# r_values = ";
  for (std::size_t i = 0; i < c.r_values.size(); ++i) os << (i ? "," : "") << c.r_values[i];
  os << "\n# n_trials = " << c.n_trials << "\n# seed = " << c.seed << "\n# singular_values = ";
  const auto sv = c.resolved_singular_values();
  for (std::size_t i = 0; i < sv.size(); ++i) os << (i ? "," : "") << sv[i];
  os << "\n# workers = " << c.workers;
  os << "\n# solver.method = " << to_string(c.solver.method)
     << "\n# solver.max_iters = " << c.solver.max_iters
     << "\n# solver.grad_tol = " << c.solver.grad_tol
     << "\n# solver.tr_initial_radius = " << c.solver.tr_initial_radius
     << "\n# solver.tr_max_radius = " << c.solver.tr_max_radius
     << "\n# solver.tr_eta = " << c.solver.tr_eta
     << "\n# solver.cg_max_iters = " << c.solver.cg_max_iters
     << "\n# solver.backtrack_shrink = " << c.solver.backtrack_shrink
     << "\n# solver.sufficient_decrease = " << c.solver.sufficient_decrease
     << "\n# solver.objective_rtol = " << c.solver.objective_rtol
     << "\n# solver.init_scale = " << c.solver.init_scale << "\n";
  return os.str();
}

SweepConfig sweep_config_from_header(std::istream& in) {
  SweepConfig c;
  c.singular_values.clear();
  auto ints = [](const std::string& v) {
    std::vector<int> out;
    std::istringstream is(v);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
    return out;
  };
  auto reals = [](const std::string& v) {
    std::vector<double> out;
    std::istringstream is(v);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
    return out;
  };
  std::string line;
  bool any = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) != 0) break;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(2, eq - 2);
    const std::string val = line.substr(eq + 3);
    any = true;
    if (key == "d1") c.d1 = std::stoi(val);
    else if (key == "d2") c.d2 = std::stoi(val);
    else if (key == "r_star") c.r_star = std::stoi(val);
    else if (key == "n") c.n = std::stoi(val);
    else if (key == "lambda") c.lambda = std::stod(val);
    else if (key == "r_values") c.r_values = ints(val);
    else if (key == "n_trials") c.n_trials = std::stoi(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "singular_values") c.singular_values = reals(val);
    else if (key == "workers") c.workers = std::stoi(val);
    else if (key == "solver.method") c.solver.method = solver_method_from_string(val);
    else if (key == "solver.max_iters") c.solver.max_iters = std::stoi(val);
    else if (key == "solver.grad_tol") c.solver.grad_tol = std::stod(val);
    else if (key == "solver.tr_initial_radius") c.solver.tr_initial_radius = std::stod(val);
    else if (key == "solver.tr_max_radius") c.solver.tr_max_radius = std::stod(val);
    else if (key == "solver.tr_eta") c.solver.tr_eta = std::stod(val);
    else if (key == "solver.cg_max_iters") c.solver.cg_max_iters = std::stoi(val);
    else if (key == "solver.backtrack_shrink") c.solver.backtrack_shrink = std::stod(val);
    else if (key == "solver.sufficient_decrease") c.solver.sufficient_decrease = std::stod(val);
    else if (key == "solver.objective_rtol") c.solver.objective_rtol = std::stod(val);
    else if (key == "solver.init_scale") c.solver.init_scale = std::stod(val);
    else throw std::invalid_argument("sweep header: unknown key " + key);
  }
  if (!any) throw std::invalid_argument("sweep header: no configuration lines");
  c.validate();
  return c;
}

void write_sweep_csv(std::ostream& out, const SweepConfig& config, const std::vector<SweepRow>& rows) {
  out << sweep_config_header(config);
  out << kSweepColumns << '\n';
  for (const auto& row : rows) {
    out << row.r << ',' << row.trial << ',' << row.seed << ',' << num(row.final_error) << ','
        << num(row.final_objective) << ',' << num(row.grad_norm) << ',' << num(row.hess_min_eig)
        << ',' << (row.certified ? "true" : "false") << ',' << num(row.wall_ms) << '\n';
  }
  for (const auto& s : summarize(rows)) {
    out << s.r << ",mean,," << num(s.mean_error) << ',' << num(s.mean_objective) << ','
        << num(s.mean_grad_norm) << ',' << num(s.mean_hess_min_eig) << ','
        << num(s.certified_fraction) << ',' << num(s.mean_wall_ms) << '\n';
    out << s.r << ",median,," << num(s.median_error) << ',' << num(s.median_objective) << ','
        << num(s.median_grad_norm) << ',' << num(s.median_hess_min_eig) << ','
        << num(s.certified_fraction) << ',' << num(s.median_wall_ms) << '\n';
  }
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iter,objective,grad_norm,tr_radius\n";
  for (const auto& t : trace)
    out << t.iter << ',' << num(t.objective) << ',' << num(t.grad_norm) << ',' << num(t.tr_radius)
        << '\n';
}

std::vector<ThresholdRow> run_threshold_sweep(int r_sp, int r_star, int d, double kappa_lo,
                                              double kappa_hi, int points, std::uint64_t seed) {
  if (points < 2) throw std::invalid_argument("threshold sweep needs at least 2 points");
  if (!(kappa_lo > 1.0 && kappa_hi > kappa_lo))
    throw std::invalid_argument("threshold sweep needs 1 < kappa_lo < kappa_hi");
  std::vector<ThresholdRow> rows;
  const double kc = kappa_crit(r_sp, r_star);
  for (int i = 0; i < points; ++i) {
    const double kappa = kappa_lo + (kappa_hi - kappa_lo) * i / (points - 1);
    const CounterexampleInstance ce = build_example2(r_sp, r_star, d, d, kappa, seed);
    CertifyTolerances tols;
    tols.method = EigMethod::Dense;
    const CriticalityCertificate cert = certify_point(ce.instance(), ce.spurious_point, tols);
    rows.push_back({r_sp, r_star, kappa, kc, cert.hess_min_eig, cert.grad_norm});
  }
  return rows;
}

void write_threshold_csv(std::ostream& out, const std::vector<ThresholdRow>& rows,
                         const std::string& header_comment) {
  if (!header_comment.empty()) {
    std::istringstream in(header_comment);
    std::string line;
    while (std::getline(in, line)) out << "# " << line << '\n';
  }
  out << kThresholdColumns << '\n';
  for (const auto& r : rows)
    out << r.r_sp << ',' << r.r_star << ',' << num(r.kappa_sp) << ',' << num(r.kappa_crit) << ','
        << num(r.hess_min_eig) << ',' << num(r.grad_norm) << '\n';
}

}  // namespace nclasso
