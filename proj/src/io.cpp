#include "nclasso/io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace nclasso {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json matrix_to_json(const Matrix& M) {
  json data = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::invalid_argument("matrix JSON: data length does not match shape");
  Matrix M(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = data[k++].get<double>();
  return M;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json operator_to_json(const MeasurementOperator& op) {
  json j = {{"kind", to_string(op.kind())},
            {"shape", {{"d1", op.d1()}, {"d2", op.d2()}, {"n", op.n()}}},
            {"symmetric", op.symmetric()}};
  switch (op.kind()) {
    case OperatorKind::Gaussian:
      j["seed"] = *op.seed();
      break;
    case OperatorKind::Dense: {
      json ms = json::array();
      for (int i = 0; i < op.n(); ++i) ms.push_back(matrix_to_json(op.measurement(i)));
      j["measurements"] = ms;
      break;
    }
    case OperatorKind::RankOnePerturbed:
      j["G"] = matrix_to_json(op.direction());
      j["coefficient"] = op.coefficient();
      j["t"] = op.shrink();
      break;
  }
  return j;
}

MeasurementOperator operator_from_json(const json& j) {
  const OperatorKind kind = operator_kind_from_string(j.at("kind").get<std::string>());
  const bool sym = j.value("symmetric", false);
  const json& shape = j.at("shape");
  switch (kind) {
    case OperatorKind::Gaussian:
      return MeasurementOperator::gaussian(shape.at("d1").get<int>(), shape.at("d2").get<int>(),
                                           shape.at("n").get<int>(), j.at("seed").get<std::uint64_t>(),
                                           sym);
    case OperatorKind::Dense: {
      std::vector<Matrix> ms;
      for (const auto& m : j.at("measurements")) ms.push_back(matrix_from_json(m));
      return MeasurementOperator::dense(ms, sym);
    }
    case OperatorKind::RankOnePerturbed:
      return MeasurementOperator::rank_one(matrix_from_json(j.at("G")),
                                           j.at("coefficient").get<double>(), sym);
  }
  throw std::invalid_argument("unsupported operator kind");
}

json instance_to_json(const ProblemInstance& inst) {
  json j = {{"schema", kSchemaVersion},
            {"operator", operator_to_json(inst.op())},
            {"b", vector_to_json(inst.b())},
            {"lambda", inst.lambda()}};
  if (inst.truth())
    j["truth"] = {{"M_star", matrix_to_json(inst.truth()->M_star)},
                  {"xi", vector_to_json(inst.truth()->xi)}};
  return j;
}

ProblemInstance instance_from_json(const json& j) {
  MeasurementOperator op = operator_from_json(j.at("operator"));
  Vector b = vector_from_json(j.at("b"));
  std::optional<GroundTruth> truth;
  if (j.contains("truth") && !j.at("truth").is_null()) {
    GroundTruth t;
    t.M_star = matrix_from_json(j.at("truth").at("M_star"));
    t.xi = vector_from_json(j.at("truth").at("xi"));
    truth = std::move(t);
  }
  return ProblemInstance(std::move(op), std::move(b), j.at("lambda").get<double>(), std::move(truth));
}

json point_to_json(const FactorPoint& P) {
  json j = {{"symmetric", P.symmetric}, {"r", P.rank()}, {"U", matrix_to_json(P.U)}};
  if (!P.symmetric) j["V"] = matrix_to_json(P.V);
  return j;
}

FactorPoint point_from_json(const json& j) {
  if (j.at("symmetric").get<bool>()) return FactorPoint::symmetric_point(matrix_from_json(j.at("U")));
  return FactorPoint::asymmetric(matrix_from_json(j.at("U")), matrix_from_json(j.at("V")));
}

json to_json(const RestrictedConstants& rc) {
  return {{"k", rc.k},
          {"mu", rc.mu},
          {"L", rc.L},
          {"kappa", finite_or_null(rc.kappa)},
          {"delta", rc.delta},
          {"exact", rc.exact},
          {"note", rc.note}};
}

json to_json(const CriticalityCertificate& c) {
  return {{"schema", kSchemaVersion},
          {"grad_norm", c.grad_norm},
          {"hess_min_eig", c.hess_min_eig},
          {"grad_tol", c.grad_tol},
          {"eig_tol", c.eig_tol},
          {"verdict", to_string(c.verdict)},
          {"method", to_string(c.method)},
          {"tangent_dim", c.tangent_dim},
          {"lanczos_iters", c.lanczos_iters},
          {"lanczos_residual", c.lanczos_residual}};
}

json to_json(const GlobalOptCertificate& c) {
  return {{"schema", kSchemaVersion},
          {"mode", c.symmetric ? "symmetric" : "asymmetric"},
          {"tangent_residual", c.tangent_residual},
          {"orthogonal_excess", c.orthogonal_excess},
          {"grad_norm", c.grad_norm},
          {"rank", c.rank},
          {"tol", c.tol},
          {"passes", c.passes}};
}

json to_json(const RichardDiagnostics& d) {
  return {{"alpha", d.alpha}, {"beta", d.beta}, {"r", d.r},       {"r_star", d.r_star},
          {"lhs", d.lhs},     {"rhs", d.rhs},   {"holds", d.holds}};
}

json to_json(const SolverConfig& c) {
  return {{"method", to_string(c.method)},
          {"max_iters", c.max_iters},
          {"grad_tol", c.grad_tol},
          {"tr_initial_radius", c.tr_initial_radius},
          {"tr_max_radius", c.tr_max_radius},
          {"tr_eta", c.tr_eta},
          {"cg_max_iters", c.cg_max_iters},
          {"backtrack_shrink", c.backtrack_shrink},
          {"sufficient_decrease", c.sufficient_decrease},
          {"objective_rtol", c.objective_rtol},
          {"seed", c.seed},
          {"init_scale", c.init_scale}};
}

json to_json(const SolveResult& r, bool include_point) {
  json j = {{"schema", kSchemaVersion},
            {"objective", finite_or_null(r.objective)},
            {"grad_norm", finite_or_null(r.grad_norm)},
            {"iters", r.iters},
            {"converged", r.converged},
            {"seed", r.seed},
            {"message", r.message}};
  if (include_point) {
    if (r.point) j["point"] = point_to_json(*r.point);
    j["M"] = matrix_to_json(r.M);
  }
  return j;
}

json to_json(const SpurGenSpec& s) {
  return {{"r_star", s.r_star},
          {"r_max", s.r_max},
          {"d", s.d},
          {"epsilon", s.epsilon},
          {"c", s.c},
          {"c_perp", s.c_perp},
          {"lambda", s.lambda},
          {"r", s.r},
          {"mode", s.symmetric ? "sym" : "asym"},
          {"seed", s.seed},
          {"coordinate_basis", s.coordinate_basis},
          {"constraint_residual", s.constraint_residual()},
          {"spur_cond_margin", s.spur_cond_margin()},
          {"spur_condition", to_string(s.spur_condition())}};
}

json to_json(const CounterexampleInstance& ce) {
  json consts = json::array();
  for (const auto& rc : ce.predicted_constants) consts.push_back(to_json(rc));
  json j = {{"schema", kSchemaVersion},
            {"family", ce.family},
            {"spec", to_json(ce.spec)},
            {"G", matrix_to_json(ce.G)},
            {"M_star", matrix_to_json(ce.M_star)},
            {"a", ce.a},
            {"a_perp", ce.a_perp},
            {"system_det", ce.system_det},
            {"x", ce.x},
            {"instance", instance_to_json(ce.instance())},
            {"spurious_point", point_to_json(ce.spurious_point)},
            {"predicted_constants", consts}};
  if (ce.family == "example2") j["kappa_sp"] = ce.kappa_sp;
  return j;
}

json to_json(const VerificationReport& rep) {
  json clauses = json::array();
  for (const auto& c : rep.clauses)
    clauses.push_back({{"id", c.id},
                       {"name", c.name},
                       {"passed", c.passed},
                       {"value", finite_or_null(c.value)},
                       {"tolerance", c.tolerance},
                       {"detail", c.detail}});
  return {{"schema", kSchemaVersion},
          {"all_passed", rep.all_passed},
          {"minimality", rep.minimality},
          {"clauses", clauses},
          {"certificate", to_json(rep.certificate)},
          {"convex_certificate", to_json(rep.convex_certificate)}};
}

json to_json(const TheoryParams& p) {
  return {{"r", p.r},         {"r_star", p.r_star}, {"mu", p.mu},
          {"L", p.L},         {"L2", p.L2},         {"lambda", p.lambda},
          {"noise_opnorm", p.noise_opnorm}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace nclasso
