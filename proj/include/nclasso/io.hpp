#pragma once

#include <string>

#include <json.hpp>

#include "nclasso/certify.hpp"
#include "nclasso/counterexamples.hpp"
#include "nclasso/solver.hpp"
#include "nclasso/theory.hpp"

namespace nclasso {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// {"rows", "cols", "data"} with data in row-major order.
json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const json& j);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

/// Gaussian operators store only shape and seed; dense operators the
/// measurement matrices; rank-one operators G (unit) and the coefficient.
json operator_to_json(const MeasurementOperator& op);
MeasurementOperator operator_from_json(const json& j);

json instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const json& j);

json point_to_json(const FactorPoint& P);
FactorPoint point_from_json(const json& j);

json to_json(const RestrictedConstants& rc);
json to_json(const CriticalityCertificate& c);
json to_json(const GlobalOptCertificate& c);
json to_json(const RichardDiagnostics& d);
json to_json(const SolverConfig& c);
json to_json(const SolveResult& r, bool include_point = true);
json to_json(const SpurGenSpec& s);
json to_json(const CounterexampleInstance& ce);
json to_json(const VerificationReport& rep);
json to_json(const TheoryParams& p);

/// JSON number, or null for non-finite values.
json finite_or_null(double v);

/// Reads a whole file; throws std::runtime_error when it cannot be opened.
json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace nclasso
