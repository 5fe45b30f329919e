#include <cstdio>
#include <exception>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace nclasso::cli;
  CLI::App app{"Nonconvex matrix LASSO: solvers, certificates, counterexamples, sweeps"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file with one [section] per subcommand; flags override it");
  auto run = register_commands(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  try {
    return run();
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "malformed JSON input: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid configuration: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kVerificationFailed;
  }
}
