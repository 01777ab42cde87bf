#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "rothevi/experiment.hpp"

namespace {

// exit codes: 1 config, 2 geometry, 3 solver non-convergence, 4 coercivity
constexpr int kExitConfig = 1;
constexpr int kExitGeometry = 2;
constexpr int kExitSolver = 3;
constexpr int kExitCoercivity = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rothevi::ConfigError({{0, "cannot open config file: " + path}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rothe time discretization of bidomain interface transmission problems"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  bool quiet = false;

  CLI::App* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "config file path")->required();
  run->add_option("--out", out_override, "override the output directory");
  run->add_flag("--quiet", quiet, "suppress progress output");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "parse and validate a config file");
  validate->add_option("config", validate_path, "config file path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      rothevi::parse_config(read_file(validate_path));
      std::cout << "ok\n";
      return 0;
    }
    rothevi::RunConfig cfg = rothevi::parse_config(read_file(config_path));
    if (!out_override.empty()) cfg.out_dir = out_override;
    std::vector<std::string> files = rothevi::run_experiment(cfg);
    if (!quiet)
      for (const auto& f : files) std::cout << "wrote " << f << "\n";
    return 0;
  } catch (const rothevi::ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << "\n";
    return kExitConfig;
  } catch (const rothevi::CoercivityError& e) {
    std::cerr << "coercivity violation: " << e.what() << "\n";
    return kExitCoercivity;
  } catch (const rothevi::GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return kExitGeometry;
  } catch (const rothevi::SolveError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const rothevi::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}
