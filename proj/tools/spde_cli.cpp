// Batch driver: parses a flat key = value config, dispatches the named
// experiment and reports one PASS/FAIL line per assertion. Exit status 0 when
// every assertion passes, 1 on assertion failure, 2 on configuration or
// runtime rejection (stderr carries `error: <code>: <message>`).

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "spde/experiments.hpp"

namespace {

int run_command(const std::string& config_path, int seeds_n, const std::string& out_dir,
                int threads, bool strict) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: CONFIG_PARSE: cannot open '" << config_path << "'\n";
    return 2;
  }
  std::ostringstream buf;
  buf << in.rdbuf();

  auto kv = spde::parse_config_text(buf.str());
  if (seeds_n > 0) {
    std::string list;
    for (int s = 1; s <= seeds_n; ++s) {
      if (s > 1) list += ",";
      list += std::to_string(s);
    }
    kv["seeds"] = list;
  }

  std::vector<std::string> warnings;
  const spde::ExperimentConfig cfg = spde::build_config(kv, strict, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";

  const spde::RunResult res = spde::run_experiment(cfg, out_dir, threads);
  for (const std::string& line : res.assertions) std::cout << line << "\n";
  std::cout << (res.exit_code == 0 ? "all assertions passed"
                                   : "assertion failures present")
            << "\n";
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo-spectral simulation harness for quasilinear stochastic "
               "convection-diffusion on the torus"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int seeds_n = 0;
  int threads = 1;
  bool strict = false;

  CLI::App* run = app.add_subcommand("run", "execute one experiment config");
  run->add_option("--config", config_path, "config file (key = value lines)")
      ->required();
  run->add_option("--seeds", seeds_n, "override the seed list with 1..N")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory (overrides out_dir key)");
  run->add_option("--threads", threads, "worker threads for independent items")
      ->check(CLI::PositiveNumber);
  run->add_flag("--strict", strict, "reject unknown config keys");

  CLI11_PARSE(app, argc, argv);

  try {
    return run_command(config_path, seeds_n, out_dir, threads, strict);
  } catch (const spde::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: INTERNAL: " << e.what() << "\n";
    return 2;
  }
}
