#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/solver.hpp"
#include "spde/torus.hpp"

namespace spde {

// Configuration and runtime rejections carry a machine-readable code that the
// CLI prints as `error: <code>: <message>` before exiting nonzero. Codes:
//   CONFIG_PARSE        malformed line, duplicate key, unreadable file
//   CONFIG_UNKNOWN_KEY  unknown key under strict mode
//   CONFIG_MISSING      required key absent
//   CONFIG_BAD_VALUE    value fails to parse or is out of range
//   CONFIG_EPS_ORDER    eps grid not strictly decreasing / zero misplaced
//   CONFIG_SEEDS        duplicate or empty seed list
//   COEFF_INVALID       coefficient family rejected its parameters
//   STABILITY_BOUND     dt above the explicit-part stability limit
//   COUPLING_CHECKSUM   coupled runs disagree on the driving path
//   REGRESSION_POINTS   rate fit attempted on fewer than 3 usable pairs
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

enum class ExperimentKind { simulate, sweep_eps, uniqueness, monotonicity, constants };

const char* kind_name(ExperimentKind k);

// Everything a batch run needs, parsed from flat key = value text. Defaults
// are the values documented in the README key table.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::simulate;

  std::string coeff_name = "trig";
  std::map<std::string, double> coeff_params;

  int dim = 1;
  int n = 64;
  double eps = 0.0;
  std::vector<double> eps_grid;  // strictly decreasing; 0 allowed last
  double dt = 0.0;
  double T = 0.0;
  int K = 0;
  double theta_split = 0.0;
  bool dealias = true;
  double clip_R = 50.0;
  int snapshot_stride = 0;

  std::vector<std::uint64_t> seeds = {1};
  double M_threshold = 25.0;

  std::string u0_kind = "sine";  // sine | cosine | constant | zero | mix
  double u0_amplitude = 1.0;
  int u0_mode = 1;
  double u0_value = 0.0;
  double u0_gap = 1e-3;  // L1 size of the uniqueness perturbation

  std::string out_dir = "out";
  int samples = 1000;           // probe sample count (monotonicity, constants)
  int tests = 8;                // weak-form test functions in simulate
  std::vector<int> n_list = {2, 4, 8};
  bool check_heat_oracle = false;
  double monitor_factor = 2.0;
  bool plotdata = false;

  SolverConfig solver(double eps_value) const;
  CoefficientSet coefficients() const;  // throws ConfigError{COEFF_INVALID}
  ScalarField initial_state() const;
};

// key = value per line, # starts a comment, blank lines ignored. Duplicate
// keys and lines without = are rejected.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Typed validation of the raw map. Unknown keys throw under strict and are
// appended to *warnings otherwise.
ExperimentConfig build_config(const std::map<std::string, std::string>& kv,
                              bool strict = false,
                              std::vector<std::string>* warnings = nullptr);

ExperimentConfig load_config_file(const std::string& path, bool strict = false,
                                  std::vector<std::string>* warnings = nullptr);

struct RunResult {
  int exit_code = 0;                     // 0 all assertions pass, 1 otherwise
  std::vector<std::string> assertions;   // "PASS <name> <detail>" / "FAIL ..."
  std::vector<std::string> artifacts;    // files written, relative to out_dir
};

// Dispatches cfg.kind, writes manifest.txt + CSVs under out_dir (created if
// absent; overrides cfg.out_dir when non-empty), and evaluates the kind's
// assertions. SPDE_SEED_OFFSET is added to every seed. Deterministic output
// bytes for fixed config + seeds; wall-clock goes to timing.txt only.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = "",
                         int threads = 1);

}  // namespace spde
