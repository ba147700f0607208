#include "spde/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace spde {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
  throw ConfigError("CONFIG_BAD_VALUE",
                    "key '" + key + "' = '" + value + "' (" + want + ")");
}

double to_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty()) bad_value(key, value, "expected a number");
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || !std::isfinite(x))
    bad_value(key, value, "expected a finite number");
  return x;
}

long long to_int(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty()) bad_value(key, value, "expected an integer");
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size()) bad_value(key, value, "expected an integer");
  return x;
}

bool to_bool(const std::string& key, const std::string& value) {
  std::string v = trim(value);
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value, "expected a boolean");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (!value.empty() && value.back() == ',') out.push_back("");
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "kind",         "coeff",        "coeff.a",      "coeff.a0",
      "coeff.a1",     "coeff.b",      "coeff.cA",     "coeff.delta",
      "coeff.s",      "dim",          "n",            "eps",
      "eps_grid",     "dt",           "T",            "K",
      "theta_split",  "dealias",      "clip_R",       "snapshot_stride",
      "seeds",        "M_threshold",  "u0",           "u0.amplitude",
      "u0.mode",      "u0.value",     "u0_gap",       "out_dir",
      "samples",      "tests",        "n_list",       "check_heat_oracle",
      "monitor_factor", "plotdata",
  };
  return keys;
}

}  // namespace

const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::sweep_eps: return "sweep_eps";
    case ExperimentKind::uniqueness: return "uniqueness";
    case ExperimentKind::monotonicity: return "monotonicity";
    case ExperimentKind::constants: return "constants";
  }
  return "?";
}

SolverConfig ExperimentConfig::solver(double eps_value) const {
  SolverConfig cfg;
  cfg.grid = TorusGrid::make(dim, n);
  cfg.eps = eps_value;
  cfg.dt = dt;
  cfg.T = T;
  cfg.K = K;
  cfg.dealias = dealias;
  cfg.theta_split = theta_split;
  cfg.clip_R = clip_R;
  cfg.snapshot_stride = snapshot_stride;
  return cfg;
}

CoefficientSet ExperimentConfig::coefficients() const {
  try {
    return builtin_coefficients(coeff_name, coeff_params, dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("COEFF_INVALID", e.what());
  }
}

ScalarField ExperimentConfig::initial_state() const {
  const TorusGrid g = TorusGrid::make(dim, n);
  if (u0_kind == "zero") return ScalarField::zeros(g);
  if (u0_kind == "constant") return ScalarField::constant(g, u0_value);

  ScalarField f = ScalarField::zeros(g);
  const double w = kTwoPi * u0_mode;
  if (dim == 1) {
    for (int i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / n;
      if (u0_kind == "sine") f.at(i) = u0_amplitude * std::sin(w * x);
      else if (u0_kind == "cosine") f.at(i) = u0_amplitude * std::cos(w * x);
      else f.at(i) = u0_amplitude * (std::sin(w * x) + 0.5 * std::cos(2.0 * w * x));
    }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x = static_cast<double>(i) / n;
        const double y = static_cast<double>(j) / n;
        if (u0_kind == "sine")
          f.at(i, j) = u0_amplitude * std::sin(w * x) * std::sin(w * y);
        else if (u0_kind == "cosine")
          f.at(i, j) = u0_amplitude * std::cos(w * x) * std::cos(w * y);
        else
          f.at(i, j) = u0_amplitude * (std::sin(w * x) + 0.5 * std::cos(2.0 * w * y));
      }
  }
  return f;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("CONFIG_PARSE",
                        "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("CONFIG_PARSE",
                        "line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key))
      throw ConfigError("CONFIG_PARSE",
                        "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

ExperimentConfig build_config(const std::map<std::string, std::string>& kv, bool strict,
                              std::vector<std::string>* warnings) {
  for (const auto& [key, value] : kv) {
    if (known_keys().count(key)) continue;
    if (strict) throw ConfigError("CONFIG_UNKNOWN_KEY", "'" + key + "'");
    if (warnings) warnings->push_back("unknown key '" + key + "' ignored");
  }

  const auto get = [&kv](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  ExperimentConfig cfg;

  const std::string* kind = get("kind");
  if (!kind) throw ConfigError("CONFIG_MISSING", "key 'kind' is required");
  if (*kind == "simulate") cfg.kind = ExperimentKind::simulate;
  else if (*kind == "sweep_eps") cfg.kind = ExperimentKind::sweep_eps;
  else if (*kind == "uniqueness") cfg.kind = ExperimentKind::uniqueness;
  else if (*kind == "monotonicity") cfg.kind = ExperimentKind::monotonicity;
  else if (*kind == "constants") cfg.kind = ExperimentKind::constants;
  else bad_value("kind", *kind,
                 "one of simulate, sweep_eps, uniqueness, monotonicity, constants");

  if (const auto* v = get("coeff")) cfg.coeff_name = trim(*v);
  for (const char* p : {"a", "a0", "a1", "b", "cA", "delta", "s"}) {
    if (const auto* v = get(std::string("coeff.") + p))
      cfg.coeff_params[p] = to_double(std::string("coeff.") + p, *v);
  }

  if (const auto* v = get("dim")) {
    const long long d = to_int("dim", *v);
    if (d != 1 && d != 2) bad_value("dim", *v, "expected 1 or 2");
    cfg.dim = static_cast<int>(d);
  }
  if (const auto* v = get("n")) {
    const long long x = to_int("n", *v);
    if (x < 8 || x > (1 << 20) || (x & (x - 1)) != 0)
      bad_value("n", *v, "expected a power of two >= 8");
    cfg.n = static_cast<int>(x);
  }
  if (const auto* v = get("eps")) {
    cfg.eps = to_double("eps", *v);
    if (cfg.eps < 0.0) bad_value("eps", *v, "expected eps >= 0");
  }
  if (const auto* v = get("eps_grid")) {
    for (const std::string& item : split_list(*v))
      cfg.eps_grid.push_back(to_double("eps_grid", item));
    if (cfg.eps_grid.empty())
      throw ConfigError("CONFIG_EPS_ORDER", "eps_grid is empty");
    for (std::size_t i = 0; i < cfg.eps_grid.size(); ++i) {
      const double e = cfg.eps_grid[i];
      const bool last = i + 1 == cfg.eps_grid.size();
      if (e < 0.0 || (e == 0.0 && !last))
        throw ConfigError("CONFIG_EPS_ORDER",
                          "eps_grid entries must be positive (0 allowed last)");
      if (i > 0 && e >= cfg.eps_grid[i - 1])
        throw ConfigError("CONFIG_EPS_ORDER", "eps_grid must be strictly decreasing");
    }
  }
  if (const auto* v = get("dt")) {
    cfg.dt = to_double("dt", *v);
    if (cfg.dt <= 0.0) bad_value("dt", *v, "expected dt > 0");
  }
  if (const auto* v = get("T")) {
    cfg.T = to_double("T", *v);
    if (cfg.T <= 0.0) bad_value("T", *v, "expected T > 0");
  }
  if (const auto* v = get("K")) {
    const long long k = to_int("K", *v);
    if (k < 0) bad_value("K", *v, "expected K >= 0");
    cfg.K = static_cast<int>(k);
  }
  if (const auto* v = get("theta_split")) {
    cfg.theta_split = to_double("theta_split", *v);
    if (cfg.theta_split < 0.0) bad_value("theta_split", *v, "expected >= 0");
  }
  if (const auto* v = get("dealias")) cfg.dealias = to_bool("dealias", *v);
  if (const auto* v = get("clip_R")) {
    cfg.clip_R = to_double("clip_R", *v);
    if (cfg.clip_R <= 0.0) bad_value("clip_R", *v, "expected > 0");
  }
  if (const auto* v = get("snapshot_stride")) {
    const long long s = to_int("snapshot_stride", *v);
    if (s < 0) bad_value("snapshot_stride", *v, "expected >= 0");
    cfg.snapshot_stride = static_cast<int>(s);
  }

  if (const auto* v = get("seeds")) {
    cfg.seeds.clear();
    for (const std::string& item : split_list(*v)) {
      const long long s = to_int("seeds", item);
      if (s < 0) throw ConfigError("CONFIG_SEEDS", "seeds must be nonnegative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (cfg.seeds.empty()) throw ConfigError("CONFIG_SEEDS", "seed list is empty");
    std::set<std::uint64_t> uniq(cfg.seeds.begin(), cfg.seeds.end());
    if (uniq.size() != cfg.seeds.size())
      throw ConfigError("CONFIG_SEEDS", "seeds must be distinct");
  }

  if (const auto* v = get("M_threshold")) {
    cfg.M_threshold = to_double("M_threshold", *v);
    if (cfg.M_threshold <= 0.0) bad_value("M_threshold", *v, "expected > 0");
  }

  if (const auto* v = get("u0")) {
    cfg.u0_kind = trim(*v);
    static const std::set<std::string> kinds = {"sine", "cosine", "constant", "zero",
                                                "mix"};
    if (!kinds.count(cfg.u0_kind))
      bad_value("u0", *v, "one of sine, cosine, constant, zero, mix");
  }
  if (const auto* v = get("u0.amplitude")) cfg.u0_amplitude = to_double("u0.amplitude", *v);
  if (const auto* v = get("u0.mode")) {
    const long long m = to_int("u0.mode", *v);
    if (m < 1) bad_value("u0.mode", *v, "expected >= 1");
    cfg.u0_mode = static_cast<int>(m);
  }
  if (const auto* v = get("u0.value")) cfg.u0_value = to_double("u0.value", *v);
  if (const auto* v = get("u0_gap")) {
    cfg.u0_gap = to_double("u0_gap", *v);
    if (cfg.u0_gap <= 0.0) bad_value("u0_gap", *v, "expected > 0");
  }

  if (const auto* v = get("out_dir")) cfg.out_dir = trim(*v);
  if (const auto* v = get("samples")) {
    const long long s = to_int("samples", *v);
    if (s < 1) bad_value("samples", *v, "expected >= 1");
    cfg.samples = static_cast<int>(s);
  }
  if (const auto* v = get("tests")) {
    const long long t = to_int("tests", *v);
    if (t < 0) bad_value("tests", *v, "expected >= 0");
    cfg.tests = static_cast<int>(t);
  }
  if (const auto* v = get("n_list")) {
    cfg.n_list.clear();
    for (const std::string& item : split_list(*v)) {
      const long long x = to_int("n_list", item);
      if (x < 1) bad_value("n_list", item, "expected >= 1");
      cfg.n_list.push_back(static_cast<int>(x));
    }
    if (cfg.n_list.empty()) bad_value("n_list", *v, "expected at least one entry");
  }
  if (const auto* v = get("check_heat_oracle"))
    cfg.check_heat_oracle = to_bool("check_heat_oracle", *v);
  if (const auto* v = get("monitor_factor")) {
    cfg.monitor_factor = to_double("monitor_factor", *v);
    if (cfg.monitor_factor < 1.0) bad_value("monitor_factor", *v, "expected >= 1");
  }
  if (const auto* v = get("plotdata")) cfg.plotdata = to_bool("plotdata", *v);

  const bool integrates = cfg.kind == ExperimentKind::simulate ||
                          cfg.kind == ExperimentKind::sweep_eps ||
                          cfg.kind == ExperimentKind::uniqueness;
  if (integrates) {
    if (!get("dt")) throw ConfigError("CONFIG_MISSING", "key 'dt' is required");
    if (!get("T")) throw ConfigError("CONFIG_MISSING", "key 'T' is required");
  }
  if (cfg.kind == ExperimentKind::sweep_eps) {
    if (cfg.eps_grid.empty())
      throw ConfigError("CONFIG_MISSING", "key 'eps_grid' is required for sweep_eps");
    if (cfg.eps_grid.size() < 3)
      throw ConfigError("CONFIG_BAD_VALUE", "sweep_eps needs at least 3 eps values");
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path, bool strict,
                                  std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw ConfigError("CONFIG_PARSE", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return build_config(parse_config_text(buf.str()), strict, warnings);
}

}  // namespace spde
