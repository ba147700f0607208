#include "spde/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <span>
#include <thread>

#include "spde/diagnostics.hpp"
#include "spde/noise.hpp"
#include "spde/semigroup.hpp"
#include "spde/uniqueness.hpp"

namespace spde {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_hex(std::uint64_t x) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string join(std::span<const std::string> parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Bounded pool over independent items; results must be written into
// item-indexed slots so aggregation order never depends on scheduling.
void parallel_for(int items, int threads, const std::function<void(int)>& fn) {
  threads = std::min(threads, items);
  if (threads <= 1) {
    for (int i = 0; i < items; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= items) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
};

MeanSE mean_se(std::span<const double> xs) {
  MeanSE r;
  if (xs.empty()) return r;
  double s = 0.0, s2 = 0.0;
  for (double x : xs) {
    s += x;
    s2 += x * x;
  }
  const double N = static_cast<double>(xs.size());
  r.mean = s / N;
  if (xs.size() > 1)
    r.se = std::sqrt(std::max(0.0, (s2 - N * r.mean * r.mean) / (N - 1.0)) / N);
  return r;
}

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
};

FitResult loglog_fit(std::span<const double> x, std::span<const double> y) {
  FitResult f;
  f.points = static_cast<int>(x.size());
  const double N = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double den = N * sxx - sx * sx;
  f.slope = den == 0.0 ? 0.0 : (N * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / N;
  double ss_res = 0.0, ss_tot = 0.0;
  const double ybar = sy / N;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = f.intercept + f.slope * lx[i];
    ss_res += (ly[i] - pred) * (ly[i] - pred);
    ss_tot += (ly[i] - ybar) * (ly[i] - ybar);
  }
  f.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return f;
}

class Manifest {
 public:
  explicit Manifest(const ExperimentConfig& cfg) : cfg_(cfg) {}

  void info(const std::string& line) { info_.push_back(line); }

  bool check(const std::string& name, bool pass, const std::string& detail) {
    assertions_.push_back(std::string(pass ? "PASS " : "FAIL ") + name +
                          (detail.empty() ? "" : " " + detail));
    all_pass_ = all_pass_ && pass;
    return pass;
  }

  void noise_checksum(std::uint64_t seed, std::uint64_t sum) {
    checksums_.push_back("seed " + std::to_string(seed) + " = " + fmt_hex(sum));
  }

  bool all_pass() const { return all_pass_; }
  const std::vector<std::string>& assertions() const { return assertions_; }

  void write(const std::filesystem::path& file, std::uint64_t seed_offset,
             std::span<const std::string> artifacts) const {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << "spde run manifest\n\n";
    out << "config\n";
    for (const std::string& line : echo_config()) out << "  " << line << "\n";
    out << "\nseed_offset = " << seed_offset << "\n";
    if (!checksums_.empty()) {
      out << "\nnoise checksums\n";
      for (const std::string& line : checksums_) out << "  " << line << "\n";
    }
    if (!info_.empty()) {
      out << "\nnotes\n";
      for (const std::string& line : info_) out << "  " << line << "\n";
    }
    out << "\nassertions\n";
    for (const std::string& line : assertions_) out << "  " << line << "\n";
    if (!artifacts.empty()) {
      out << "\nartifacts\n";
      for (const std::string& name : artifacts) out << "  " << name << "\n";
    }
    out << "\nresult " << (all_pass_ ? "PASS" : "FAIL") << "\n";
  }

 private:
  std::vector<std::string> echo_config() const {
    std::vector<std::string> lines;
    const auto add = [&lines](const std::string& k, const std::string& v) {
      lines.push_back(k + " = " + v);
    };
    add("kind", kind_name(cfg_.kind));
    add("coeff", cfg_.coeff_name);
    for (const auto& [k, v] : cfg_.coeff_params) add("coeff." + k, fmt(v));
    add("dim", std::to_string(cfg_.dim));
    add("n", std::to_string(cfg_.n));
    add("eps", fmt(cfg_.eps));
    if (!cfg_.eps_grid.empty()) {
      std::vector<std::string> es;
      for (double e : cfg_.eps_grid) es.push_back(fmt(e));
      add("eps_grid", join(es, ", "));
    }
    add("dt", fmt(cfg_.dt));
    add("T", fmt(cfg_.T));
    add("K", std::to_string(cfg_.K));
    add("theta_split", fmt(cfg_.theta_split));
    add("dealias", cfg_.dealias ? "true" : "false");
    add("clip_R", fmt(cfg_.clip_R));
    add("snapshot_stride", std::to_string(cfg_.snapshot_stride));
    {
      std::vector<std::string> ss;
      for (std::uint64_t s : cfg_.seeds) ss.push_back(std::to_string(s));
      add("seeds", join(ss, ", "));
    }
    add("M_threshold", fmt(cfg_.M_threshold));
    add("u0", cfg_.u0_kind);
    add("u0.amplitude", fmt(cfg_.u0_amplitude));
    add("u0.mode", std::to_string(cfg_.u0_mode));
    add("u0.value", fmt(cfg_.u0_value));
    add("u0_gap", fmt(cfg_.u0_gap));
    add("samples", std::to_string(cfg_.samples));
    add("tests", std::to_string(cfg_.tests));
    {
      std::vector<std::string> ns;
      for (int x : cfg_.n_list) ns.push_back(std::to_string(x));
      add("n_list", join(ns, ", "));
    }
    add("check_heat_oracle", cfg_.check_heat_oracle ? "true" : "false");
    add("monitor_factor", fmt(cfg_.monitor_factor));
    add("plotdata", cfg_.plotdata ? "true" : "false");
    return lines;
  }

  const ExperimentConfig& cfg_;
  std::vector<std::string> info_;
  std::vector<std::string> checksums_;
  std::vector<std::string> assertions_;
  bool all_pass_ = true;
};

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& file, const std::string& header) : out_(file) {
    if (!out_) throw std::runtime_error("cannot write " + file.string());
    out_ << header << "\n";
  }
  void row(std::span<const std::string> cells) { out_ << join(cells, ",") << "\n"; }

 private:
  std::ofstream out_;
};

void write_two_column(const std::filesystem::path& file, std::span<const double> x,
                      std::span<const double> y) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (std::size_t i = 0; i < x.size(); ++i)
    out << fmt(x[i]) << " " << fmt(y[i]) << "\n";
}

void check_stability(const ExperimentConfig& cfg, const CoefficientSet& c, double eps) {
  const SolverConfig scfg = cfg.solver(eps);
  const double lim = stability_limit(scfg, c);
  if (scfg.dt > lim * (1.0 + 1e-12))
    throw ConfigError("STABILITY_BOUND", "dt = " + fmt(scfg.dt) +
                                             " exceeds the explicit-part limit " +
                                             fmt(lim));
  try {
    validate_config(scfg, c);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("CONFIG_BAD_VALUE", e.what());
  }
}

std::uint64_t seed_offset_from_env() {
  const char* raw = std::getenv("SPDE_SEED_OFFSET");
  if (!raw || !*raw) return 0;
  char* end = nullptr;
  const long long v = std::strtoll(raw, &end, 10);
  if (end == raw || *end != '\0' || v < 0)
    throw ConfigError("CONFIG_BAD_VALUE",
                      std::string("SPDE_SEED_OFFSET = '") + raw +
                          "' (expected a nonnegative integer)");
  return static_cast<std::uint64_t>(v);
}

std::vector<std::uint64_t> effective_seeds(const ExperimentConfig& cfg,
                                           std::uint64_t offset) {
  std::vector<std::uint64_t> seeds = cfg.seeds;
  for (std::uint64_t& s : seeds) s += offset;
  return seeds;
}

// --- simulate -------------------------------------------------------------

struct SimSeedResult {
  std::uint64_t checksum = 0;
  double max_resid = 0.0;
  long long clip_events = 0;
  long long energy_violations = 0;
  bool tau_hit = false;
  double tau_time = 0.0;
  std::string tau_trigger;
  bool weak_ran = false;
  double weak_max = 0.0;
  int weak_tests = 0;
  bool weak_degraded = false;
  double err_disc = 0.0;
  double err_cont = 0.0;
};

void run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                  int threads, std::span<const std::uint64_t> seeds, Manifest& man,
                  std::vector<std::string>& artifacts) {
  const CoefficientSet c = cfg.coefficients();
  check_stability(cfg, c, cfg.eps);
  const SolverConfig scfg = cfg.solver(cfg.eps);
  const ScalarField u0 = cfg.initial_state();

  double discrete_factor = 0.0, continuum_factor = 0.0;
  if (cfg.check_heat_oracle) {
    const double s_param = cfg.coeff_params.count("s") ? cfg.coeff_params.at("s") : 0.0;
    if (cfg.coeff_name != "frozen" || (cfg.K > 0 && s_param != 0.0) ||
        (cfg.u0_kind != "sine" && cfg.u0_kind != "cosine"))
      throw ConfigError("CONFIG_BAD_VALUE",
                        "check_heat_oracle needs the frozen family, zero noise and a "
                        "sine or cosine initial state");
    const double kappa_sq = cfg.dim * (kTwoPi * cfg.u0_mode) * (kTwoPi * cfg.u0_mode);
    const double theta = cfg.theta_split == 0.0 ? c.delta : cfg.theta_split;
    const double a = c.A(0.0)[0];
    const double rho =
        (1.0 - scfg.dt * (a - theta) * kappa_sq) / (1.0 + scfg.dt * theta * kappa_sq);
    discrete_factor = std::pow(rho, scfg.steps());
    continuum_factor = std::exp(-a * kappa_sq * scfg.dt * scfg.steps());
  }

  std::vector<SimSeedResult> results(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), threads, [&](int i) {
    const std::uint64_t seed = seeds[static_cast<std::size_t>(i)];
    const Trajectory traj = integrate(c, scfg, u0, seed);
    SimSeedResult& r = results[static_cast<std::size_t>(i)];
    r.checksum = traj.noise_checksum;
    r.clip_events = traj.energy.clip_events;
    r.energy_violations = traj.energy.energy_violations;
    for (double v : traj.energy.ito_residual)
      r.max_resid = std::max(r.max_resid, std::abs(v));

    const TauReport tau = tau_scan(traj, cfg.M_threshold);
    r.tau_hit = tau.hit;
    r.tau_time = tau.tau_time;
    r.tau_trigger = tau.trigger;

    if (cfg.tests > 0 && traj.snapshots.size() >= 2) {
      const WeakResidualReport weak = weak_residual(traj, c, std::max(cfg.tests, 5));
      r.weak_ran = true;
      r.weak_max = weak.max_residual;
      r.weak_tests = weak.test_functions;
      r.weak_degraded = weak.quadrature_degraded;
    }

    if (cfg.check_heat_oracle) {
      for (std::size_t p = 0; p < u0.values.size(); ++p) {
        r.err_disc = std::max(
            r.err_disc,
            std::abs(traj.final_state.values[p] - discrete_factor * u0.values[p]));
        r.err_cont = std::max(
            r.err_cont,
            std::abs(traj.final_state.values[p] - continuum_factor * u0.values[p]));
      }
    }

    const std::string tag = std::to_string(seed);
    CsvFile csv(dir / ("trajectory_" + tag + ".csv"),
                "time,h_norm_sq,h1_running,grad_sup,ito_residual");
    const EnergyReport& e = traj.energy;
    for (std::size_t m = 0; m < e.h_norm_sq.size(); ++m) {
      const std::string cells[] = {fmt(static_cast<double>(m) * scfg.dt),
                                   fmt(e.h_norm_sq[m]), fmt(e.h1_integral[m]),
                                   fmt(e.grad_sup[m]), fmt(e.ito_residual[m])};
      csv.row(cells);
    }
    save_field(dir / ("final_" + tag + ".field"), traj.final_state);
  });

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const SimSeedResult& r = results[i];
    const std::string tag = std::to_string(seeds[i]);
    man.noise_checksum(seeds[i], r.checksum);
    artifacts.push_back("trajectory_" + tag + ".csv");
    artifacts.push_back("final_" + tag + ".field");

    man.info("seed " + tag + ": max |energy residual| = " + fmt(r.max_resid) +
             ", clip events = " + std::to_string(r.clip_events));
    man.info("seed " + tag + ": tau_M " +
             (r.tau_hit ? "hit at t = " + fmt(r.tau_time) + " (" + r.tau_trigger + ")"
                        : "not hit by T"));
    if (r.weak_ran)
      man.info("seed " + tag + ": weak residual max = " + fmt(r.weak_max) + " over " +
               std::to_string(r.weak_tests) + " test functions" +
               (r.weak_degraded ? " (coarse quadrature)" : ""));

    man.check("energy_monitor_seed_" + tag, r.energy_violations == 0,
              std::to_string(r.energy_violations) + " violations");
    if (cfg.check_heat_oracle) {
      man.check("heat_oracle_discrete_seed_" + tag, r.err_disc <= 1e-8,
                "Linf " + fmt(r.err_disc) + " <= 1e-08");
      man.check("heat_oracle_continuum_seed_" + tag, r.err_cont <= 1e-6,
                "Linf " + fmt(r.err_cont) + " <= 1e-06");
    }
  }
}

// --- sweep_eps ------------------------------------------------------------

struct SweepSeedResult {
  std::uint64_t checksum = 0;
  std::vector<std::array<double, 5>> columns;  // per eps
  std::vector<double> unstopped;               // per pair, i-major
  std::vector<double> stopped;
  std::vector<char> tau_hit;                   // per eps
  std::vector<double> tau_time;
};

SweepSeedResult sweep_one_seed(const ExperimentConfig& cfg, const CoefficientSet& c,
                               const ScalarField& u0, std::uint64_t seed) {
  const int n_eps = static_cast<int>(cfg.eps_grid.size());
  const SolverConfig base = cfg.solver(cfg.eps_grid[0]);

  std::shared_ptr<const NoisePath> path;
  if (cfg.K > 0)
    path = std::make_shared<const NoisePath>(
        generate_path(seed, cfg.K, base.dt, base.steps()));

  std::vector<Trajectory> trajs;
  trajs.reserve(static_cast<std::size_t>(n_eps));
  for (double e : cfg.eps_grid) trajs.push_back(integrate(c, cfg.solver(e), u0, path));

  SweepSeedResult res;
  res.checksum = trajs[0].noise_checksum;
  for (const Trajectory& t : trajs)
    if (t.noise_checksum != res.checksum)
      throw ConfigError("COUPLING_CHECKSUM",
                        "seed " + std::to_string(seed) +
                            ": eps runs disagree on the driving path");

  const MonitorTable mt = uniform_monitor(trajs, cfg.monitor_factor);
  res.columns = mt.columns;

  std::vector<int> stop(static_cast<std::size_t>(n_eps));
  for (int e = 0; e < n_eps; ++e) {
    const TauReport tau = tau_scan(trajs[static_cast<std::size_t>(e)], cfg.M_threshold);
    res.tau_hit.push_back(tau.hit ? 1 : 0);
    res.tau_time.push_back(tau.tau_time);
    stop[static_cast<std::size_t>(e)] = tau.stop_snapshot;
  }

  ScalarField diff = ScalarField::zeros(base.grid);
  const auto dist = [&diff](const ScalarField& a, const ScalarField& b) {
    for (std::size_t p = 0; p < diff.values.size(); ++p)
      diff.values[p] = a.values[p] - b.values[p];
    return norm(diff, Norm::L2);
  };
  for (int i = 0; i < n_eps; ++i)
    for (int j = i + 1; j < n_eps; ++j) {
      const Trajectory& ti = trajs[static_cast<std::size_t>(i)];
      const Trajectory& tj = trajs[static_cast<std::size_t>(j)];
      res.unstopped.push_back(dist(ti.final_state, tj.final_state));
      const int s = std::min(stop[static_cast<std::size_t>(i)],
                             stop[static_cast<std::size_t>(j)]);
      res.stopped.push_back(dist(ti.snapshots[static_cast<std::size_t>(s)],
                                 tj.snapshots[static_cast<std::size_t>(s)]));
    }
  return res;
}

void run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& dir,
               int threads, std::span<const std::uint64_t> seeds, Manifest& man,
               std::vector<std::string>& artifacts) {
  const CoefficientSet c = cfg.coefficients();
  for (double e : cfg.eps_grid) check_stability(cfg, c, e);
  const ScalarField u0 = cfg.initial_state();

  const int n_eps = static_cast<int>(cfg.eps_grid.size());
  const int n_pairs = n_eps * (n_eps - 1) / 2;
  const int n_seeds = static_cast<int>(seeds.size());

  std::vector<SweepSeedResult> per_seed(static_cast<std::size_t>(n_seeds));
  parallel_for(n_seeds, threads, [&](int i) {
    per_seed[static_cast<std::size_t>(i)] =
        sweep_one_seed(cfg, c, u0, seeds[static_cast<std::size_t>(i)]);
  });
  for (int i = 0; i < n_seeds; ++i)
    man.noise_checksum(seeds[static_cast<std::size_t>(i)],
                       per_seed[static_cast<std::size_t>(i)].checksum);

  // Monitor means per eps and the max/min ratio down each column.
  const auto col_names = monitor_column_names();
  std::vector<std::array<double, 5>> col_mean(static_cast<std::size_t>(n_eps));
  for (int e = 0; e < n_eps; ++e)
    for (int k = 0; k < 5; ++k) {
      double s = 0.0;
      for (const SweepSeedResult& r : per_seed)
        s += r.columns[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
      col_mean[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)] = s / n_seeds;
    }
  {
    CsvFile csv(dir / "monitors.csv",
                std::string("eps,") + join(std::vector<std::string>(col_names.begin(),
                                                                    col_names.end()),
                                           ","));
    for (int e = 0; e < n_eps; ++e) {
      std::vector<std::string> cells = {fmt(cfg.eps_grid[static_cast<std::size_t>(e)])};
      for (int k = 0; k < 5; ++k)
        cells.push_back(fmt(col_mean[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)]));
      csv.row(cells);
    }
    artifacts.push_back("monitors.csv");
  }
  for (int k = 0; k < 5; ++k) {
    double lo = col_mean[0][static_cast<std::size_t>(k)];
    double hi = lo;
    for (int e = 1; e < n_eps; ++e) {
      const double v = col_mean[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double ratio =
        hi == lo ? 1.0 : (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
    man.check(std::string("monitor_ratio_") + col_names[static_cast<std::size_t>(k)],
              ratio <= cfg.monitor_factor,
              "max/min " + fmt(ratio) + " <= " + fmt(cfg.monitor_factor));
  }

  // Pairwise distances.
  std::vector<MeanSE> mean_stopped(static_cast<std::size_t>(n_pairs));
  std::vector<MeanSE> mean_unstopped(static_cast<std::size_t>(n_pairs));
  {
    std::vector<double> xs(static_cast<std::size_t>(n_seeds));
    for (int p = 0; p < n_pairs; ++p) {
      for (int i = 0; i < n_seeds; ++i)
        xs[static_cast<std::size_t>(i)] =
            per_seed[static_cast<std::size_t>(i)].stopped[static_cast<std::size_t>(p)];
      mean_stopped[static_cast<std::size_t>(p)] = mean_se(xs);
      for (int i = 0; i < n_seeds; ++i)
        xs[static_cast<std::size_t>(i)] =
            per_seed[static_cast<std::size_t>(i)].unstopped[static_cast<std::size_t>(p)];
      mean_unstopped[static_cast<std::size_t>(p)] = mean_se(xs);
    }
  }

  std::vector<double> pair_gap(static_cast<std::size_t>(n_pairs));
  {
    CsvFile csv(dir / "pairwise.csv",
                "eps_hi,eps_lo,gap,mean_stopped,stderr_stopped,mean_unstopped,"
                "stderr_unstopped");
    int p = 0;
    for (int i = 0; i < n_eps; ++i)
      for (int j = i + 1; j < n_eps; ++j, ++p) {
        const double gap = cfg.eps_grid[static_cast<std::size_t>(i)] -
                           cfg.eps_grid[static_cast<std::size_t>(j)];
        pair_gap[static_cast<std::size_t>(p)] = gap;
        const std::string cells[] = {
            fmt(cfg.eps_grid[static_cast<std::size_t>(i)]),
            fmt(cfg.eps_grid[static_cast<std::size_t>(j)]),
            fmt(gap),
            fmt(mean_stopped[static_cast<std::size_t>(p)].mean),
            fmt(mean_stopped[static_cast<std::size_t>(p)].se),
            fmt(mean_unstopped[static_cast<std::size_t>(p)].mean),
            fmt(mean_unstopped[static_cast<std::size_t>(p)].se)};
        csv.row(cells);
      }
    artifacts.push_back("pairwise.csv");
  }

  // Stopped never exceeds unstopped beyond roundoff.
  {
    bool ok = true;
    double worst = 0.0;
    for (int p = 0; p < n_pairs; ++p) {
      const double excess = mean_stopped[static_cast<std::size_t>(p)].mean -
                            mean_unstopped[static_cast<std::size_t>(p)].mean;
      worst = std::max(worst, excess);
      if (excess > 1e-12 * (1.0 + mean_unstopped[static_cast<std::size_t>(p)].mean))
        ok = false;
    }
    man.check("stopped_leq_unstopped", ok, "max excess " + fmt(worst));
  }

  // Cauchy column: distance to the smallest eps, nonincreasing within one
  // combined standard error per step.
  {
    CsvFile csv(dir / "cauchy.csv", "eps,mean_D_to_min,stderr");
    const auto pair_index = [n_eps](int i, int j) {
      return i * (2 * n_eps - i - 1) / 2 + (j - i - 1);
    };
    std::vector<MeanSE> to_min;
    for (int i = 0; i < n_eps - 1; ++i) {
      const int p = pair_index(i, n_eps - 1);
      to_min.push_back(mean_unstopped[static_cast<std::size_t>(p)]);
      const std::string cells[] = {fmt(cfg.eps_grid[static_cast<std::size_t>(i)]),
                                   fmt(to_min.back().mean), fmt(to_min.back().se)};
      csv.row(cells);
    }
    artifacts.push_back("cauchy.csv");

    bool monotone = true;
    for (std::size_t i = 0; i + 1 < to_min.size(); ++i) {
      const double slack = std::sqrt(to_min[i].se * to_min[i].se +
                                     to_min[i + 1].se * to_min[i + 1].se);
      if (to_min[i + 1].mean > to_min[i].mean + slack) monotone = false;
    }
    man.check("cauchy_monotone", monotone,
              "mean D(eps, eps_min) nonincreasing within 1 SE");

    if (cfg.plotdata) {
      std::vector<double> xs, ys;
      for (int i = 0; i < n_eps - 1; ++i) {
        xs.push_back(cfg.eps_grid[static_cast<std::size_t>(i)]);
        ys.push_back(to_min[static_cast<std::size_t>(i)].mean);
      }
      write_two_column(dir / "plotdata" / "cauchy.dat", xs, ys);
      artifacts.push_back("plotdata/cauchy.dat");
    }
  }

  // Rate fit on stopped pairwise means.
  {
    std::vector<double> xs, ys;
    double largest = 0.0;
    for (int p = 0; p < n_pairs; ++p) {
      largest = std::max(largest, mean_stopped[static_cast<std::size_t>(p)].mean);
      if (mean_stopped[static_cast<std::size_t>(p)].mean > 0.0) {
        xs.push_back(pair_gap[static_cast<std::size_t>(p)]);
        ys.push_back(mean_stopped[static_cast<std::size_t>(p)].mean);
      }
    }
    if (largest <= 1e-14) {
      man.check("rate_fit_degenerate", true, "all pairwise distances vanish");
    } else {
      if (static_cast<int>(xs.size()) < 3)
        throw ConfigError("REGRESSION_POINTS",
                          "only " + std::to_string(xs.size()) +
                              " usable pairs for the rate fit");
      const FitResult fit = loglog_fit(xs, ys);
      man.info("rate fit: exponent " + fmt(fit.slope) + ", R^2 " + fmt(fit.r2) +
               " on " + std::to_string(fit.points) + " pairs");
      man.check("rate_exponent_positive", fit.slope > 0.0,
                "exponent " + fmt(fit.slope));
      man.check("rate_fit_r2", fit.r2 >= 0.9, "R^2 " + fmt(fit.r2) + " >= 0.9");

      std::vector<double> pos_eps;
      for (double e : cfg.eps_grid)
        if (e > 0.0) pos_eps.push_back(e);
      if (pos_eps.size() >= 2) {
        const SemigroupConstants sc =
            estimate_semigroup_constants(cfg.solver(0.0).grid, pos_eps);
        man.info("mollifier exponent alpha_eta " + fmt(sc.alpha_eta) + " (R^2 " +
                 fmt(sc.r_squared) + "); sweep exponent / alpha_eta = " +
                 fmt(sc.alpha_eta > 0.0 ? fit.slope / sc.alpha_eta : 0.0));
      }
      if (cfg.plotdata) {
        write_two_column(dir / "plotdata" / "rate.dat", xs, ys);
        artifacts.push_back("plotdata/rate.dat");
      }
    }
  }

  // Stopping-time tail frequencies.
  {
    CsvFile csv(dir / "taus.csv", "eps,hit_fraction,mean_tau");
    for (int e = 0; e < n_eps; ++e) {
      double hits = 0.0, tsum = 0.0;
      for (const SweepSeedResult& r : per_seed) {
        hits += r.tau_hit[static_cast<std::size_t>(e)];
        tsum += r.tau_time[static_cast<std::size_t>(e)];
      }
      const std::string cells[] = {fmt(cfg.eps_grid[static_cast<std::size_t>(e)]),
                                   fmt(hits / n_seeds), fmt(tsum / n_seeds)};
      csv.row(cells);
    }
    artifacts.push_back("taus.csv");
  }
}

// --- uniqueness -----------------------------------------------------------

void run_uniqueness(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                    int /*threads*/, std::span<const std::uint64_t> seeds,
                    Manifest& man, std::vector<std::string>& artifacts) {
  const CoefficientSet c = cfg.coefficients();
  check_stability(cfg, c, cfg.eps);
  const SolverConfig scfg = cfg.solver(cfg.eps);

  const ScalarField u0_a = cfg.initial_state();
  ScalarField u0_b = u0_a;
  for (double& v : u0_b.values) v += cfg.u0_gap;

  for (std::uint64_t s : seeds) {
    if (cfg.K == 0) break;
    man.noise_checksum(s, generate_path(s, cfg.K, scfg.dt, scfg.steps()).checksum());
  }

  {
    std::shared_ptr<const NoisePath> path;
    if (cfg.K > 0)
      path = std::make_shared<const NoisePath>(
          generate_path(seeds[0], cfg.K, scfg.dt, scfg.steps()));
    const UniquenessRun twin =
        uniqueness_experiment(c, scfg, u0_a, u0_a, path, cfg.n_list);
    man.check("twin_bit_identical",
              twin.bit_identical && twin.checksum_a == twin.checksum_b,
              "checksum " + fmt_hex(twin.checksum_a));
    man.check("twin_zero_gap", twin.max_h_gap == 0.0,
              "max H gap " + fmt(twin.max_h_gap));
  }

  const UniquenessReport rep =
      uniqueness_study(c, scfg, u0_a, u0_b, seeds, cfg.n_list, 1.0);
  man.info("L1 gap of initial states = " + fmt(rep.l1_gap_u0));
  man.info("fitted C = " + fmt(rep.fitted_C) + ", lambda = " + fmt(rep.fitted_lambda));
  man.check("uniqueness_bound_feasible", rep.feasible,
            "C " + fmt(rep.fitted_C) + " <= 1 at lambda " + fmt(rep.fitted_lambda));

  {
    CsvFile csv(dir / "uniqueness.csv", "n,t,mean_big_phi,stderr,l1_gap_u0");
    for (std::size_t ni = 0; ni < rep.n_list.size(); ++ni)
      for (std::size_t t = 0; t < rep.times.size(); ++t) {
        const std::string cells[] = {std::to_string(rep.n_list[ni]),
                                     fmt(rep.times[t]), fmt(rep.mean_big_phi[ni][t]),
                                     fmt(rep.stderr_big_phi[ni][t]),
                                     fmt(rep.l1_gap_u0)};
        csv.row(cells);
      }
    artifacts.push_back("uniqueness.csv");
  }
  if (cfg.plotdata) {
    for (std::size_t ni = 0; ni < rep.n_list.size(); ++ni) {
      const std::string name = "gap_n" + std::to_string(rep.n_list[ni]) + ".dat";
      write_two_column(dir / "plotdata" / name, rep.times, rep.mean_big_phi[ni]);
      artifacts.push_back("plotdata/" + name);
    }
  }
}

// --- monotonicity ---------------------------------------------------------

void run_monotonicity(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                      int /*threads*/, std::span<const std::uint64_t> /*seeds*/,
                      Manifest& man, std::vector<std::string>& artifacts) {
  const CoefficientSet c = cfg.coefficients();
  const TorusGrid grid = TorusGrid::make(cfg.dim, cfg.n);
  const std::vector<double> eps_list =
      cfg.eps_grid.empty() ? std::vector<double>{cfg.eps} : cfg.eps_grid;

  CsvFile csv(dir / "monotonicity.csv", "eps,samples,fitted_delta3,fitted_C,violations");
  for (double e : eps_list) {
    const HeatSemigroup P(grid, e);
    const MonotonicityReport rep = monotonicity_probe(c, P, cfg.samples, grid);
    const std::string cells[] = {fmt(e), std::to_string(rep.sampled_pairs),
                                 fmt(rep.fitted_delta3), fmt(rep.fitted_C),
                                 std::to_string(rep.violations)};
    csv.row(cells);
    man.check("monotone_delta3_eps_" + fmt(e), rep.fitted_delta3 > 0.0,
              "delta3 " + fmt(rep.fitted_delta3) + ", C " + fmt(rep.fitted_C));
    man.check("monotone_violations_eps_" + fmt(e), rep.violations == 0,
              std::to_string(rep.violations) + " violations");
  }
  artifacts.push_back("monotonicity.csv");
}

// --- constants ------------------------------------------------------------

void run_constants(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                   int /*threads*/, std::span<const std::uint64_t> /*seeds*/,
                   Manifest& man, std::vector<std::string>& artifacts) {
  const CoefficientSet c = cfg.coefficients();
  const TorusGrid grid = TorusGrid::make(cfg.dim, cfg.n);
  const std::vector<double> eps_list = cfg.eps_grid.empty()
                                           ? std::vector<double>{0.02, 0.01, 0.005, 0.0025}
                                           : cfg.eps_grid;
  std::vector<double> pos_eps;
  for (double e : eps_list)
    if (e > 0.0) pos_eps.push_back(e);

  const ValidationReport vr = validate(c, cfg.samples, cfg.clip_R, std::max(cfg.K, 32));
  man.check("coefficients_validate", vr.pass, vr.summary());

  CsvFile csv(dir / "constants.csv", "name,value");
  const auto row = [&csv](const std::string& name, double value) {
    const std::string cells[] = {name, fmt(value)};
    csv.row(cells);
  };
  row("delta", c.delta);
  row("C_A", c.C_A);
  row("L_A", c.L_A);
  row("L_B", c.L_B);
  row("B_0", c.B_0);
  row("C_sigma", c.C_sigma);
  row("measured_eig_min", vr.measured_eig_min);
  row("measured_eig_max", vr.measured_eig_max);
  row("measured_lipschitz_A", vr.measured_lipschitz_A);
  row("measured_lipschitz_B", vr.measured_lipschitz_B);
  row("measured_sigma_lipschitz_sum", vr.measured_sigma_lipschitz_sum);
  row("sigma_tail", vr.sigma_tail);

  if (pos_eps.size() >= 2) {
    const SemigroupConstants sc = estimate_semigroup_constants(grid, pos_eps);
    row("alpha_eta", sc.alpha_eta);
    row("alpha_eta_r2", sc.r_squared);
    for (std::size_t i = 0; i < sc.eps.size(); ++i)
      row("C_eps_" + fmt(sc.eps[i]), sc.C_eps[i]);
    man.info(std::string("alpha_eta fit ") + (sc.reliable ? "reliable" : "unreliable") +
             " (R^2 " + fmt(sc.r_squared) + ")");
  }

  const HeatSemigroup P(grid, pos_eps.empty() ? cfg.eps : pos_eps.back());
  const OperatorBoundReport ob = operator_bound_probe(c, P, cfg.samples);
  row("operator_C_fit", ob.C_fit);
  row("operator_truncation_gap", ob.truncation_gap);
  man.check("operator_bound_finite", std::isfinite(ob.C_fit),
            "C_fit " + fmt(ob.C_fit));
  artifacts.push_back("constants.csv");
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                         int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  if (threads < 1) threads = 1;

  const std::filesystem::path dir = out_dir.empty() ? cfg.out_dir : out_dir;
  std::filesystem::create_directories(dir);
  if (cfg.plotdata) std::filesystem::create_directories(dir / "plotdata");

  const std::uint64_t offset = seed_offset_from_env();
  const std::vector<std::uint64_t> seeds = effective_seeds(cfg, offset);

  Manifest man(cfg);
  std::vector<std::string> artifacts;
  switch (cfg.kind) {
    case ExperimentKind::simulate:
      run_simulate(cfg, dir, threads, seeds, man, artifacts);
      break;
    case ExperimentKind::sweep_eps:
      run_sweep(cfg, dir, threads, seeds, man, artifacts);
      break;
    case ExperimentKind::uniqueness:
      run_uniqueness(cfg, dir, threads, seeds, man, artifacts);
      break;
    case ExperimentKind::monotonicity:
      run_monotonicity(cfg, dir, threads, seeds, man, artifacts);
      break;
    case ExperimentKind::constants:
      run_constants(cfg, dir, threads, seeds, man, artifacts);
      break;
  }

  man.write(dir / "manifest.txt", offset, artifacts);
  artifacts.push_back("manifest.txt");

  {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream timing(dir / "timing.txt");
    timing << "wall_seconds = " << fmt(secs) << "\n"
           << "threads = " << threads << "\n";
    artifacts.push_back("timing.txt");
  }

  RunResult res;
  res.exit_code = man.all_pass() ? 0 : 1;
  res.assertions = man.assertions();
  res.artifacts = std::move(artifacts);
  return res;
}

}  // namespace spde
