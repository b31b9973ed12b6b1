// SPDX-License-Identifier: Apache-2.0
#include "gwlab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <vector>

#include "gwlab/energy.hpp"
#include "gwlab/error.hpp"
#include "gwlab/experiments.hpp"
#include "gwlab/green.hpp"
#include "gwlab/transport.hpp"

#ifndef GWLAB_VERSION
#define GWLAB_VERSION "0.0.0"
#endif

namespace gwlab {

std::string_view version() { return GWLAB_VERSION; }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 20261019;

struct RunConfig {
  std::string subcommand;
  std::string surface = "torus";
  std::string n_grid;
  std::size_t replicas = 0;
  std::uint64_t seed = kDefaultSeed;
  std::string solver = "auto";
  std::size_t grid_res = 0;
  std::string epsilon_schedule;
  std::string out = ".";
  std::size_t workers = 0;
  double kernel_offset = 0.0;
  double accuracy = 1e-10;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw UsageError(std::string("empty entry in ") + what);
    item = item.substr(b, e - b + 1);
    T v{};
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (r.ec != std::errc() || r.ptr != item.data() + item.size()) {
      throw UsageError(std::string("cannot parse '") + item + "' in " + what);
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// JSON cannot hold inf/nan; they are written as strings.
ordered_json num(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

ordered_json config_json(const RunConfig& c, const std::vector<std::size_t>& grid,
                         std::size_t replicas, const GreenKernel& k) {
  ordered_json j;
  j["subcommand"] = c.subcommand;
  j["surface"] = c.surface;
  j["n_grid"] = grid;
  j["replicas"] = replicas;
  j["seed"] = c.seed;
  j["solver"] = c.solver;
  j["grid_res"] = c.grid_res;
  j["epsilon_schedule"] = c.epsilon_schedule;
  j["workers"] = c.workers;
  j["kernel"] = {{"method", std::string(to_string(k.method()))},
                 {"accuracy", k.options().accuracy},
                 {"ewald_tau", k.options().ewald_tau},
                 {"fourier_cutoff", k.options().fourier_cutoff},
                 {"smoothing_order", k.options().smoothing_order},
                 {"constant_offset", k.constant_offset()}};
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + '\n';
}

std::string fd(double x) { return format_double(x); }
std::string fz(std::size_t x) { return std::to_string(x); }

GreenKernel make_kernel(const RunConfig& c, const SurfaceModel& s) {
  GreenOptions o;
  o.accuracy = c.accuracy;
  o.constant_offset = c.kernel_offset;
  return GreenKernel::for_surface(s, o);
}

// ---------------------------------------------------------------------------

int cmd_green_check(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  const SurfaceModel s = SurfaceModel::from_name(c.surface);
  const GreenKernel k = make_kernel(c, s);
  GreenCheckOptions o;
  o.seed = c.seed;
  o.workers = c.workers;
  if (c.grid_res) (s.is_torus() ? o.torus_grid : o.sphere_nodes) = c.grid_res;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  const auto checks = green_check(k, o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool all = true;
  std::string report = "check,measured,threshold,status\n";
  ordered_json arr = ordered_json::array();
  for (const CheckResult& r : checks) {
    all = all && r.passed;
    report += csv_line({r.name, fd(r.measured), fd(r.threshold), r.passed ? "pass" : "FAIL"});
    arr.push_back({{"name", r.name},
                   {"measured", num(r.measured)},
                   {"threshold", r.threshold},
                   {"passed", r.passed}});
    out << (r.passed ? "pass " : "FAIL ") << r.name << ": " << fd(r.measured)
        << " (threshold " << fd(r.threshold) << ")\n";
  }
  write_text(dir / "green-check.csv", report);
  ordered_json m;
  m["version"] = version();
  m["seed"] = c.seed;
  m["config"] = config_json(c, {}, 0, k);
  m["checks"] = arr;
  m["passed"] = all;
  m["partial"] = false;
  m["wall_clock"] = {{"started_utc", started}, {"seconds", secs}};
  write_text(dir / "green-check.json", m.dump(2) + "\n");
  if (!all) {
    for (const CheckResult& r : checks) {
      if (!r.passed) out << "failed check: " << r.name << "\n";
    }
  }
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_energy_moments(const RunConfig& c, const fs::path& dir, std::ostream& out) {
  const SurfaceModel s = SurfaceModel::from_name(c.surface);
  const GreenKernel k = make_kernel(c, s);
  const auto grid = c.n_grid.empty() ? std::vector<std::size_t>{5, 10, 50, 100}
                                     : parse_list<std::size_t>(c.n_grid, "--n-grid");
  const std::size_t replicas = c.replicas ? c.replicas : 10000;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  const auto rows = energy_moment_table(s, k, grid, replicas, c.seed, c.workers);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::string csv =
      "n,replicas,mean_S,se_S,mean_S2,se_S2,predicted_S2,ratio,ratio_ci_low,ratio_ci_high\n";
  ordered_json arr = ordered_json::array();
  for (const EnergyMomentReport& r : rows) {
    csv += csv_line({fz(r.n), fz(r.replicas), fd(r.mean_s), fd(r.se_s), fd(r.mean_s2), fd(r.se_s2),
                     fd(r.predicted_s2), fd(r.ratio), fd(r.ratio_ci_low), fd(r.ratio_ci_high)});
    arr.push_back({{"n", r.n},
                   {"replicas", r.replicas},
                   {"excluded", r.excluded},
                   {"mean_S", r.mean_s},
                   {"se_S", r.se_s},
                   {"mean_S2", r.mean_s2},
                   {"se_S2", r.se_s2},
                   {"mean_abs_S", r.mean_abs_s},
                   {"se_abs_S", r.se_abs_s},
                   {"sigma2", r.sigma2},
                   {"predicted_S2", r.predicted_s2},
                   {"ratio", r.ratio},
                   {"ratio_ci_low", r.ratio_ci_low},
                   {"ratio_ci_high", r.ratio_ci_high},
                   {"abs_bound", r.abs_bound},
                   {"abs_bound_loose", r.abs_bound_loose}});
    out << "n=" << r.n << " mean S=" << fd(r.mean_s) << " (se " << fd(r.se_s)
        << ") ratio=" << fd(r.ratio) << " [" << fd(r.ratio_ci_low) << ", "
        << fd(r.ratio_ci_high) << "]\n";
  }
  write_text(dir / "energy-moments.csv", csv);
  ordered_json m;
  m["version"] = version();
  m["seed"] = c.seed;
  m["config"] = config_json(c, grid, replicas, k);
  m["rows"] = arr;
  m["partial"] = false;
  m["wall_clock"] = {{"started_utc", started}, {"seconds", secs}};
  write_text(dir / "energy-moments.json", m.dump(2) + "\n");
  return kExitOk;
}

ordered_json scan_json(const RunConfig& c, const ScanResult& r, const GreenKernel& k,
                       const std::string& started) {
  ordered_json m;
  m["version"] = version();
  m["seed"] = c.seed;
  m["config"] = config_json(c, r.config.n_grid, r.config.replicas, k);
  ordered_json rows = ordered_json::array();
  for (const ScanRow& row : r.rows) {
    ordered_json j{{"n", row.n},
                   {"replicas", row.replicas},
                   {"failed", row.failed},
                   {"solver", row.solver},
                   {"resolution", row.resolution},
                   {"mean_W2sq", row.mean_w2sq},
                   {"se_W2sq", row.se_w2sq},
                   {"ci_low", row.ci_low},
                   {"ci_high", row.ci_high},
                   {"bias_bound", row.bias_bound},
                   {"n_mean_W2sq", row.scaled},
                   {"log_band", row.log_band}};
    if (r.falsifier) {
      j["mean_abs_S"] = row.mean_abs_s;
      j["se_abs_S"] = row.se_abs_s;
      j["L_n"] = row.l_n;
      j["L_ci_low"] = row.l_ci_low;
      j["L_ci_high"] = row.l_ci_high;
      j["median_ratio_sq"] = row.median_ratio_sq;
    }
    rows.push_back(j);
  }
  m["rows"] = rows;
  if (r.fit) {
    const FitReport& f = *r.fit;
    m["fit"] = {{"points", f.points},
                {"slope", f.slope},
                {"slope_se", f.slope_se},
                {"slope_ci_low", f.slope_ci_low},
                {"slope_ci_high", f.slope_ci_high},
                {"intercept", f.intercept},
                {"intercept_se", f.intercept_se},
                {"target_slope", f.target_slope},
                {"slope_ratio", f.slope_ratio},
                {"band_slope", f.band_slope}};
  } else {
    m["fit"] = nullptr;
  }
  if (r.falsifier) {
    const FalsifierReport& f = *r.falsifier;
    m["falsifier"] = {{"sigma2", f.sigma2},
                      {"normalizer", f.normalizer},
                      {"slope", f.slope},
                      {"slope_se", f.slope_se},
                      {"slope_ci_low", f.slope_ci_low},
                      {"slope_ci_high", f.slope_ci_high},
                      {"predicted_slope", f.predicted_slope},
                      {"top_increments", f.top_increments},
                      {"top_thresholds", f.top_thresholds},
                      {"monotone_top_half", f.monotone_top_half},
                      {"slope_positive", f.slope_positive}};
  }
  const CrossValidation& cv = r.cross_validation;
  m["cross_validation"] = {{"performed", cv.performed},
                           {"note", cv.note},
                           {"n", cv.n},
                           {"resolution", cv.resolution},
                           {"solver", cv.solver},
                           {"solver_value", cv.solver_value},
                           {"exact_value", cv.exact_value},
                           {"tolerance", cv.tolerance},
                           {"consistent", cv.consistent}};
  m["partial"] = r.partial;
  m["abort_reason"] = r.abort_reason;
  m["wall_clock"] = {{"started_utc", started}, {"seconds", r.wall_seconds}};
  return m;
}

int cmd_scan(const RunConfig& c, const fs::path& dir, std::ostream& out, bool falsify) {
  const SurfaceModel s = SurfaceModel::from_name(c.surface);
  ScanConfig sc;
  sc.surface = s;
  if (!c.n_grid.empty()) sc.n_grid = parse_list<std::size_t>(c.n_grid, "--n-grid");
  if (c.replicas) sc.replicas = c.replicas;
  sc.seed = c.seed;
  sc.workers = c.workers;
  sc.w2.solver = solver_from_name(c.solver);
  sc.w2.resolution = c.grid_res;
  if (!c.epsilon_schedule.empty()) {
    sc.w2.entropic.schedule = parse_list<double>(c.epsilon_schedule, "--epsilon-schedule");
  }
  sc.green.accuracy = c.accuracy;
  sc.green.constant_offset = c.kernel_offset;
  const GreenKernel k = make_kernel(c, s);
  const std::string name = falsify ? "falsify" : "w2-scan";
  const std::string started = utc_now();

  ScanResult r;
  std::string failure;
  try {
    r = falsify ? falsifier_scan(sc) : w2_scan(sc);
  } catch (const ConvergenceError& e) {
    r.config = sc;
    r.partial = true;
    r.abort_reason = e.what();
    failure = e.what();
  }

  std::string csv = "n,replicas,mean_W2sq,ci_low,ci_high,bias_bound";
  csv += falsify ? ",mean_abs_S,L_n,L_ci_low,L_ci_high\n" : "\n";
  for (const ScanRow& row : r.rows) {
    std::vector<std::string> cells{fz(row.n),       fz(row.replicas), fd(row.mean_w2sq),
                                   fd(row.ci_low),  fd(row.ci_high),  fd(row.bias_bound)};
    if (falsify) {
      for (double v : {row.mean_abs_s, row.l_n, row.l_ci_low, row.l_ci_high}) cells.push_back(fd(v));
    }
    csv += csv_line(cells);
  }
  write_text(dir / (name + ".csv"), csv);

  std::string reps = "n,replica,failed,W2sq,bias_bound";
  reps += falsify ? ",S_n,ratio\n" : "\n";
  for (const ReplicaRecord& rec : r.replicas) {
    std::vector<std::string> cells{fz(rec.n), fz(rec.replica), rec.failed ? "1" : "0",
                                   fd(rec.w2sq), fd(rec.bias_bound)};
    if (falsify) {
      cells.push_back(fd(rec.energy));
      cells.push_back(fd(rec.ratio));
    }
    reps += csv_line(cells);
  }
  write_text(dir / (name + "-replicas.csv"), reps);
  write_text(dir / (name + ".json"), scan_json(c, r, k, started).dump(2) + "\n");

  for (const ScanRow& row : r.rows) {
    out << "n=" << row.n << " n*E[W2^2]=" << fd(row.scaled);
    if (falsify) out << " L_n=" << fd(row.l_n);
    out << "\n";
  }
  if (r.fit) {
    out << "slope " << fd(r.fit->slope) << " [" << fd(r.fit->slope_ci_low) << ", "
        << fd(r.fit->slope_ci_high) << "], target " << fd(r.fit->target_slope) << "\n";
  }
  if (r.partial) {
    out << "partial run: " << r.abort_reason << "\n";
    return kExitInternal;
  }
  bool ok = !r.cross_validation.performed || r.cross_validation.consistent;
  if (!ok) out << "cross-validation inconsistent at n=" << r.cross_validation.n << "\n";
  if (falsify && r.falsifier) {
    const bool established = r.falsifier->monotone_top_half && r.falsifier->slope_positive;
    out << "L_n growth " << (established ? "established" : "NOT established") << "\n";
    ok = ok && established;
  }
  return ok ? kExitOk : kExitCheckFailed;
}

void add_common(CLI::App* sub, RunConfig& c, bool scans) {
  sub->add_option("--surface", c.surface, "Surface: torus or sphere")
      ->envname("GWLAB_SURFACE")
      ->capture_default_str();
  sub->add_option("--seed", c.seed, "Master seed")->envname("GWLAB_SEED")->capture_default_str();
  sub->add_option("--out", c.out, "Existing output directory")
      ->envname("GWLAB_OUT")
      ->capture_default_str();
  sub->add_option("--workers", c.workers, "Worker threads (0 = hardware concurrency)")
      ->envname("GWLAB_WORKERS")
      ->capture_default_str();
  sub->add_option("--grid-res", c.grid_res,
                  scans ? "Quadrature resolution (torus side K / sphere points N); 0 = "
                          "max(64, ceil(8 sqrt n)) / max(4096, 64 n)"
                        : "Quadrature resolution for mean-zero checks; 0 = 512 (torus) / 1e6 (sphere)")
      ->envname("GWLAB_GRID_RES")
      ->capture_default_str();
  sub->add_option("--kernel-offset", c.kernel_offset,
                  "Constant added to the Green kernel (fault injection)")
      ->envname("GWLAB_KERNEL_OFFSET")
      ->capture_default_str();
  sub->add_option("--accuracy", c.accuracy, "Target absolute accuracy of the torus kernel")
      ->envname("GWLAB_ACCURACY")
      ->capture_default_str();
}

void add_sampling(CLI::App* sub, RunConfig& c, const char* grid_default,
                  const char* replicas_default) {
  sub->add_option("--n-grid", c.n_grid,
                  std::string("Comma-separated sample sizes (default ") + grid_default + ")")
      ->envname("GWLAB_N_GRID");
  sub->add_option("--replicas", c.replicas,
                  std::string("Replicas per n (default ") + replicas_default + ")")
      ->envname("GWLAB_REPLICAS");
}

void add_solver(CLI::App* sub, RunConfig& c) {
  sub->add_option("--solver", c.solver, "W2 solver: auto, exact, entropic or semidiscrete")
      ->envname("GWLAB_SOLVER")
      ->capture_default_str();
  sub->add_option("--epsilon-schedule", c.epsilon_schedule,
                  "Comma-separated decreasing entropic regularizations (default: halving from "
                  "0.1 max cost to 1e-4)")
      ->envname("GWLAB_EPSILON_SCHEDULE");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Green kernels, Green energy and W2 to the uniform measure on the flat torus "
               "and the unit sphere"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));
  RunConfig c;

  auto* green = app.add_subcommand("green-check", "Verify the Green kernel numerically");
  add_common(green, c, false);

  auto* energy = app.add_subcommand("energy-moments", "Monte Carlo moments of the Green energy S_n");
  add_common(energy, c, false);
  add_sampling(energy, c, "5,10,50,100", "10000");

  auto* scan = app.add_subcommand("w2-scan", "E[W2^2] of empirical measures across an n-grid");
  add_common(scan, c, true);
  add_sampling(scan, c, "128,256,512,1024,2048,4096", "200");
  add_solver(scan, c);

  auto* falsify =
      app.add_subcommand("falsify", "W2 scan with S_n on the same replicas and implied constants");
  add_common(falsify, c, true);
  add_sampling(falsify, c, "128,256,512,1024,2048,4096", "200");
  add_solver(falsify, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    const fs::path dir(c.out);
    if (!fs::is_directory(dir)) throw UsageError("output directory does not exist: " + c.out);
    (void)SurfaceModel::from_name(c.surface);
    (void)solver_from_name(c.solver);
    if (green->parsed()) {
      c.subcommand = "green-check";
      return cmd_green_check(c, dir, out);
    }
    if (energy->parsed()) {
      c.subcommand = "energy-moments";
      return cmd_energy_moments(c, dir, out);
    }
    if (scan->parsed()) {
      c.subcommand = "w2-scan";
      return cmd_scan(c, dir, out, false);
    }
    c.subcommand = "falsify";
    return cmd_scan(c, dir, out, true);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace gwlab
