// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gwlab/energy.hpp"
#include "gwlab/green.hpp"
#include "gwlab/surface.hpp"
#include "gwlab/transport.hpp"

namespace gwlab {

// ---------------------------------------------------------------------------
// Kernel checks

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct GreenCheckOptions {
  std::size_t symmetry_pairs = 100000;
  std::size_t mean_zero_points = 100;
  std::size_t torus_grid = 512;          // K for mean-zero and Fourier-mode checks
  std::size_t sphere_nodes = 1000000;    // N for the sphere mean-zero check
  double torus_mean_zero_tol = 1e-3;
  double sphere_mean_zero_tol = 5e-3;
  int max_mode = 4;                      // Fourier modes with |m_x|, |m_y| <= max_mode
  double mode_tol = 1e-6;
  int max_degree = 8;                    // Legendre degrees 1..max_degree
  double legendre_tol = 1e-6;
  std::size_t near_diagonal_samples = 10000;
  double near_diagonal_bound = 10.0;
  std::size_t monte_carlo_pairs = 1000000;
  double monte_carlo_sigmas = 4.0;
  double oracle_tol = 1e-8;              // Ewald vs smoothed Fourier sums
  double integral_tol = 1e-8;            // tanh-sinh sigma^2 vs the series value
  std::uint64_t seed = 20261019;
  std::size_t workers = 0;
};

/// Runs symmetry, mean-zero, Fourier-mode (torus) or Legendre (sphere),
/// near-diagonal, oracle agreement (torus) and sigma^2 agreement checks.
std::vector<CheckResult> green_check(const GreenKernel& k, const GreenCheckOptions& options = {});

// ---------------------------------------------------------------------------
// Energy moments

std::vector<EnergyMomentReport> energy_moment_table(const SurfaceModel& s, const GreenKernel& k,
                                                    std::span<const std::size_t> n_grid,
                                                    std::size_t replicas, std::uint64_t seed,
                                                    std::size_t workers = 0);

// ---------------------------------------------------------------------------
// W2 scans and the falsifier

struct ScanConfig {
  SurfaceModel surface = SurfaceModel::torus();
  std::vector<std::size_t> n_grid{128, 256, 512, 1024, 2048, 4096};
  std::size_t replicas = 200;
  std::uint64_t seed = 20261019;
  W2Options w2;
  GreenOptions green;  // kernel for S_n
  bool energy = false;  // also compute S_n on each replica (falsifier)
  std::size_t workers = 0;
  std::size_t bootstrap_resamples = 1000;
  bool cross_validate = true;
};

/// One replica of a scan. The point set is a pure function of
/// (seed, n, replica), so any row can be recomputed.
struct ReplicaRecord {
  std::size_t n = 0;
  std::size_t replica = 0;
  bool failed = false;
  std::string error;
  double w2sq = 0.0;
  double bias_bound = 0.0;
  double energy = 0.0;  // S_n (falsifier scans)
  double ratio = 0.0;   // W2 / (n^-1/2 + |S_n|^1/2 / n) (falsifier scans)
};

struct ScanRow {
  std::size_t n = 0;
  std::size_t replicas = 0;  // successful replicas
  std::size_t failed = 0;
  std::string solver;
  std::size_t resolution = 0;
  double mean_w2sq = 0.0;
  double se_w2sq = 0.0;
  double ci_low = 0.0;   // 95% CI widened by the discretization bracket
  double ci_high = 0.0;
  double bias_bound = 0.0;
  double scaled = 0.0;   // n * mean_w2sq
  double log_band = 0.0;  // sqrt(log n * log log n), per unit of the unknown constant
  // Falsifier columns.
  double mean_abs_s = 0.0;
  double se_abs_s = 0.0;
  double l_n = 0.0;
  double l_ci_low = 0.0;
  double l_ci_high = 0.0;
  double median_ratio_sq = 0.0;
};

struct FitReport {
  std::size_t points = 0;
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  double intercept_se = 0.0;
  double slope_ci_low = 0.0;   // replica bootstrap, percentile
  double slope_ci_high = 0.0;
  double target_slope = 0.0;   // vol / (4 pi)
  double slope_ratio = 0.0;    // slope / target_slope
  /// Least-squares slope of sqrt(log n log log n) against log n over the
  /// grid: how much one unit of the unknown correction constant can tilt
  /// the fitted slope.
  double band_slope = 0.0;
};

struct FalsifierReport {
  double sigma2 = 0.0;
  double normalizer = 0.0;  // 2 (1 + sqrt(2) sigma)
  double slope = 0.0;       // regression of L_n on log n
  double slope_se = 0.0;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
  double predicted_slope = 0.0;  // vol / (8 pi (1 + sqrt(2) sigma))
  /// Increments ending at grid points in the top half of the grid, each
  /// compared with twice the combined standard error.
  std::vector<double> top_increments;
  std::vector<double> top_thresholds;
  bool monotone_top_half = false;
  bool slope_positive = false;  // CI excludes zero from above
};

struct CrossValidation {
  bool performed = false;
  std::string note;
  std::size_t n = 0;
  std::size_t resolution = 0;
  std::string solver;
  double solver_value = 0.0;
  double exact_value = 0.0;
  double tolerance = 0.0;  // allowed |W2 difference|
  bool consistent = false;
};

struct ScanResult {
  ScanConfig config;
  std::vector<ScanRow> rows;
  std::vector<ReplicaRecord> replicas;  // all replicas, grid order then index
  std::optional<FitReport> fit;
  std::optional<FalsifierReport> falsifier;
  CrossValidation cross_validation;
  bool partial = false;
  std::string abort_reason;
  double wall_seconds = 0.0;
};

/// Points of replica r at sample size n.
std::vector<Point> replica_points(const SurfaceModel& s, std::uint64_t seed, std::size_t n,
                                  std::size_t replica);

/// Runs the scan. Replica failures are counted; if more than 1% of the
/// replicas at some n fail, the scan stops and returns partial = true with
/// the rows completed so far. The fit requires at least 4 completed rows.
ScanResult w2_scan(const ScanConfig& config);

/// w2_scan with energy = true plus the implied-constant analysis.
ScanResult falsifier_scan(ScanConfig config);

/// Least-squares fit of y_n = n * mean W2^2 against log n.
/// Throws InputError with fewer than 4 rows or fewer than 2 distinct n.
FitReport fit_log_slope(std::span<const ScanRow> rows, const SurfaceModel& s);

/// W2(mu_n, dx) / (n^{-1/2} + |S_n|^{1/2} / n) for one configuration;
/// 0 when two points coincide (S_n = +infinity).
double per_config_ratio(const SurfaceModel& s, const GreenKernel& k, std::span<const Point> pts,
                        const W2Options& options = {});

}  // namespace gwlab
