// SPDX-License-Identifier: Apache-2.0
#include "gwlab/experiments.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numbers>

#include "gwlab/error.hpp"
#include "gwlab/parallel.hpp"
#include "gwlab/random.hpp"
#include "gwlab/stats.hpp"

namespace gwlab {
namespace {

constexpr double kPi = std::numbers::pi;

CheckResult check(std::string name, double measured, double threshold) {
  return {std::move(name), measured, threshold, measured <= threshold};
}

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

std::vector<CheckResult> green_check(const GreenKernel& k, const GreenCheckOptions& o) {
  const SurfaceModel& s = k.surface();
  const StreamFamily family(o.seed, experiment_id::kGreenCheck);
  std::vector<CheckResult> out;

  {
    RandomStream st = family.substream(0, 0);
    double worst = 0.0;
    for (std::size_t i = 0; i < o.symmetry_pairs; ++i) {
      const auto p = sample_uniform(s, st, 2);
      worst = std::max(worst, std::abs(k.eval_fast(p[0], p[1]) - k.eval_fast(p[1], p[0])));
    }
    out.push_back(check("symmetry", worst, 1e-12));
  }

  {
    RandomStream st = family.substream(1, 0);
    const auto base = sample_uniform(s, st, o.mean_zero_points);
    const WeightedPointSet q = quadrature(s, s.is_torus() ? o.torus_grid : o.sphere_nodes);
    std::vector<double> res(base.size());
    parallel_for(base.size(), o.workers,
                 [&](std::size_t i) { res[i] = mean_zero_residual(k, base[i], q); });
    out.push_back(check("mean_zero", max_of(res),
                        s.is_torus() ? o.torus_mean_zero_tol : o.sphere_mean_zero_tol));
  }

  if (s.is_torus()) {
    const WeightedPointSet q = quadrature(s, o.torus_grid);
    RandomStream st = family.substream(2, 0);
    std::vector<Point> base{{0.0, 0.0, 0.0}, {0.25, 0.25, 0.0}};
    for (const Point& p : sample_uniform(s, st, 2)) base.push_back(p);
    std::vector<std::array<int, 2>> modes;
    for (int a = -o.max_mode; a <= o.max_mode; ++a) {
      for (int b = -o.max_mode; b <= o.max_mode; ++b) {
        if ((a != 0 || b != 0) && a * a + b * b <= o.max_mode * o.max_mode) modes.push_back({a, b});
      }
    }
    std::vector<double> res(modes.size() * base.size());
    parallel_for(res.size(), o.workers, [&](std::size_t t) {
      res[t] = fourier_mode_check(k, modes[t / base.size()], base[t % base.size()], q);
    });
    out.push_back(check("fourier_modes", max_of(res), o.mode_tol));

    GreenOptions oracle_opts = k.options();
    oracle_opts.constant_offset = k.constant_offset();
    const GreenKernel oracle = GreenKernel::torus_fourier_oracle(oracle_opts);
    double worst = 0.0;
    for (int a = 0; a < 32; ++a) {
      for (int b = 0; b < 32; ++b) {
        double dx = a / 32.0, dy = b / 32.0;
        if (dx > 0.5) dx -= 1.0;
        if (dy > 0.5) dy -= 1.0;
        if (std::hypot(dx, dy) < 0.05) continue;
        const Point y{a / 32.0, b / 32.0, 0.0};
        worst = std::max(worst, std::abs(k.eval_fast({0.0, 0.0, 0.0}, y) -
                                         oracle.eval_fast({0.0, 0.0, 0.0}, y)));
      }
    }
    out.push_back(check("fourier_oracle", worst, o.oracle_tol));
  } else {
    double worst = 0.0;
    for (int ell = 0; ell <= o.max_degree; ++ell) {
      worst = std::max(worst, std::abs(legendre_projection(k, ell) - legendre_target(ell)));
    }
    out.push_back(check("legendre", worst, o.legendre_tol));
  }

  {
    NearDiagonalOptions nd;
    nd.seed = o.seed;
    out.push_back(check("near_diagonal", near_diagonal_regularity(k, o.near_diagonal_samples, nd),
                        o.near_diagonal_bound));
  }

  {
    const Sigma2Report cert = certified_sigma2(k);
    Sigma2Options mc_opts;
    mc_opts.monte_carlo_pairs = o.monte_carlo_pairs;
    mc_opts.seed = o.seed;
    const Sigma2Report mc = sigma2(k, Sigma2Method::MonteCarlo, mc_opts);
    const double z = std::abs(mc.value - cert.value) / mc.error_estimate;
    out.push_back(check("sigma2_monte_carlo", z, o.monte_carlo_sigmas));
    const Sigma2Report quad = sigma2(k, Sigma2Method::Quadrature);
    out.push_back(check("sigma2_quadrature", std::abs(quad.value - cert.value),
                        quad.error_estimate + cert.error_estimate));
    const Sigma2Report integral = sigma2(k, Sigma2Method::Integral);
    out.push_back(check("sigma2_integral", std::abs(integral.value - cert.value), o.integral_tol));
  }
  return out;
}

std::vector<EnergyMomentReport> energy_moment_table(const SurfaceModel& s, const GreenKernel& k,
                                                    std::span<const std::size_t> n_grid,
                                                    std::size_t replicas, std::uint64_t seed,
                                                    std::size_t workers) {
  const StreamFamily family(seed, experiment_id::kEnergyMoments);
  std::vector<EnergyMomentReport> out;
  for (std::size_t n : n_grid) {
    out.push_back(energy_moments(s, k, n, replicas, family, {.workers = workers}));
  }
  return out;
}

std::vector<Point> replica_points(const SurfaceModel& s, std::uint64_t seed, std::size_t n,
                                  std::size_t replica) {
  RandomStream st = StreamFamily(seed, experiment_id::kW2Scan)
                        .substream(static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(replica));
  return sample_uniform(s, st, n);
}

namespace {

double ratio_from(double w2, double energy, std::size_t n) {
  if (!std::isfinite(energy)) return 0.0;
  const double dn = static_cast<double>(n);
  return w2 / (1.0 / std::sqrt(dn) + std::sqrt(std::abs(energy)) / dn);
}

double log_band_of(double n) {
  const double l = std::log(n);
  return std::sqrt(l * std::log(l));
}

/// Least-squares slope of y on log n.
double slope_of(std::span<const double> log_n, std::span<const double> y) {
  return least_squares(log_n, y).slope;
}

void cross_validate(ScanResult& result) {
  const ScanConfig& c = result.config;
  CrossValidation& cv = result.cross_validation;
  for (std::size_t n : c.n_grid) {
    const std::size_t res = c.w2.resolution ? c.w2.resolution : default_resolution(c.surface, n);
    const SolverChoice choice = resolve_solver(c.surface, n, res, c.w2);
    if (choice == SolverChoice::Exact) continue;
    const double grid = c.surface.is_torus() ? static_cast<double>(res) * res
                                             : static_cast<double>(res);
    if (static_cast<double>(n) * grid > 1.5e7) {
      cv.note = "first non-exact size too large for an exact reference";
      return;
    }
    const auto pts = replica_points(c.surface, c.seed, n, 0);
    W2Options exact = c.w2;
    exact.solver = SolverChoice::Exact;
    exact.resolution = res;
    W2Options chosen = c.w2;
    chosen.solver = choice;
    chosen.resolution = res;
    const W2Estimate a = w2_to_uniform(c.surface, pts, chosen);
    const W2Estimate b = w2_to_uniform(c.surface, pts, exact);
    cv.performed = true;
    cv.n = n;
    cv.resolution = res;
    cv.solver = std::string(to_string(choice));
    cv.solver_value = a.transport.value;
    cv.exact_value = b.transport.value;
    if (choice == SolverChoice::SemiDiscrete) {
      // The semi-discrete value is W2(mu_n, dx); the grid bracket must hold it.
      cv.tolerance = b.bias_bound;
      cv.note = "semi-discrete W2 inside the exact grid bracket";
    } else {
      // Same discrete problem; relative value error 1e-3 is about 5e-4 on W2.
      cv.tolerance = 5e-4 * b.w2 + 1e-12;
      cv.note = "entropic vs exact on the same grid";
    }
    cv.consistent = std::abs(a.w2 - b.w2) <= cv.tolerance;
    return;
  }
  cv.note = "every grid size used the exact solver";
}

}  // namespace

FitReport fit_log_slope(std::span<const ScanRow> rows, const SurfaceModel& s) {
  if (rows.size() < 4) throw InputError("fit_log_slope: need at least 4 grid points");
  std::vector<double> x, y, band;
  for (const ScanRow& r : rows) {
    x.push_back(std::log(static_cast<double>(r.n)));
    y.push_back(static_cast<double>(r.n) * r.mean_w2sq);
    band.push_back(log_band_of(static_cast<double>(r.n)));
  }
  const LinearFit f = least_squares(x, y);
  FitReport rep;
  rep.points = rows.size();
  rep.slope = f.slope;
  rep.slope_se = f.slope_se;
  rep.intercept = f.intercept;
  rep.intercept_se = f.intercept_se;
  rep.slope_ci_low = f.slope - kZ95 * f.slope_se;
  rep.slope_ci_high = f.slope + kZ95 * f.slope_se;
  rep.target_slope = s.volume() / (4.0 * kPi);
  rep.slope_ratio = rep.slope / rep.target_slope;
  rep.band_slope = least_squares(x, band).slope;
  return rep;
}

double per_config_ratio(const SurfaceModel& s, const GreenKernel& k, std::span<const Point> pts,
                        const W2Options& options) {
  if (pts.size() < 2) throw InputError("per_config_ratio: need n >= 2");
  const double energy = green_energy(k, pts);
  if (!std::isfinite(energy)) return 0.0;
  return ratio_from(w2_to_uniform(s, pts, options).w2, energy, pts.size());
}

ScanResult w2_scan(const ScanConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  if (config.n_grid.empty()) throw InputError("w2_scan: empty n-grid");
  for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
    if (config.n_grid[i] < 2) throw InputError("w2_scan: every n must be at least 2");
    if (i > 0 && config.n_grid[i] <= config.n_grid[i - 1]) {
      throw InputError("w2_scan: n-grid must be strictly increasing");
    }
  }
  if (config.replicas < 2) throw InputError("w2_scan: need at least 2 replicas");

  ScanResult result;
  result.config = config;
  const SurfaceModel& s = config.surface;
  std::optional<GreenKernel> kernel;
  if (config.energy) kernel = GreenKernel::for_surface(s, config.green);

  // Per-n replica means for the bootstrap.
  std::vector<std::vector<double>> per_n_values;

  for (std::size_t n : config.n_grid) {
    std::vector<ReplicaRecord> recs(config.replicas);
    parallel_for(config.replicas, config.workers, [&](std::size_t r) {
      ReplicaRecord& rec = recs[r];
      rec.n = n;
      rec.replica = r;
      const auto pts = replica_points(s, config.seed, n, r);
      try {
        const W2Estimate est = w2_to_uniform(s, pts, config.w2);
        rec.w2sq = est.transport.value;
        rec.bias_bound = est.bias_bound;
        if (kernel) {
          rec.energy = green_energy(*kernel, pts);
          rec.ratio = ratio_from(est.w2, rec.energy, n);
        }
      } catch (const ConvergenceError& e) {
        rec.failed = true;
        rec.error = e.what();
      }
    });

    ScanRow row;
    row.n = n;
    const std::size_t res = config.w2.resolution ? config.w2.resolution : default_resolution(s, n);
    const SolverChoice choice = resolve_solver(s, n, res, config.w2);
    row.solver = std::string(to_string(choice));
    row.resolution = choice == SolverChoice::SemiDiscrete ? 0 : res;
    std::vector<double> v, lo, hi, abs_s, ratio_sq;
    for (const ReplicaRecord& rec : recs) {
      if (rec.failed) {
        ++row.failed;
        continue;
      }
      v.push_back(rec.w2sq);
      const double w = std::sqrt(rec.w2sq);
      const double l = std::max(0.0, w - rec.bias_bound);
      lo.push_back(l * l);
      hi.push_back((w + rec.bias_bound) * (w + rec.bias_bound));
      row.bias_bound = std::max(row.bias_bound, rec.bias_bound);
      if (kernel && std::isfinite(rec.energy)) {
        abs_s.push_back(std::abs(rec.energy));
        ratio_sq.push_back(rec.ratio * rec.ratio);
      }
    }
    result.replicas.insert(result.replicas.end(), recs.begin(), recs.end());
    if (static_cast<double>(row.failed) > 0.01 * static_cast<double>(config.replicas) ||
        v.size() < 2) {
      result.partial = true;
      result.abort_reason = "more than 1% of replicas failed at n = " + std::to_string(n);
      break;
    }
    row.replicas = v.size();
    const SampleSummary sv = summarize(v);
    row.mean_w2sq = sv.mean;
    row.se_w2sq = sv.std_error;
    row.ci_low = std::max(0.0, summarize(lo).mean - kZ95 * sv.std_error);
    row.ci_high = summarize(hi).mean + kZ95 * sv.std_error;
    row.scaled = static_cast<double>(n) * sv.mean;
    row.log_band = log_band_of(static_cast<double>(n));
    if (kernel && abs_s.size() >= 2) {
      const SampleSummary sa = summarize(abs_s);
      row.mean_abs_s = sa.mean;
      row.se_abs_s = sa.std_error;
      row.median_ratio_sq = quantile(ratio_sq, 0.5);
    }
    result.rows.push_back(row);
    per_n_values.push_back(std::move(v));
  }

  if (result.rows.size() >= 4) {
    result.fit = fit_log_slope(result.rows, s);
    // Replica-level bootstrap of the slope.
    std::vector<double> x;
    for (const ScanRow& r : result.rows) x.push_back(std::log(static_cast<double>(r.n)));
    const StreamFamily boot(config.seed, experiment_id::kBootstrap);
    std::vector<double> slopes(config.bootstrap_resamples);
    for (std::size_t b = 0; b < config.bootstrap_resamples; ++b) {
      RandomStream st = boot.substream(0, static_cast<std::uint32_t>(b));
      std::vector<double> y(result.rows.size());
      for (std::size_t k = 0; k < result.rows.size(); ++k) {
        const auto& vals = per_n_values[k];
        CompensatedSum acc;
        for (std::size_t t = 0; t < vals.size(); ++t) {
          acc.add(vals[static_cast<std::size_t>(st.uniform() * static_cast<double>(vals.size()))]);
        }
        y[k] = static_cast<double>(result.rows[k].n) * acc.value() / static_cast<double>(vals.size());
      }
      slopes[b] = slope_of(x, y);
    }
    if (!slopes.empty()) {
      result.fit->slope_ci_low = quantile(slopes, 0.025);
      result.fit->slope_ci_high = quantile(slopes, 0.975);
    }
  }

  if (config.cross_validate && !result.partial) cross_validate(result);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

ScanResult falsifier_scan(ScanConfig config) {
  config.energy = true;
  ScanResult result = w2_scan(config);
  const auto t0 = std::chrono::steady_clock::now();
  const GreenKernel k = GreenKernel::for_surface(config.surface, config.green);
  FalsifierReport f;
  f.sigma2 = certified_sigma2(k).value;
  f.normalizer = 2.0 * (1.0 + std::sqrt(2.0 * f.sigma2));
  f.predicted_slope = config.surface.volume() / (8.0 * kPi * (1.0 + std::sqrt(2.0 * f.sigma2)));
  std::vector<double> se_l;
  for (ScanRow& r : result.rows) {
    const double dn = static_cast<double>(r.n);
    r.l_n = dn * r.mean_w2sq / f.normalizer;
    r.l_ci_low = dn * r.ci_low / f.normalizer;
    r.l_ci_high = dn * r.ci_high / f.normalizer;
    se_l.push_back(dn * r.se_w2sq / f.normalizer);
  }
  const std::size_t rows = result.rows.size();
  if (rows >= 4) {
    std::vector<double> x, y;
    for (const ScanRow& r : result.rows) {
      x.push_back(std::log(static_cast<double>(r.n)));
      y.push_back(r.l_n);
    }
    const LinearFit lf = least_squares(x, y);
    f.slope = lf.slope;
    f.slope_se = lf.slope_se;
    // The L_n regression is the W2 fit divided by a constant, so the
    // replica bootstrap interval carries over exactly.
    f.slope_ci_low = result.fit->slope_ci_low / (f.normalizer);
    f.slope_ci_high = result.fit->slope_ci_high / (f.normalizer);
    f.slope_positive = f.slope > 0.0 && f.slope_ci_low > 0.0;
    f.monotone_top_half = true;
    for (std::size_t k = std::max<std::size_t>(1, rows / 2); k < rows; ++k) {
      const double inc = result.rows[k].l_n - result.rows[k - 1].l_n;
      const double thr = 2.0 * std::hypot(se_l[k], se_l[k - 1]);
      f.top_increments.push_back(inc);
      f.top_thresholds.push_back(thr);
      if (!(inc > thr)) f.monotone_top_half = false;
    }
  }
  result.falsifier = f;
  result.wall_seconds +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace gwlab
