// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gwlab/error.hpp"
#include "gwlab/experiments.hpp"

using namespace gwlab;

namespace {

ScanConfig small_config() {
  ScanConfig c;
  c.n_grid = {8, 16, 32, 64};
  c.replicas = 12;
  c.bootstrap_resamples = 50;
  c.w2.resolution = 24;
  c.w2.solver = SolverChoice::Exact;
  c.cross_validate = false;
  return c;
}

}  // namespace

TEST(Scan, IndependentOfWorkerCount) {
  auto c = small_config();
  c.workers = 1;
  const auto a = falsifier_scan(c);
  c.workers = 3;
  const auto b = falsifier_scan(c);
  ASSERT_EQ(a.replicas.size(), b.replicas.size());
  for (std::size_t i = 0; i < a.replicas.size(); ++i) {
    EXPECT_EQ(a.replicas[i].w2sq, b.replicas[i].w2sq);
    EXPECT_EQ(a.replicas[i].energy, b.replicas[i].energy);
  }
  ASSERT_TRUE(a.fit && b.fit);
  EXPECT_EQ(a.fit->slope, b.fit->slope);
  EXPECT_EQ(a.fit->slope_ci_low, b.fit->slope_ci_low);
  EXPECT_EQ(a.falsifier->slope, b.falsifier->slope);
}

// The same point set feeds W2 and S_n, and it can be regenerated from the seed.
TEST(Scan, CommonRandomNumbersRecompute) {
  const auto c = small_config();
  const auto res = falsifier_scan(c);
  const auto k = GreenKernel::for_surface(c.surface, c.green);
  for (std::size_t i = 0; i < res.replicas.size(); i += 7) {
    const auto& rec = res.replicas[i];
    const auto pts = replica_points(c.surface, c.seed, rec.n, rec.replica);
    ASSERT_EQ(pts.size(), rec.n);
    EXPECT_EQ(green_energy(k, pts), rec.energy);
    EXPECT_EQ(w2_to_uniform(c.surface, pts, c.w2).transport.value, rec.w2sq);
  }
}

TEST(Scan, RowsBracketTheMean) {
  const auto res = w2_scan(small_config());
  ASSERT_EQ(res.rows.size(), 4u);
  EXPECT_FALSE(res.partial);
  for (const auto& r : res.rows) {
    EXPECT_EQ(r.replicas, 12u);
    EXPECT_LE(r.ci_low, r.mean_w2sq);
    EXPECT_GE(r.ci_high, r.mean_w2sq);
    EXPECT_NEAR(r.bias_bound, std::sqrt(2.0) / 48, 1e-15);
  }
}

TEST(Scan, RejectsBadGrid) {
  auto c = small_config();
  c.n_grid = {16, 8};
  EXPECT_THROW(w2_scan(c), InputError);
  c.n_grid = {};
  EXPECT_THROW(w2_scan(c), InputError);
}

TEST(Scan, CrossValidationOfSemiDiscrete) {
  ScanConfig c;
  c.n_grid = {16, 32};
  c.replicas = 4;
  c.bootstrap_resamples = 0;
  c.w2.exact_limit = 0;  // Auto goes straight to the semi-discrete solver
  const auto res = w2_scan(c);
  ASSERT_TRUE(res.cross_validation.performed);
  EXPECT_EQ(res.cross_validation.solver, "semidiscrete");
  EXPECT_TRUE(res.cross_validation.consistent);
  EXPECT_FALSE(res.fit.has_value());
}

TEST(Fit, RecoversExactLogLaw) {
  std::vector<ScanRow> rows;
  const double a = 1 / (4 * std::numbers::pi), b = 0.17;
  for (std::size_t n : {128, 256, 512, 1024, 2048, 4096}) {
    ScanRow r;
    r.n = n;
    r.mean_w2sq = (a * std::log(double(n)) + b) / double(n);
    rows.push_back(r);
  }
  const auto f = fit_log_slope(rows, SurfaceModel::torus());
  EXPECT_NEAR(f.slope, a, 1e-12);
  EXPECT_NEAR(f.intercept, b, 1e-12);
  EXPECT_NEAR(f.slope_ratio, 1.0, 1e-10);
  EXPECT_NEAR(f.target_slope, a, 1e-16);
  rows.resize(3);
  EXPECT_THROW(fit_log_slope(rows, SurfaceModel::torus()), InputError);
}

TEST(Energy, QuadruplingReplicasHalvesInterval) {
  const auto s = SurfaceModel::torus();
  const auto k = GreenKernel::torus_ewald();
  StreamFamily fam(20261019, experiment_id::kEnergyMoments);
  const auto a = energy_moments(s, k, 10, 4000, fam);
  const auto b = energy_moments(s, k, 10, 16000, fam);
  const double r = b.se_s / a.se_s;
  EXPECT_GT(r, 0.45);
  EXPECT_LT(r, 0.55);
}

TEST(Energy, MomentTableCoversGrid) {
  const std::vector<std::size_t> grid{5, 10};
  const auto t = energy_moment_table(SurfaceModel::sphere(), GreenKernel::sphere(), grid, 200, 1);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_NEAR(t[0].predicted_s2, 2 * 5 * 4 * 1.0, 1e-12);
  EXPECT_NEAR(t[1].predicted_s2, 2 * 10 * 9 * 1.0, 1e-12);
}

TEST(Ratio, QuadratureNodesGiveZero) {
  const auto s = SurfaceModel::torus();
  const auto q = quadrature(s, 6);
  W2Options o;
  o.solver = SolverChoice::Exact;
  o.resolution = 6;
  EXPECT_LT(per_config_ratio(s, GreenKernel::torus_ewald(), q.points, o), 1e-12);
  const auto sp = SurfaceModel::sphere();
  const auto f = quadrature(sp, 50);
  o.resolution = 50;
  EXPECT_LT(per_config_ratio(sp, GreenKernel::sphere(), f.points, o), 1e-12);
}

TEST(Ratio, CoincidentPointsGiveZero) {
  const std::vector<Point> p{torus_point(0.3, 0.3), torus_point(0.3, 0.3)};
  EXPECT_EQ(per_config_ratio(SurfaceModel::torus(), GreenKernel::torus_ewald(), p), 0.0);
}

TEST(GreenCheck, ReducedTorusPasses) {
  GreenCheckOptions o;
  o.symmetry_pairs = 2000;
  o.mean_zero_points = 5;
  o.torus_grid = 256;
  o.monte_carlo_pairs = 100000;
  o.near_diagonal_samples = 500;
  const auto checks = green_check(GreenKernel::torus_ewald(), o);
  EXPECT_FALSE(checks.empty());
  for (const auto& c : checks) EXPECT_TRUE(c.passed) << c.name << " " << c.measured;
}

TEST(GreenCheck, OffsetSphereFailsMeanZero) {
  GreenCheckOptions o;
  o.symmetry_pairs = 2000;
  o.mean_zero_points = 5;
  o.sphere_nodes = 20000;
  o.monte_carlo_pairs = 100000;
  o.near_diagonal_samples = 500;
  const auto checks = green_check(GreenKernel::sphere().with_offset(0.1), o);
  bool found = false;
  for (const auto& c : checks) {
    if (c.name == "mean_zero") {
      found = true;
      EXPECT_FALSE(c.passed);
    }
  }
  EXPECT_TRUE(found);
}
