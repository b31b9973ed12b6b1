// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "gwlab/error.hpp"
#include "gwlab/transport.hpp"

using namespace gwlab;

namespace {

double brute_force_assignment(const CostMatrix& c) {
  std::vector<std::size_t> perm(c.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double v = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) v += c(i, perm[i]);
    best = std::min(best, v);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / double(c.rows());
}

std::vector<double> equal(std::size_t n) { return std::vector<double>(n, 1.0 / double(n)); }

std::vector<double> random_weights(RandomStream& rs, std::size_t n) {
  std::vector<double> w(n);
  double s = 0;
  for (auto& x : w) s += (x = 0.1 + rs.uniform());
  for (auto& x : w) x /= s;
  return w;
}

}  // namespace

TEST(Exact, MatchesBruteForceAssignment) {
  RandomStream rs(21, {});
  for (const auto& s : {SurfaceModel::torus(), SurfaceModel::sphere()}) {
    for (int t = 0; t < 30; ++t) {
      const std::size_t n = 1 + t % 7;
      CostMatrix c(s, sample_uniform(s, rs, n), sample_uniform(s, rs, n));
      const auto r = solve_exact(equal(n), equal(n), c);
      const double ref = brute_force_assignment(c);
      EXPECT_NEAR(r.value, ref, 1e-12);
      EXPECT_NEAR(solve_permutation_oracle(c).value, ref, 1e-15);
      EXPECT_LE(r.duality_gap, 1e-9 * (1 + r.value));
      EXPECT_GE(r.duality_gap, -1e-12);
    }
  }
}

// On a segment shorter than 1/2 the torus cost is convex in the
// displacement, so the monotone (quantile) coupling is optimal.
TEST(Exact, UnequalWeightsMatchMonotoneCoupling) {
  RandomStream rs(22, {});
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 3 + t % 5, m = 2 + t % 7;
    std::vector<double> xs(n), ys(m);
    for (auto& x : xs) x = 0.3 * rs.uniform();
    for (auto& y : ys) y = 0.3 * rs.uniform();
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const auto a = random_weights(rs, n), b = random_weights(rs, m);
    double ref = 0;
    std::size_t i = 0, j = 0;
    double ra = a[0], rb = b[0];
    while (i < n && j < m) {
      const double f = std::min(ra, rb);
      ref += f * (xs[i] - ys[j]) * (xs[i] - ys[j]);
      ra -= f;
      rb -= f;
      if (ra <= 1e-15 && ++i < n) ra = a[i];
      if (rb <= 1e-15 && ++j < m) rb = b[j];
    }
    std::vector<Point> px, py;
    for (double x : xs) px.push_back(torus_point(x, 0.5));
    for (double y : ys) py.push_back(torus_point(y, 0.5));
    const auto r = solve_exact(a, b, CostMatrix(SurfaceModel::torus(), px, py));
    EXPECT_NEAR(r.value, ref, 1e-13);
    EXPECT_LT(r.marginal_violation, 1e-12);
  }
}

TEST(Exact, IdenticalMeasuresCostZero) {
  const auto q = quadrature(SurfaceModel::torus(), 8);
  const auto r = solve_exact(SurfaceModel::torus(), q, q);
  EXPECT_EQ(r.value, 0.0);
}

TEST(Exact, SingleSourceForcesPlan) {
  const std::vector<double> b{0.2, 0.3, 0.5};
  const CostMatrix c(1, 3, {1.0, 2.0, 4.0});
  const std::vector<double> a{1.0};
  EXPECT_NEAR(solve_exact(a, b, c).value, 0.2 + 0.6 + 2.0, 1e-15);
}

TEST(Exact, SwapSymmetry) {
  RandomStream rs(23, {});
  const auto s = SurfaceModel::sphere();
  const auto x = sample_uniform(s, rs, 12), y = sample_uniform(s, rs, 17);
  const auto a = random_weights(rs, 12), b = random_weights(rs, 17);
  const double ab = solve_exact(a, b, CostMatrix(s, x, y)).value;
  const double ba = solve_exact(b, a, CostMatrix(s, y, x)).value;
  EXPECT_NEAR(ab, ba, 1e-14);
}

TEST(Exact, ZeroMassDroppedAndMismatchRejected) {
  const CostMatrix c(3, 2, {0.0, 1.0, 5.0, 5.0, 1.0, 0.0});
  const std::vector<double> a{0.5, 0.0, 0.5}, b{0.5, 0.5};
  const auto r = solve_exact(a, b, c);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.dropped_points, 1u);
  EXPECT_FALSE(r.warnings.empty());
  const std::vector<double> bad{0.5, 0.6};
  EXPECT_THROW(solve_exact(a, bad, c), InputError);
  const std::vector<double> neg{1.5, -0.5};
  EXPECT_THROW(solve_exact(a, neg, c), InputError);
}

TEST(CostMatrixTest, OnTheFlyMatchesStored) {
  RandomStream rs(24, {});
  const auto s = SurfaceModel::torus();
  const auto x = sample_uniform(s, rs, 30), y = sample_uniform(s, rs, 40);
  const CostMatrix dense(s, x, y), lazy(s, x, y, 16);
  EXPECT_TRUE(dense.stored());
  EXPECT_FALSE(lazy.stored());
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 40; ++j) ASSERT_EQ(dense(i, j), lazy(i, j));
  EXPECT_EQ(solve_exact(equal(30), equal(40), dense).value,
            solve_exact(equal(30), equal(40), lazy).value);
}

TEST(Entropic, IdenticalMeasuresNearZero) {
  const auto q = quadrature(SurfaceModel::torus(), 4);
  const CostMatrix c(SurfaceModel::torus(), q.points, q.points);
  EXPECT_LE(solve_entropic(q.weights, q.weights, c).value, 1e-6);
}

TEST(Entropic, CloseToExactAndMonotoneInEpsilon) {
  RandomStream rs(25, {});
  const auto s = SurfaceModel::torus();
  const auto x = sample_uniform(s, rs, 16);
  const auto q = quadrature(s, 16);
  const CostMatrix c(s, x, q.points);
  const double exact = solve_exact(equal(16), q.weights, c).value;
  double prev = INFINITY;
  for (double eps : {4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4}) {
    EntropicOptions o;
    o.schedule = default_epsilon_schedule(c.max_value(), eps);
    const auto r = solve_entropic(equal(16), q.weights, c, o);
    EXPECT_LE(r.marginal_violation, 1e-9);
    EXPECT_GE(r.value, exact - 1e-12);
    EXPECT_LE(r.value, prev + 1e-12);
    EXPECT_LE(r.dual_value, exact + 1e-12);
    EXPECT_DOUBLE_EQ(r.epsilon, eps);
    prev = r.value;
  }
  EXPECT_LT(std::abs(solve_entropic(equal(16), q.weights, c).value - exact), 1e-3 * exact);
}

TEST(Entropic, IterationCapThrows) {
  RandomStream rs(26, {});
  const auto s = SurfaceModel::sphere();
  const CostMatrix c(s, sample_uniform(s, rs, 20), sample_uniform(s, rs, 30));
  EntropicOptions o;
  o.max_iterations = 2;
  EXPECT_THROW(solve_entropic(equal(20), equal(30), c, o), ConvergenceError);
}

TEST(SemiDiscrete, OneAtomIsOneSixth) {
  for (auto p : {torus_point(0.5, 0.5), torus_point(0.01, 0.93)}) {
    const auto r = solve_semidiscrete_torus(WeightedPointSet::uniform({p}));
    EXPECT_NEAR(r.value, 1.0 / 6.0, 1e-14);
  }
}

// A k x k lattice of equal atoms cuts the torus into squares of side 1/k.
TEST(SemiDiscrete, LatticeCells) {
  for (std::size_t k : {2, 3, 5}) {
    const auto q = quadrature(SurfaceModel::torus(), k);
    const auto r = solve_semidiscrete_torus(q);
    EXPECT_NEAR(r.value, 1.0 / (6.0 * double(k * k)), 1e-12) << k;
  }
}

TEST(SemiDiscrete, WithinGridBracket) {
  RandomStream rs(27, {});
  const auto s = SurfaceModel::torus();
  for (int t = 0; t < 5; ++t) {
    const auto x = sample_uniform(s, rs, 16);
    const auto sd = solve_semidiscrete_torus(WeightedPointSet::uniform(x));
    EXPECT_LE(sd.marginal_violation, 1e-8);
    EXPECT_LE(sd.duality_gap, 1e-9);
    const std::size_t k = 48;
    const double grid = std::sqrt(solve_exact(s, WeightedPointSet::uniform(x), quadrature(s, k)).value);
    EXPECT_LE(std::abs(std::sqrt(sd.value) - grid), quadrature_bias_bound(s, k));
  }
}

TEST(SemiDiscrete, UnequalWeightsMatchCellAreas) {
  const std::vector<Point> x{torus_point(0.25, 0.5), torus_point(0.75, 0.5)};
  const auto r = solve_semidiscrete_torus({x, {0.3, 0.7}});
  EXPECT_LE(r.marginal_violation, 1e-8);
  // vertical strips of widths 0.3 and 0.7 centred on the atoms are optimal
  const double strips = (0.3 * 0.3 * 0.3 + 0.7 * 0.7 * 0.7) / 12 + 1.0 / 12;
  EXPECT_NEAR(r.value, strips, 1e-9);
}

TEST(W2, OneAtomClosedForms) {
  const auto t = SurfaceModel::torus();
  W2Options o;
  o.solver = SolverChoice::Exact;
  o.resolution = 64;
  const std::vector<Point> a{torus_point(0.2, 0.7)};
  EXPECT_NEAR(w2_to_uniform(t, a, o).transport.value, 1.0 / 6.0, 1e-3);
  // E[theta^2] over the sphere = (pi^2 - 4) / 2
  const auto s = SurfaceModel::sphere();
  o.resolution = 20000;
  const std::vector<Point> b{sphere_point(0.3, -0.2, 0.9)};
  EXPECT_NEAR(w2_to_uniform(s, b, o).transport.value, (std::numbers::pi * std::numbers::pi - 4) / 2,
              5e-3);
}

TEST(W2, BracketsOverlapAcrossResolutions) {
  RandomStream rs(28, {});
  for (const auto& s : {SurfaceModel::torus(), SurfaceModel::sphere()}) {
    const auto x = sample_uniform(s, rs, 12);
    W2Options lo, hi;
    lo.solver = hi.solver = SolverChoice::Exact;
    lo.resolution = s.is_torus() ? 24 : 400;
    hi.resolution = 2 * lo.resolution;
    const auto a = w2_to_uniform(s, x, lo), b = w2_to_uniform(s, x, hi);
    EXPECT_LE(a.bracket_low, b.bracket_high);
    EXPECT_LE(b.bracket_low, a.bracket_high);
    EXPECT_LE(a.bracket_low, a.w2);
    EXPECT_GE(a.bracket_high, a.w2);
  }
}

// The sphere bound c / sqrt(N) must dominate a 16x refinement of itself.
TEST(W2, FibonacciBiasConstant) {
  const auto s = SurfaceModel::sphere();
  for (std::size_t n : {32, 64}) {
    const double w = std::sqrt(solve_exact(s, quadrature(s, n), quadrature(s, 16 * n)).value);
    EXPECT_LE(w + quadrature_bias_bound(s, 16 * n), quadrature_bias_bound(s, n));
  }
}

TEST(W2, AutoSolverSelection) {
  W2Options o;
  EXPECT_EQ(resolve_solver(SurfaceModel::torus(), 64, 64, o), SolverChoice::Exact);
  EXPECT_EQ(resolve_solver(SurfaceModel::torus(), 4096, 512, o), SolverChoice::SemiDiscrete);
  EXPECT_EQ(resolve_solver(SurfaceModel::sphere(), 1024, 65536, o), SolverChoice::Entropic);
  EXPECT_EQ(solver_from_name("semidiscrete"), SolverChoice::SemiDiscrete);
  EXPECT_THROW(solver_from_name("hungarian"), InputError);
}
