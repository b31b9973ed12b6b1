// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gwlab/energy.hpp"
#include "gwlab/error.hpp"

using namespace gwlab;

namespace {

double naive_energy(const GreenKernel& k, const std::vector<Point>& p) {
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (i != j) s += k.eval_fast(p[i], p[j]);
  return double(s);
}

}  // namespace

TEST(Energy, TrivialSizes) {
  const auto g = GreenKernel::sphere();
  EXPECT_EQ(green_energy(g, {}), 0.0);
  const std::vector<Point> one{sphere_point(1, 2, 3)};
  EXPECT_EQ(green_energy(g, one), 0.0);
  const std::vector<Point> two{sphere_point(0, 0, 1), sphere_point(0, 0, -1)};
  EXPECT_NEAR(green_energy(g, two), -2.0, 1e-15);
}

TEST(Energy, MatchesOrderedDoubleSum) {
  for (const auto& s : {SurfaceModel::torus(), SurfaceModel::sphere()}) {
    const auto g = GreenKernel::for_surface(s);
    RandomStream rs(8, {});
    const auto p = sample_uniform(s, rs, 300);
    const double ref = naive_energy(g, p);
    EXPECT_NEAR(green_energy(g, p), ref, 1e-10 * (1 + std::abs(ref)));
  }
}

TEST(Energy, PermutationInvariantBitwise) {
  const auto g = GreenKernel::torus_ewald();
  RandomStream rs(9, {});
  auto p = sample_uniform(SurfaceModel::torus(), rs, 200);
  const double a = green_energy(g, p);
  std::reverse(p.begin(), p.end());
  std::rotate(p.begin(), p.begin() + 37, p.end());
  EXPECT_EQ(green_energy(g, p), a);
}

TEST(Energy, OffsetShiftsByPairCount) {
  const auto g = GreenKernel::sphere();
  RandomStream rs(10, {});
  const auto p = sample_uniform(SurfaceModel::sphere(), rs, 50);
  const double c = 0.25;
  EXPECT_NEAR(green_energy(g.with_offset(c), p) - green_energy(g, p), 50 * 49 * c, 1e-9);
}

TEST(Energy, CoincidentPointsGiveInfinity) {
  const auto g = GreenKernel::torus_ewald();
  const std::vector<Point> p{torus_point(0.1, 0.2), torus_point(0.5, 0.5), torus_point(0.1, 0.2)};
  EXPECT_EQ(green_energy(g, p), std::numeric_limits<double>::infinity());
}

TEST(EnergyMoments, RejectsTinyInputs) {
  const auto s = SurfaceModel::sphere();
  const auto g = GreenKernel::sphere();
  StreamFamily fam(1, experiment_id::kEnergyMoments);
  EXPECT_THROW(energy_moments(s, g, 1, 1000, fam), InputError);
  EXPECT_THROW(energy_moments(s, g, 10, 99, fam), InputError);
}

TEST(EnergyMoments, IndependentOfWorkerCount) {
  const auto s = SurfaceModel::torus();
  const auto g = GreenKernel::torus_ewald();
  StreamFamily fam(20261019, experiment_id::kEnergyMoments);
  const auto a = energy_moments(s, g, 20, 500, fam, {1});
  const auto b = energy_moments(s, g, 20, 500, fam, {3});
  EXPECT_EQ(a.mean_s, b.mean_s);
  EXPECT_EQ(a.mean_s2, b.mean_s2);
  EXPECT_EQ(a.se_s2, b.se_s2);
}

// n = 2 on the sphere: S_2 = 2 G(x, y), so E[S_2] = 0 and E[S_2^2] = 4.
TEST(EnergyMoments, SphereTwoPoints) {
  const auto s = SurfaceModel::sphere();
  const auto g = GreenKernel::sphere();
  StreamFamily fam(20261019, experiment_id::kEnergyMoments);
  const auto r = energy_moments(s, g, 2, 40000, fam);
  EXPECT_NEAR(r.predicted_s2, 4.0, 1e-12);
  EXPECT_LT(std::abs(r.mean_s), 4 * r.se_s);
  EXPECT_LT(std::abs(r.mean_s2 - 4.0), 4 * r.se_s2);
  EXPECT_NEAR(r.abs_bound, std::sqrt(4.0), 1e-12);
}

TEST(EnergyMoments, SamplesMatchReport) {
  const auto s = SurfaceModel::torus();
  const auto g = GreenKernel::torus_ewald();
  StreamFamily fam(5, experiment_id::kEnergyMoments);
  const auto v = energy_samples(s, g, 10, 200, fam, 1);
  ASSERT_EQ(v.size(), 200u);
  double m = 0;
  for (double x : v) m += x;
  EXPECT_NEAR(energy_moments(s, g, 10, 200, fam).mean_s, m / 200, 1e-12);
  // replica r uses substream (n, r)
  auto rs = fam.substream(10, 17);
  EXPECT_EQ(v[17], green_energy(g, sample_uniform(s, rs, 10)));
}
