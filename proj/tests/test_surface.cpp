// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gwlab/error.hpp"
#include "gwlab/surface.hpp"

using namespace gwlab;

TEST(Surface, NamesAndVolumes) {
  EXPECT_EQ(SurfaceModel::from_name("torus"), SurfaceModel::torus());
  EXPECT_EQ(SurfaceModel::from_name("sphere"), SurfaceModel::sphere());
  EXPECT_THROW(SurfaceModel::from_name("klein"), InputError);
  EXPECT_DOUBLE_EQ(SurfaceModel::torus().volume(), 1.0);
  EXPECT_DOUBLE_EQ(SurfaceModel::sphere().volume(), 4 * std::numbers::pi);
  EXPECT_DOUBLE_EQ(SurfaceModel::torus().diameter(), std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(SurfaceModel::sphere().diameter(), std::numbers::pi);
}

TEST(Surface, TorusDistanceWrapsAround) {
  const auto t = SurfaceModel::torus();
  EXPECT_NEAR(geodesic_distance(t, torus_point(0.05, 0.5), torus_point(0.95, 0.5)), 0.1, 1e-15);
  EXPECT_NEAR(geodesic_distance(t, torus_point(0.1, 0.1), torus_point(0.9, 0.9)),
              std::hypot(0.2, 0.2), 1e-15);
  EXPECT_NEAR(geodesic_distance(t, torus_point(0, 0), torus_point(0.5, 0.5)), std::sqrt(0.5),
              1e-15);
  EXPECT_EQ(torus_point(-0.25, 1.75), (Point{0.75, 0.75, 0}));
}

TEST(Surface, SphereDistanceIsAngle) {
  const auto s = SurfaceModel::sphere();
  const auto n = sphere_point(0, 0, 1);
  EXPECT_NEAR(geodesic_distance(s, n, sphere_point(0, 0, -1)), std::numbers::pi, 1e-15);
  EXPECT_NEAR(geodesic_distance(s, n, sphere_point(1, 0, 0)), std::numbers::pi / 2, 1e-15);
  // accurate for tiny angles, where acos would lose everything
  const double a = 1e-9;
  EXPECT_NEAR(geodesic_distance(s, n, sphere_point(std::sin(a), 0, std::cos(a))), a, 1e-22);
}

TEST(Surface, Validation) {
  const auto s = SurfaceModel::sphere();
  EXPECT_THROW(validate_point(s, Point{1, 1, 0}), InputError);
  EXPECT_THROW(sphere_point(0, 0, 0), InputError);
  EXPECT_THROW(validate_point(SurfaceModel::torus(), Point{1.0, 0.2, 0}), InputError);
  EXPECT_THROW(torus_point(NAN, 0), InputError);
}

TEST(Surface, SamplesLieOnSurface) {
  RandomStream rs(11, {});
  for (const auto& s : {SurfaceModel::torus(), SurfaceModel::sphere()}) {
    for (const auto& p : sample_uniform(s, rs, 1000)) validate_point(s, p);
  }
}

TEST(Surface, SphereSamplesHaveUniformMoments) {
  RandomStream rs(12, {});
  const int n = 100000;
  double z = 0, z2 = 0;
  for (const auto& p : sample_uniform(SurfaceModel::sphere(), rs, n)) {
    z += p.z;
    z2 += p.z * p.z;
  }
  // z is uniform on [-1, 1]: mean 0, second moment 1/3
  EXPECT_NEAR(z / n, 0.0, 5 * std::sqrt(1.0 / 3.0 / n));
  EXPECT_NEAR(z2 / n, 1.0 / 3.0, 5 * std::sqrt(4.0 / 45.0 / n));
}

TEST(Surface, QuadratureMassesAndShape) {
  const auto q = quadrature(SurfaceModel::torus(), 4);
  q.validate();
  ASSERT_EQ(q.size(), 16u);
  EXPECT_EQ(q.points[0], (Point{0.125, 0.125, 0}));
  const auto f = quadrature(SurfaceModel::sphere(), 1000);
  f.validate();
  ASSERT_EQ(f.size(), 1000u);
  double cz = 0;
  for (const auto& p : f.points) {
    validate_point(SurfaceModel::sphere(), p);
    cz += p.z;
  }
  EXPECT_NEAR(cz / 1000, 0.0, 1e-12);
  EXPECT_THROW(quadrature(SurfaceModel::torus(), 0), InputError);
}

TEST(Surface, WeightedSetValidation) {
  WeightedPointSet w{{Point{}, Point{}}, {0.5, 0.4}};
  EXPECT_THROW(w.validate(), InputError);
  w.weights = {1.5, -0.5};
  EXPECT_THROW(w.validate(), InputError);
  w.weights = {1.0};
  EXPECT_THROW(w.validate(), InputError);
}
