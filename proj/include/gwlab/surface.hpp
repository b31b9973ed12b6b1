// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "gwlab/random.hpp"

namespace gwlab {

enum class SurfaceKind { FlatTorus, UnitSphere };

/// A point on one of the model surfaces. On the torus only (x, y) are used
/// and lie in [0, 1); on the sphere (x, y, z) is a unit vector.
struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Tolerance on |p| - 1 for sphere points.
inline constexpr double kSphereNormTolerance = 1e-12;

/// Closed two-dimensional surface: the flat torus R^2 / Z^2 (volume 1) or
/// the unit sphere in R^3 (volume 4 pi). Distances are geodesic.
class SurfaceModel {
 public:
  static SurfaceModel torus() { return SurfaceModel(SurfaceKind::FlatTorus); }
  static SurfaceModel sphere() { return SurfaceModel(SurfaceKind::UnitSphere); }
  /// "torus" or "sphere"; anything else throws InputError.
  static SurfaceModel from_name(std::string_view name);

  SurfaceKind kind() const { return kind_; }
  bool is_torus() const { return kind_ == SurfaceKind::FlatTorus; }
  std::string_view name() const;
  double volume() const;
  double diameter() const;

  friend bool operator==(const SurfaceModel&, const SurfaceModel&) = default;

 private:
  explicit SurfaceModel(SurfaceKind kind) : kind_(kind) {}
  SurfaceKind kind_;
};

/// Torus point with coordinates reduced into [0, 1).
Point torus_point(double u, double v);
/// Sphere point; the vector is normalized (throws InputError if zero).
Point sphere_point(double x, double y, double z);

/// Throws InputError if p is not a valid chart point for s.
void validate_point(const SurfaceModel& s, const Point& p);

/// Geodesic distance d_g(p, q). Validates both points.
double geodesic_distance(const SurfaceModel& s, const Point& p, const Point& q);

/// d_g(p, q)^2 without validation, for inner loops.
double squared_distance(const SurfaceModel& s, const Point& p, const Point& q);

/// Per-coordinate minimum-image displacement q - p on the torus, in [-1/2, 1/2].
inline void torus_displacement(const Point& p, const Point& q, double& dx,
                               double& dy) {
  dx = q.x - p.x;
  dy = q.y - p.y;
  dx -= static_cast<double>(dx > 0.5) - static_cast<double>(dx < -0.5);
  dy -= static_cast<double>(dy > 0.5) - static_cast<double>(dy < -0.5);
}

/// n i.i.d. draws from the normalized volume measure.
std::vector<Point> sample_uniform(const SurfaceModel& s, RandomStream& stream,
                                  std::size_t n);

/// Points carrying nonnegative masses that sum to one.
struct WeightedPointSet {
  std::vector<Point> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
  /// Equal masses 1/n.
  static WeightedPointSet uniform(std::vector<Point> points);
  /// Throws InputError on length mismatch, negative mass, or total mass not
  /// within 1e-12 of one.
  void validate() const;
};

/// Discretization of dx. Torus: the K x K grid of cell centres with masses
/// 1/K^2. Sphere: the N-point Fibonacci spiral with masses 1/N (its W2
/// distance to dx is O(N^{-1/2})).
WeightedPointSet quadrature(const SurfaceModel& s, std::size_t resolution);

/// Largest accepted quadrature resolution (side length K on the torus,
/// point count N on the sphere).
std::size_t max_quadrature_resolution(const SurfaceModel& s);

}  // namespace gwlab
