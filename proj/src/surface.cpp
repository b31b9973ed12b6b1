// SPDX-License-Identifier: Apache-2.0
#include "gwlab/surface.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gwlab/error.hpp"

namespace gwlab {
namespace {

constexpr double kPi = std::numbers::pi;

double reduce_unit(double u) {
  double r = u - std::floor(u);
  // floor can leave exactly 1.0 for tiny negative inputs.
  if (r >= 1.0) r = 0.0;
  return r;
}

double sphere_angle(const Point& p, const Point& q) {
  const double cx = p.y * q.z - p.z * q.y;
  const double cy = p.z * q.x - p.x * q.z;
  const double cz = p.x * q.y - p.y * q.x;
  const double dot = p.x * q.x + p.y * q.y + p.z * q.z;
  return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot);
}

}  // namespace

SurfaceModel SurfaceModel::from_name(std::string_view name) {
  if (name == "torus") return torus();
  if (name == "sphere") return sphere();
  throw InputError("unknown surface '" + std::string(name) +
                   "' (expected torus or sphere)");
}

std::string_view SurfaceModel::name() const {
  return is_torus() ? "torus" : "sphere";
}

double SurfaceModel::volume() const { return is_torus() ? 1.0 : 4.0 * kPi; }

double SurfaceModel::diameter() const {
  return is_torus() ? std::numbers::sqrt2 / 2.0 : kPi;
}

Point torus_point(double u, double v) {
  if (!std::isfinite(u) || !std::isfinite(v)) {
    throw InputError("torus_point: non-finite coordinate");
  }
  return {reduce_unit(u), reduce_unit(v), 0.0};
}

Point sphere_point(double x, double y, double z) {
  const double norm = std::sqrt(x * x + y * y + z * z);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw InputError("sphere_point: zero or non-finite vector");
  }
  return {x / norm, y / norm, z / norm};
}

void validate_point(const SurfaceModel& s, const Point& p) {
  if (s.is_torus()) {
    if (!(p.x >= 0.0 && p.x < 1.0 && p.y >= 0.0 && p.y < 1.0)) {
      throw InputError("torus point outside [0,1)^2");
    }
  } else {
    const double norm = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    if (!(std::abs(norm - 1.0) <= kSphereNormTolerance)) {
      throw InputError("sphere point is not a unit vector");
    }
  }
}

double geodesic_distance(const SurfaceModel& s, const Point& p, const Point& q) {
  validate_point(s, p);
  validate_point(s, q);
  if (s.is_torus()) {
    double dx, dy;
    torus_displacement(p, q, dx, dy);
    return std::hypot(dx, dy);
  }
  return sphere_angle(p, q);
}

double squared_distance(const SurfaceModel& s, const Point& p, const Point& q) {
  if (s.is_torus()) {
    double dx, dy;
    torus_displacement(p, q, dx, dy);
    return dx * dx + dy * dy;
  }
  const double t = sphere_angle(p, q);
  return t * t;
}

std::vector<Point> sample_uniform(const SurfaceModel& s, RandomStream& stream,
                                  std::size_t n) {
  std::vector<Point> out;
  out.reserve(n);
  if (s.is_torus()) {
    for (std::size_t i = 0; i < n; ++i) {
      const double u = stream.uniform();
      const double v = stream.uniform();
      out.push_back({u, v, 0.0});
    }
    return out;
  }
  while (out.size() < n) {
    const double x = stream.normal();
    const double y = stream.normal();
    const double z = stream.normal();
    const double norm = std::sqrt(x * x + y * y + z * z);
    if (norm == 0.0) continue;
    out.push_back({x / norm, y / norm, z / norm});
  }
  return out;
}

WeightedPointSet WeightedPointSet::uniform(std::vector<Point> points) {
  WeightedPointSet set;
  const double w = points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size());
  set.weights.assign(points.size(), w);
  set.points = std::move(points);
  return set;
}

void WeightedPointSet::validate() const {
  if (points.size() != weights.size()) {
    throw InputError("WeightedPointSet: points and weights differ in length");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InputError("WeightedPointSet: negative or non-finite weight");
    }
    total += w;
  }
  if (!(std::abs(total - 1.0) <= 1e-12)) {
    throw InputError("WeightedPointSet: weights do not sum to 1");
  }
}

std::size_t max_quadrature_resolution(const SurfaceModel& s) {
  return s.is_torus() ? std::size_t{1} << 14 : std::size_t{1} << 28;
}

WeightedPointSet quadrature(const SurfaceModel& s, std::size_t resolution) {
  if (resolution < 1) throw InputError("quadrature: resolution must be >= 1");
  if (resolution > max_quadrature_resolution(s)) {
    throw InputError("quadrature: resolution too large");
  }
  std::vector<Point> pts;
  if (s.is_torus()) {
    const std::size_t k = resolution;
    pts.reserve(k * k);
    const double h = 1.0 / static_cast<double>(k);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        pts.push_back({(static_cast<double>(a) + 0.5) * h,
                       (static_cast<double>(b) + 0.5) * h, 0.0});
      }
    }
  } else {
    const std::size_t n = resolution;
    pts.reserve(n);
    const double dn = static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double z = 1.0 - (2.0 * static_cast<double>(j) + 1.0) / dn;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      // Golden-angle increments, reduced to whole turns before scaling.
      const double turns = std::fmod(static_cast<double>(j) * (2.0 - std::numbers::phi), 1.0);
      const double phi = 2.0 * kPi * turns;
      pts.push_back(sphere_point(r * std::cos(phi), r * std::sin(phi), z));
    }
  }
  return WeightedPointSet::uniform(std::move(pts));
}

}  // namespace gwlab
