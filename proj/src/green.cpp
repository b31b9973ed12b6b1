// SPDX-License-Identifier: Apache-2.0
#include "gwlab/green.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/expint.hpp>

#include "gwlab/error.hpp"
#include "gwlab/stats.hpp"

namespace gwlab {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfDiag = std::numbers::sqrt2 / 2.0;

/// E1(z) + log z, accurate down to z = 0 where it equals -gamma.
double e1_plus_log(double z) {
  if (z < 0.5) {
    double term = 1.0;
    double sum = 0.0;
    for (int k = 1; k < 60; ++k) {
      term *= -z / k;
      sum -= term / k;
      if (std::abs(term) < 1e-20) break;
    }
    return sum - std::numbers::egamma;
  }
  return boost::math::expint(1, z) + std::log(z);
}

double e1(double z) { return boost::math::expint(1, z); }

/// Bound on sum over points p of (r + Z^2) with |p| >= R of g(|p|), where g
/// is dominated by scale * exp(-s^2 / c) for s >= R - 2a.
double gaussian_lattice_tail(double radius, double c) {
  const double b = radius - 2.0 * kHalfDiag;
  if (b <= 0.0) return kInf;
  return 2.0 * kPi *
         (0.5 * c * std::exp(-b * b / c) +
          kHalfDiag * 0.5 * std::sqrt(kPi * c) * std::erfc(b / std::sqrt(c)));
}

double real_space_bound(double tau, double radius) {
  const double c = 4.0 * tau;
  const double b = radius - 2.0 * kHalfDiag;
  if (b <= 0.0) return kInf;
  // E1(w) < exp(-w) / w and w >= b^2 / c beyond the cutoff.
  return (c / (b * b)) * gaussian_lattice_tail(radius, c) / (4.0 * kPi);
}

double reciprocal_bound(double tau, double radius) {
  const double c = 1.0 / (4.0 * kPi * kPi * tau);
  return gaussian_lattice_tail(radius, c) / (4.0 * kPi * kPi * radius * radius);
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Generalized smoothstep S_p: 0 at u = 0, 1 at u = 1, C^p at both ends.
double smoothstep(double u, int order) {
  u = std::clamp(u, 0.0, 1.0);
  double acc = 0.0;
  double pow_neg_u = 1.0;
  for (int k = 0; k <= order; ++k) {
    acc += binomial(order + k, k) * binomial(2 * order + 1, order - k) * pow_neg_u;
    pow_neg_u *= -u;
  }
  return acc * std::pow(u, order + 1);
}

double fourier_smoothing(double t, int order) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  return 1.0 - smoothstep(2.0 * t - 1.0, order);
}

struct TorusTable {
  int n = 0;  // intervals on [0, 1/2]
  double h = 0.0;
  int stride = 0;
  std::vector<double> values;  // regular part on nodes -3..n+3 per axis
  double error = 0.0;
};

}  // namespace

std::string_view to_string(GreenMethod m) {
  switch (m) {
    case GreenMethod::SphereClosedForm: return "SphereClosedForm";
    case GreenMethod::TorusEwald: return "TorusEwald";
    case GreenMethod::TorusFourierOracle: return "TorusFourierOracle";
  }
  return "?";
}

std::string_view to_string(Sigma2Method m) {
  switch (m) {
    case Sigma2Method::SpectralSum: return "SpectralSum";
    case Sigma2Method::LatticeSum: return "LatticeSum";
    case Sigma2Method::MonteCarlo: return "MonteCarlo";
    case Sigma2Method::Quadrature: return "Quadrature";
    case Sigma2Method::Integral: return "Integral";
  }
  return "?";
}

EwaldParameters ewald_parameters(double accuracy, double tau) {
  if (!(accuracy > 0.0) || !(tau > 0.0)) {
    throw InputError("ewald_parameters: accuracy and tau must be positive");
  }
  EwaldParameters p;
  p.tau = tau;
  const double target = accuracy / 4.0;
  p.real_cutoff = 2.0 * kHalfDiag + 0.05;
  while (real_space_bound(tau, p.real_cutoff) > target) p.real_cutoff += 0.05;
  p.reciprocal_cutoff = 2.0 * kHalfDiag + 0.05;
  while (reciprocal_bound(tau, p.reciprocal_cutoff) > target) {
    p.reciprocal_cutoff += 0.05;
  }
  p.truncation_bound = real_space_bound(tau, p.real_cutoff) +
                       reciprocal_bound(tau, p.reciprocal_cutoff);
  return p;
}

namespace {

/// G(r) + log|r| / (2 pi) by Ewald summation; r is any vector in R^2.
double ewald_regular(const EwaldParameters& p, double x, double y) {
  const double c = 4.0 * p.tau;
  double h = (e1_plus_log((x * x + y * y) / c) + std::log(c)) / (4.0 * kPi);

  const double r2max = p.real_cutoff * p.real_cutoff;
  const int nx_lo = static_cast<int>(std::ceil(x - p.real_cutoff));
  const int nx_hi = static_cast<int>(std::floor(x + p.real_cutoff));
  double images = 0.0;
  for (int nx = nx_lo; nx <= nx_hi; ++nx) {
    const double px = x - nx;
    const double rem = r2max - px * px;
    if (rem <= 0.0) continue;
    const double span = std::sqrt(rem);
    const int ny_lo = static_cast<int>(std::ceil(y - span));
    const int ny_hi = static_cast<int>(std::floor(y + span));
    for (int ny = ny_lo; ny <= ny_hi; ++ny) {
      if (nx == 0 && ny == 0) continue;
      const double py = y - ny;
      const double p2 = px * px + py * py;
      if (p2 < r2max) images += e1(p2 / c);
    }
  }
  h += images / (4.0 * kPi) - p.tau;

  const int mmax = static_cast<int>(std::floor(p.reciprocal_cutoff));
  const double m2max = p.reciprocal_cutoff * p.reciprocal_cutoff;
  double recip = 0.0;
  for (int mx = 0; mx <= mmax; ++mx) {
    for (int my = -mmax; my <= mmax; ++my) {
      if (mx == 0 && my <= 0) continue;
      const double m2 = static_cast<double>(mx * mx + my * my);
      if (m2 > m2max) continue;
      recip += std::cos(2.0 * kPi * (mx * x + my * y)) *
               std::exp(-4.0 * kPi * kPi * m2 * p.tau) / m2;
    }
  }
  h += 2.0 * recip / (4.0 * kPi * kPi);
  return h;
}

double ewald_direct(const EwaldParameters& p, double x, double y) {
  const double r2 = x * x + y * y;
  if (r2 == 0.0) return kInf;
  return ewald_regular(p, x, y) - std::log(r2) / (4.0 * kPi);
}

inline void lagrange4(double t, double w[4]) {
  const double tm1 = t - 1.0;
  const double tm2 = t - 2.0;
  const double tp1 = t + 1.0;
  w[0] = -t * tm1 * tm2 / 6.0;
  w[1] = tp1 * tm1 * tm2 / 2.0;
  w[2] = -tp1 * t * tm2 / 2.0;
  w[3] = tp1 * t * tm1 / 6.0;
}

double table_lookup(const TorusTable& tab, double u, double v) {
  const double su = u / tab.h;
  const double sv = v / tab.h;
  const int a = std::min(static_cast<int>(su), tab.n - 1);
  const int b = std::min(static_cast<int>(sv), tab.n - 1);
  double wu[4], wv[4];
  lagrange4(su - a, wu);
  lagrange4(sv - b, wv);
  // Node index i sits at offset i + 3; the stencil starts at node a - 1.
  const double* row = tab.values.data() + static_cast<std::size_t>(a + 2) * tab.stride + (b + 2);
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double* r = row + static_cast<std::size_t>(i) * tab.stride;
    acc += wu[i] * (wv[0] * r[0] + wv[1] * r[1] + wv[2] * r[2] + wv[3] * r[3]);
  }
  return acc;
}

std::shared_ptr<const TorusTable> build_table(const EwaldParameters& p, int n) {
  auto tab = std::make_shared<TorusTable>();
  tab->n = n;
  tab->h = 0.5 / n;
  tab->stride = n + 7;
  tab->values.resize(static_cast<std::size_t>(tab->stride) * tab->stride);
  for (int i = -3; i <= n + 3; ++i) {
    for (int j = -3; j <= n + 3; ++j) {
      tab->values[static_cast<std::size_t>(i + 3) * tab->stride + (j + 3)] =
          ewald_regular(p, i * tab->h, j * tab->h);
    }
  }
  // Compare against direct sums on a fixed pseudo-random sample.
  RandomStream stream(0x7ab1e, {0, static_cast<std::uint32_t>(n), 0});
  double err = 0.0;
  for (int s = 0; s < 2048; ++s) {
    const double u = 0.5 * stream.uniform();
    const double v = 0.5 * stream.uniform();
    err = std::max(err, std::abs(table_lookup(*tab, u, v) - ewald_regular(p, u, v)));
  }
  tab->error = 2.0 * err + p.truncation_bound;
  return tab;
}

/// Tables are expensive to build and immutable, so they are shared per
/// (accuracy, tau).
std::shared_ptr<const TorusTable> cached_table(const EwaldParameters& p,
                                               double accuracy) {
  static std::mutex mutex;
  static std::map<std::pair<double, double>, std::shared_ptr<const TorusTable>> cache;
  const auto key = std::make_pair(accuracy, p.tau);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  std::shared_ptr<const TorusTable> tab;
  for (int n = 128;; n *= 2) {
    tab = build_table(p, n);
    if (tab->error <= accuracy || n >= 2048) break;
  }
  std::lock_guard lock(mutex);
  return cache.emplace(key, tab).first->second;
}

}  // namespace

struct GreenKernel::Impl {
  SurfaceModel surface = SurfaceModel::torus();
  GreenMethod method = GreenMethod::TorusEwald;
  GreenOptions options;
  EwaldParameters ewald;
  std::shared_ptr<const TorusTable> table;
  int fourier_cutoff = 0;
  std::vector<double> fourier_weights;  // (cutoff+1)^2, multiplicities folded in

  double fourier_sum(double x, double y) const {
    const int m = fourier_cutoff;
    std::vector<double> cx(m + 1), cy(m + 1);
    for (int a = 0; a <= m; ++a) {
      cx[a] = std::cos(2.0 * kPi * a * x);
      cy[a] = std::cos(2.0 * kPi * a * y);
    }
    CompensatedSum total;
    for (int a = 0; a <= m; ++a) {
      const double* w = fourier_weights.data() + static_cast<std::size_t>(a) * (m + 1);
      double row = 0.0;
      for (int b = 0; b <= m; ++b) row += w[b] * cy[b];
      total.add(cx[a] * row);
    }
    return total.value();
  }
};

double GreenKernel::sphere_fast(const Impl&, const Point& x, const Point& y) {
  const double dx = x.x - y.x;
  const double dy = x.y - y.y;
  const double dz = x.z - y.z;
  // 1 - cos(theta) = |x - y|^2 / 2, without cancellation for close points.
  const double chord2 = dx * dx + dy * dy + dz * dz;
  if (chord2 == 0.0) return kInf;
  return std::log(4.0 / chord2) - 1.0;
}

double GreenKernel::torus_table_fast(const Impl& impl, const Point& x, const Point& y) {
  double dx, dy;
  torus_displacement(x, y, dx, dy);
  const double u = std::abs(dx);
  const double v = std::abs(dy);
  const double r2 = u * u + v * v;
  if (r2 == 0.0) return kInf;
  return table_lookup(*impl.table, u, v) - std::log(r2) / (4.0 * kPi);
}

double GreenKernel::torus_fourier_fast(const Impl& impl, const Point& x, const Point& y) {
  double dx, dy;
  torus_displacement(x, y, dx, dy);
  if (dx == 0.0 && dy == 0.0) return kInf;
  return impl.fourier_sum(dx, dy);
}

GreenKernel GreenKernel::sphere(const GreenOptions& options) {
  auto impl = std::make_shared<Impl>();
  impl->surface = SurfaceModel::sphere();
  impl->method = GreenMethod::SphereClosedForm;
  impl->options = options;
  return GreenKernel(std::move(impl), &GreenKernel::sphere_fast, options.constant_offset);
}

GreenKernel GreenKernel::torus_ewald(const GreenOptions& options) {
  auto impl = std::make_shared<Impl>();
  impl->surface = SurfaceModel::torus();
  impl->method = GreenMethod::TorusEwald;
  impl->options = options;
  impl->ewald = ewald_parameters(options.accuracy, options.ewald_tau);
  impl->table = cached_table(impl->ewald, options.accuracy);
  return GreenKernel(std::move(impl), &GreenKernel::torus_table_fast, options.constant_offset);
}

GreenKernel GreenKernel::torus_fourier_oracle(const GreenOptions& options) {
  if (options.fourier_cutoff < 1 || options.smoothing_order < 0) {
    throw InputError("torus_fourier_oracle: cutoff must be >= 1 and order >= 0");
  }
  auto impl = std::make_shared<Impl>();
  impl->surface = SurfaceModel::torus();
  impl->method = GreenMethod::TorusFourierOracle;
  impl->options = options;
  const int m = options.fourier_cutoff;
  impl->fourier_cutoff = m;
  impl->fourier_weights.assign(static_cast<std::size_t>(m + 1) * (m + 1), 0.0);
  for (int a = 0; a <= m; ++a) {
    for (int b = 0; b <= m; ++b) {
      if (a == 0 && b == 0) continue;
      const double m2 = static_cast<double>(a * a + b * b);
      const double s = fourier_smoothing(std::sqrt(m2) / m, options.smoothing_order);
      const double mult = (a > 0 ? 2.0 : 1.0) * (b > 0 ? 2.0 : 1.0);
      impl->fourier_weights[static_cast<std::size_t>(a) * (m + 1) + b] =
          mult * s / (4.0 * kPi * kPi * m2);
    }
  }
  return GreenKernel(std::move(impl), &GreenKernel::torus_fourier_fast, options.constant_offset);
}

GreenKernel GreenKernel::for_surface(const SurfaceModel& s, const GreenOptions& options) {
  return s.is_torus() ? torus_ewald(options) : sphere(options);
}

const SurfaceModel& GreenKernel::surface() const { return impl_->surface; }
GreenMethod GreenKernel::method() const { return impl_->method; }
const GreenOptions& GreenKernel::options() const { return impl_->options; }

GreenKernel GreenKernel::with_offset(double c) const {
  return GreenKernel(impl_, fast_, offset_ + c);
}

double GreenKernel::operator()(const Point& x, const Point& y) const {
  validate_point(impl_->surface, x);
  validate_point(impl_->surface, y);
  const double g = eval_fast(x, y);
  if (std::isinf(g)) throw DiagonalError("Green function evaluated on the diagonal");
  return g;
}

double GreenKernel::torus_direct(double dx, double dy) const {
  switch (impl_->method) {
    case GreenMethod::TorusEwald:
      return ewald_direct(impl_->ewald, dx, dy) + offset_;
    case GreenMethod::TorusFourierOracle:
      if (dx == 0.0 && dy == 0.0) return kInf;
      return impl_->fourier_sum(dx, dy) + offset_;
    case GreenMethod::SphereClosedForm:
      break;
  }
  throw UnsupportedError("torus_direct: kernel is not a torus kernel");
}

double GreenKernel::torus_regular_part(double dx, double dy) const {
  if (impl_->method != GreenMethod::TorusEwald) {
    throw UnsupportedError("torus_regular_part: requires the Ewald kernel");
  }
  return ewald_regular(impl_->ewald, dx, dy) + offset_;
}

double GreenKernel::singular_coefficient() const {
  return impl_->surface.volume() / (2.0 * kPi);
}

const EwaldParameters& GreenKernel::ewald() const {
  if (impl_->method != GreenMethod::TorusEwald) {
    throw UnsupportedError("ewald: requires the Ewald kernel");
  }
  return impl_->ewald;
}

double GreenKernel::table_error() const {
  return impl_->table ? impl_->table->error : 0.0;
}

// ---------------------------------------------------------------------------

double mean_zero_residual(const GreenKernel& k, const Point& x, const WeightedPointSet& q) {
  CompensatedSum total;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double g = k.eval_fast(x, q.points[j]);
    if (std::isinf(g)) continue;
    total.add(q.weights[j] * g);
  }
  return total.value();
}

double fourier_mode_check(const GreenKernel& k, std::array<int, 2> mode, const Point& x,
                          const WeightedPointSet& q) {
  if (!k.surface().is_torus()) {
    throw UnsupportedError("fourier_mode_check: torus only (use legendre_projection on the sphere)");
  }
  if (mode[0] == 0 && mode[1] == 0) throw InputError("fourier_mode_check: mode must be nonzero");
  const double m2 = static_cast<double>(mode[0] * mode[0] + mode[1] * mode[1]);
  CompensatedSum total;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const Point& y = q.points[j];
    const double g = k.eval_fast(x, y);
    if (std::isinf(g)) continue;
    total.add(q.weights[j] * g * std::cos(2.0 * kPi * (mode[0] * y.x + mode[1] * y.y)));
  }
  const double target = std::cos(2.0 * kPi * (mode[0] * x.x + mode[1] * x.y)) / (4.0 * kPi * kPi * m2);
  return std::abs(total.value() - target);
}

double legendre_target(int ell) {
  if (ell < 0) throw InputError("legendre_target: negative degree");
  if (ell == 0) return 0.0;
  return (2.0 * ell + 1.0) / (static_cast<double>(ell) * (ell + 1.0));
}

double legendre_projection(const GreenKernel& k, int ell) {
  if (k.surface().is_torus()) throw UnsupportedError("legendre_projection: sphere only");
  if (ell < 0) throw InputError("legendre_projection: negative degree");
  const Point north{0.0, 0.0, 1.0};
  // Integrate in s = 1 - cos(theta) so the log singularity sits at s = 0
  // where small arguments are exact.
  auto integrand = [&](double s) {
    const double t = 1.0 - s;
    const Point y{std::sqrt(s * (2.0 - s)), 0.0, t};
    return k.eval_fast(north, y) * std::legendre(static_cast<unsigned>(ell), t);
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double integral = integrator.integrate(integrand, 0.0, 2.0, 1e-14);
  return 0.5 * (2.0 * ell + 1.0) * integral;
}

namespace {

/// (2 pi / vol) int_0^rho0 (A + B |log rho|)^2 rho d rho for rho0 < 1.
double log_disc_integral(double a, double b, double rho0, double volume) {
  const double l = std::log(rho0);
  const double r2 = rho0 * rho0;
  const double i0 = r2 / 2.0;
  const double i1 = r2 * (l / 2.0 - 0.25);
  const double i2 = r2 / 2.0 * (l * l - l + 0.5);
  return 2.0 * kPi / volume * (a * a * i0 - 2.0 * a * b * i1 + b * b * i2);
}

/// sup |G + B log rho| over sampled points at distance <= rho0 from a base
/// point, padded for the unsampled interior.
double regular_part_bound(const GreenKernel& k, double rho0) {
  const double b = k.singular_coefficient();
  const bool torus = k.surface().is_torus();
  const Point base = torus ? Point{0.25, 0.25, 0.0} : Point{0.0, 0.0, 1.0};
  double sup = 0.0;
  for (double frac : {1.0, 0.5, 0.25, 0.125}) {
    const double rho = rho0 * frac;
    for (int a = 0; a < 16; ++a) {
      const double phi = 2.0 * kPi * a / 16.0;
      Point y;
      if (torus) {
        y = torus_point(base.x + rho * std::cos(phi), base.y + rho * std::sin(phi));
      } else {
        y = {std::sin(rho) * std::cos(phi), std::sin(rho) * std::sin(phi), std::cos(rho)};
      }
      const double d = std::sqrt(squared_distance(k.surface(), base, y));
      sup = std::max(sup, std::abs(k.eval_fast(base, y) + b * std::log(d)));
    }
  }
  return 1.01 * sup + 1e-6;
}

struct QuadratureSum {
  double sum = 0.0;       // off-diagonal cells only
  double exclusion = 0.0; // bound on the excluded diagonal cells
};

QuadratureSum torus_quadrature_sigma2(const GreenKernel& k, std::size_t side) {
  const double h = 1.0 / static_cast<double>(side);
  const Point origin{0.0, 0.0, 0.0};
  CompensatedSum total;
  for (std::size_t a = 0; a < side; ++a) {
    for (std::size_t b = 0; b < side; ++b) {
      if (a == 0 && b == 0) continue;
      const double g = k.eval_fast(origin, {a * h, b * h, 0.0});
      total.add(g * g);
    }
  }
  // Translation invariance: the K^2 x K^2 product sum equals K^2 times the
  // sum over differences.
  QuadratureSum out;
  out.sum = total.value() * h * h;
  const double rho0 = kHalfDiag * h;
  out.exclusion = log_disc_integral(regular_part_bound(k, rho0), k.singular_coefficient(),
                                    rho0, 1.0);
  return out;
}

QuadratureSum sphere_quadrature_sigma2(const GreenKernel& k, std::size_t n) {
  const WeightedPointSet q = quadrature(k.surface(), n);
  CompensatedSum total;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double g = k.eval_fast(q.points[i], q.points[j]);
      row += g * g;
    }
    total.add(row);
  }
  QuadratureSum out;
  const double w = 1.0 / static_cast<double>(n);
  out.sum = 2.0 * total.value() * w * w;
  // Cap of dx-mass 1/N around each node.
  const double rho0 = std::acos(1.0 - 2.0 * w);
  out.exclusion = log_disc_integral(regular_part_bound(k, rho0), k.singular_coefficient(),
                                    rho0, k.surface().volume());
  return out;
}

Sigma2Report integral_sigma2(const GreenKernel& k) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  Sigma2Report r;
  r.method = Sigma2Method::Integral;
  double err = 0.0;
  if (k.surface().is_torus()) {
    // Eight copies of the triangle 0 <= y <= x <= 1/2, in polar coordinates
    // about the base point so the log singularity sits at r = 0.
    const Point origin{0.0, 0.0, 0.0};
    std::size_t evals = 0;
    auto radial = [&](double theta) {
      const double c = std::cos(theta), s = std::sin(theta);
      auto f = [&](double rho) {
        // rho^2 underflows below this; the piece contributes ~rho^2 log^2 rho
        if (rho < 1e-100) return 0.0;
        ++evals;
        const double g = k.eval_fast(origin, torus_point(rho * c, rho * s));
        return g * g * rho;
      };
      return integrator.integrate(f, 0.0, 0.5 / c, 1e-13);
    };
    r.value = 8.0 * integrator.integrate(radial, 0.0, kPi / 4.0, 1e-11, &err);
    r.error_estimate = 8.0 * err + 2.0 * k.table_error();
    r.terms = evals;
  } else {
    // s = 1 - cos(theta); dx pushes forward to ds / 2 on [0, 2].
    const Point north{0.0, 0.0, 1.0};
    auto f = [&](double s) {
      const double g = k.eval_fast(north, {std::sqrt(s * (2.0 - s)), 0.0, 1.0 - s});
      return g * g;
    };
    std::size_t levels = 0;
    r.value = 0.5 * integrator.integrate(f, 0.0, 2.0, 1e-14, &err, nullptr, &levels);
    r.error_estimate = 0.5 * err + 1e-15;
    r.terms = levels;
  }
  return r;
}

Sigma2Report spectral_sigma2(const GreenKernel& k, double tol) {
  // Terms (2l+1)/(l(l+1))^2 decrease and integrate to 1/(a(a+1)) on [a, inf).
  const auto l_max = static_cast<std::size_t>(std::ceil(std::cbrt(2.0 / tol))) + 1;
  CompensatedSum partial;
  for (std::size_t l = l_max; l >= 1; --l) {
    const double dl = static_cast<double>(l);
    const double t = dl * (dl + 1.0);
    partial.add((2.0 * dl + 1.0) / (t * t));
  }
  const double dl = static_cast<double>(l_max);
  const double tail_hi = 1.0 / (dl * (dl + 1.0));
  const double tail_lo = 1.0 / ((dl + 1.0) * (dl + 2.0));
  Sigma2Report r;
  r.method = Sigma2Method::SpectralSum;
  const double c = k.constant_offset();
  r.value = partial.value() + 0.5 * (tail_lo + tail_hi) + c * c;
  r.error_estimate = 0.5 * (tail_hi - tail_lo) + 1e-15;
  r.terms = l_max;
  return r;
}

Sigma2Report lattice_sigma2(const GreenKernel& k, double tol) {
  const double scale = 1.0 / (16.0 * std::pow(kPi, 4));
  const double a = kHalfDiag;
  auto tail_bounds = [&](double radius) {
    const double b = radius - 2.0 * a;
    const double big = radius + 2.0 * a;
    const double hi = 2.0 * kPi * (0.5 / (b * b) + a / (3.0 * b * b * b));
    const double lo = 2.0 * kPi * (0.5 / (big * big) - a / (3.0 * big * big * big));
    return std::make_pair(lo, hi);
  };
  int radius = 64;
  while (true) {
    auto [lo, hi] = tail_bounds(radius);
    if (0.5 * (hi - lo) * scale <= tol) break;
    radius *= 2;
  }
  // Quadrant decomposition: (mx >= 1, my >= 0) rotated by 90 degree steps
  // covers every nonzero lattice point once.
  CompensatedSum total;
  const long r2max = static_cast<long>(radius) * radius;
  for (long mx = radius; mx >= 1; --mx) {
    const long my_max = static_cast<long>(std::floor(std::sqrt(static_cast<double>(r2max - mx * mx))));
    double row = 0.0;
    for (long my = my_max; my >= 0; --my) {
      const double m2 = static_cast<double>(mx * mx + my * my);
      row += 1.0 / (m2 * m2);
    }
    total.add(row);
  }
  auto [lo, hi] = tail_bounds(radius);
  Sigma2Report r;
  r.method = Sigma2Method::LatticeSum;
  const double c = k.constant_offset();
  r.value = (4.0 * total.value() + 0.5 * (lo + hi)) * scale + c * c;
  r.error_estimate = 0.5 * (hi - lo) * scale + 1e-15;
  r.terms = static_cast<std::size_t>(radius);
  return r;
}

}  // namespace

Sigma2Report sigma2(const GreenKernel& k, Sigma2Method method, const Sigma2Options& options) {
  const SurfaceModel& s = k.surface();
  switch (method) {
    case Sigma2Method::SpectralSum:
      if (s.is_torus()) throw UnsupportedError("sigma2: SpectralSum is the sphere route");
      return spectral_sigma2(k, options.tail_tolerance);
    case Sigma2Method::LatticeSum:
      if (!s.is_torus()) throw UnsupportedError("sigma2: LatticeSum is the torus route");
      return lattice_sigma2(k, options.tail_tolerance);
    case Sigma2Method::MonteCarlo: {
      if (options.monte_carlo_pairs < 2) throw InputError("sigma2: need at least 2 pairs");
      RandomStream stream(options.seed, {experiment_id::kSigma2MonteCarlo, 0, 0});
      std::vector<double> values;
      values.reserve(options.monte_carlo_pairs);
      while (values.size() < options.monte_carlo_pairs) {
        const auto pts = sample_uniform(s, stream, 2);
        const double g = k.eval_fast(pts[0], pts[1]);
        if (std::isinf(g)) continue;
        values.push_back(g * g);
      }
      const SampleSummary sum = summarize(values);
      return {sum.mean, Sigma2Method::MonteCarlo, sum.std_error, values.size()};
    }
    case Sigma2Method::Quadrature: {
      std::size_t res = options.quadrature_resolution;
      if (res == 0) res = s.is_torus() ? 512 : 4096;
      const std::size_t coarse_res = s.is_torus() ? std::max<std::size_t>(res / 2, 2)
                                                  : std::max<std::size_t>(res / 4, 16);
      auto run = [&](std::size_t r) {
        return s.is_torus() ? torus_quadrature_sigma2(k, r) : sphere_quadrature_sigma2(k, r);
      };
      const QuadratureSum fine = run(res);
      const QuadratureSum coarse = run(coarse_res);
      // The excluded cells carry a nonnegative integrand bounded by exclusion.
      const double v_fine = fine.sum + 0.5 * fine.exclusion;
      const double v_coarse = coarse.sum + 0.5 * coarse.exclusion;
      Sigma2Report r;
      r.method = Sigma2Method::Quadrature;
      r.value = v_fine;
      r.error_estimate = 0.5 * fine.exclusion + std::abs(v_fine - v_coarse);
      r.terms = s.is_torus() ? res * res : res;
      return r;
    }
    case Sigma2Method::Integral:
      return integral_sigma2(k);
  }
  throw InputError("sigma2: unknown method");
}

Sigma2Report certified_sigma2(const GreenKernel& k) {
  return sigma2(k, k.surface().is_torus() ? Sigma2Method::LatticeSum : Sigma2Method::SpectralSum);
}

double near_diagonal_regularity(const GreenKernel& k, std::size_t samples,
                                const NearDiagonalOptions& options) {
  if (!(options.inner_radius > 0.0) || !(options.outer_radius >= options.inner_radius) ||
      options.outer_radius > 0.5) {
    throw InputError("near_diagonal_regularity: need 0 < inner <= outer <= 0.5");
  }
  const double c = options.coefficient.value_or(k.singular_coefficient());
  const SurfaceModel& s = k.surface();
  RandomStream stream(options.seed, {experiment_id::kNearDiagonal, 0, 0});
  const double log_lo = std::log(options.inner_radius);
  const double log_hi = std::log(options.outer_radius);
  double sup = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    double rho;
    if (i == 0) {
      rho = options.inner_radius;
    } else if (i == 1) {
      rho = options.outer_radius;
    } else {
      rho = std::exp(log_lo + (log_hi - log_lo) * stream.uniform());
    }
    const double phi = 2.0 * kPi * stream.uniform();
    const Point x = sample_uniform(s, stream, 1).front();
    Point y;
    if (s.is_torus()) {
      y = torus_point(x.x + rho * std::cos(phi), x.y + rho * std::sin(phi));
    } else {
      // Orthonormal tangent frame at x.
      const double ax = std::abs(x.x) < 0.9 ? 1.0 : 0.0;
      const double ay = 1.0 - ax;
      double e1x = ax - x.x * (ax * x.x + ay * x.y);
      double e1y = ay - x.y * (ax * x.x + ay * x.y);
      double e1z = -x.z * (ax * x.x + ay * x.y);
      const double n1 = std::sqrt(e1x * e1x + e1y * e1y + e1z * e1z);
      e1x /= n1;
      e1y /= n1;
      e1z /= n1;
      const double e2x = x.y * e1z - x.z * e1y;
      const double e2y = x.z * e1x - x.x * e1z;
      const double e2z = x.x * e1y - x.y * e1x;
      const double cp = std::cos(phi), sp = std::sin(phi);
      const double cr = std::cos(rho), sr = std::sin(rho);
      y = sphere_point(cr * x.x + sr * (cp * e1x + sp * e2x), cr * x.y + sr * (cp * e1y + sp * e2y),
                       cr * x.z + sr * (cp * e1z + sp * e2z));
    }
    const double d = std::sqrt(squared_distance(s, x, y));
    const double g = k.eval_fast(x, y);
    if (std::isinf(g) || d == 0.0) continue;
    sup = std::max(sup, std::abs(g + c * std::log(d)));
  }
  return sup;
}

}  // namespace gwlab
