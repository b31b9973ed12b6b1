// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>

#include "gwlab/surface.hpp"

namespace gwlab {

enum class GreenMethod { SphereClosedForm, TorusEwald, TorusFourierOracle };

std::string_view to_string(GreenMethod m);

/// Ewald split of the torus kernel. With heat time tau,
///
///   G(r) = sum_n E1(|r - n|^2 / 4 tau) / 4 pi  -  tau
///        + sum_{m != 0} cos(2 pi m.r) exp(-4 pi^2 |m|^2 tau) / (4 pi^2 |m|^2).
///
/// The first sum runs over images with |r - n| < real_cutoff, the second over
/// |m| <= reciprocal_cutoff; truncation_bound bounds everything dropped.
struct EwaldParameters {
  double tau = 0.0;
  double real_cutoff = 0.0;
  double reciprocal_cutoff = 0.0;
  double truncation_bound = 0.0;
};

/// Smallest cutoffs whose certified truncation error is below accuracy / 4.
EwaldParameters ewald_parameters(double accuracy, double tau);

struct GreenOptions {
  /// Target absolute error of torus evaluations.
  double accuracy = 1e-10;
  /// Ewald heat time; 1/(4 pi) balances real and reciprocal sums.
  double ewald_tau = 0.07957747154594767;
  /// Fourier oracle: coefficients with |m| <= cutoff, flat-top smoothing of
  /// the shell cutoff/2 < |m| <= cutoff by a C^order polynomial step.
  int fourier_cutoff = 512;
  int smoothing_order = 6;
  /// Added to every evaluation. Nonzero values break mean-zero on purpose
  /// (fault injection and linearity tests).
  double constant_offset = 0.0;
};

/// Symmetric mean-zero Green function of -Laplace with respect to the
/// normalized volume measure dx:
///
///   sphere: G(x, y) = log(2 / (1 - cos theta)) - 1
///   torus:  G(r)    = sum_{m != 0} exp(2 pi i m.r) / (4 pi^2 |m|^2),  r = x - y
///
/// Copies share immutable precomputed tables and are safe to use from many
/// threads.
class GreenKernel {
 public:
  static GreenKernel sphere(const GreenOptions& options = {});
  static GreenKernel torus_ewald(const GreenOptions& options = {});
  static GreenKernel torus_fourier_oracle(const GreenOptions& options = {});
  /// Closed form on the sphere, Ewald on the torus.
  static GreenKernel for_surface(const SurfaceModel& s,
                                 const GreenOptions& options = {});

  const SurfaceModel& surface() const;
  GreenMethod method() const;
  const GreenOptions& options() const;
  double constant_offset() const { return offset_; }

  /// Same kernel plus a constant; shares the precomputed tables.
  GreenKernel with_offset(double c) const;

  /// G(x, y). Validates the points; throws DiagonalError if x == y.
  double operator()(const Point& x, const Point& y) const;

  /// G(x, y) without validation; +infinity when x and y coincide.
  double eval_fast(const Point& x, const Point& y) const {
    return fast_(*impl_, x, y) + offset_;
  }

  /// Torus only: G at displacement (dx, dy) evaluated directly by the method
  /// (Ewald sums or Fourier partial sums, never the table).
  double torus_direct(double dx, double dy) const;

  /// Torus Ewald only: G(r) + log|r| / 2 pi at any r in R^2 (finite at 0).
  double torus_regular_part(double dx, double dy) const;

  /// Coefficient c in G(x,y) = -c log d(x,y) + O(1): vol(M) / 2 pi.
  double singular_coefficient() const;

  /// Torus Ewald: Ewald cutoffs in use.
  const EwaldParameters& ewald() const;
  /// Torus Ewald: estimated max error of the tabulated fast path against
  /// the direct sums (0 for other methods).
  double table_error() const;

 private:
  struct Impl;
  using FastFn = double (*)(const Impl&, const Point&, const Point&);

  GreenKernel(std::shared_ptr<const Impl> impl, FastFn fast, double offset)
      : impl_(std::move(impl)), fast_(fast), offset_(offset) {}

  static double sphere_fast(const Impl&, const Point& x, const Point& y);
  static double torus_table_fast(const Impl&, const Point& x, const Point& y);
  static double torus_fourier_fast(const Impl&, const Point& x, const Point& y);

  std::shared_ptr<const Impl> impl_;
  FastFn fast_;
  double offset_;
};

/// Quadrature of x -> int G(x, y) dy: sum_j w_j G(x, y_j). Quadrature nodes
/// coinciding with x are skipped (their mass is simply dropped).
double mean_zero_residual(const GreenKernel& k, const Point& x,
                          const WeightedPointSet& q);

/// Torus eigenmode check of -Laplace u = f for f = cos(2 pi m.y):
/// | sum_j w_j G(x, y_j) cos(2 pi m.y_j) - cos(2 pi m.x) / (4 pi^2 |m|^2) |.
/// Throws UnsupportedError on the sphere, InputError for m = 0.
double fourier_mode_check(const GreenKernel& k, std::array<int, 2> mode,
                          const Point& x, const WeightedPointSet& q);

/// Sphere only: coefficient of P_l in G(x, y) = sum_l c_l P_l(x.y), computed
/// by tanh-sinh quadrature of kernel evaluations.
double legendre_projection(const GreenKernel& k, int ell);

/// Expected sphere coefficient (2l + 1) / (l (l + 1)); 0 for l = 0.
double legendre_target(int ell);

/// SpectralSum and LatticeSum sum the eigenvalue series; MonteCarlo and
/// Quadrature average G^2 over random pairs or quadrature node pairs;
/// Integral integrates G(x0, .)^2 for one base point by tanh-sinh (polar
/// coordinates on the torus, zonal on the sphere), which suffices because
/// G(x, y)^2 integrates to the same value for every x.
enum class Sigma2Method { SpectralSum, LatticeSum, MonteCarlo, Quadrature, Integral };

std::string_view to_string(Sigma2Method m);

struct Sigma2Report {
  double value = 0.0;
  Sigma2Method method = Sigma2Method::SpectralSum;
  /// Certified bound (spectral, lattice), standard error (Monte Carlo),
  /// exclusion bound plus refinement difference (quadrature) or the
  /// integrator's error estimate plus kernel error (integral).
  double error_estimate = 0.0;
  std::size_t terms = 0;
};

struct Sigma2Options {
  std::size_t monte_carlo_pairs = 1'000'000;
  std::uint64_t seed = 0x5eed;
  /// 0 selects the default: torus grid side 512, sphere 4096 nodes.
  std::size_t quadrature_resolution = 0;
  /// Target width of certified tail brackets.
  double tail_tolerance = 1e-11;
};

/// sigma^2 = int int G(x,y)^2 dx dy. SpectralSum needs the sphere,
/// LatticeSum the torus (UnsupportedError otherwise). The analytic sums
/// include the kernel's constant offset c as + c^2.
Sigma2Report sigma2(const GreenKernel& k, Sigma2Method method,
                    const Sigma2Options& options = {});

/// Spectral sum on the sphere, lattice sum on the torus.
Sigma2Report certified_sigma2(const GreenKernel& k);

struct NearDiagonalOptions {
  double inner_radius = 1e-6;
  double outer_radius = 0.1;
  /// Coefficient c in |G + c log d|; defaults to singular_coefficient().
  std::optional<double> coefficient;
  std::uint64_t seed = 0x5eed;
};

/// sup over sampled pairs with d(x,y) in [inner, outer] of
/// |G(x, y) + c log d(x, y)|. Distances are log-uniform and both radii are
/// always included.
double near_diagonal_regularity(const GreenKernel& k, std::size_t samples,
                                const NearDiagonalOptions& options = {});

}  // namespace gwlab
