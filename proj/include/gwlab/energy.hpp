// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "gwlab/green.hpp"
#include "gwlab/random.hpp"
#include "gwlab/surface.hpp"

namespace gwlab {

/// S_n = sum over ordered pairs i != j of G(x_i, x_j), computed as twice the
/// unordered sum. Points are sorted first, so the result is bitwise
/// invariant under permutation of the input. Returns +infinity if two points
/// coincide. Inputs are not validated (hot path); use validate_point first
/// for untrusted data.
double green_energy(const GreenKernel& k, std::span<const Point> pts);

struct EnergyMomentReport {
  std::size_t n = 0;
  std::size_t replicas = 0;  // replicas that produced a finite S_n
  std::size_t excluded = 0;  // replicas dropped for a coincidence
  double mean_s = 0.0;
  double se_s = 0.0;
  double mean_s2 = 0.0;
  double se_s2 = 0.0;
  double mean_abs_s = 0.0;
  double se_abs_s = 0.0;
  double sigma2 = 0.0;        // certified value used for the prediction
  double predicted_s2 = 0.0;  // 2 n (n - 1) sigma^2
  double ratio = 0.0;         // mean_s2 / predicted_s2
  double ratio_se = 0.0;
  double ratio_ci_low = 0.0;
  double ratio_ci_high = 0.0;
  double abs_bound = 0.0;        // sqrt(2 n (n - 1)) sigma
  double abs_bound_loose = 0.0;  // sqrt(2) sigma n
};

struct EnergyMomentOptions {
  std::size_t workers = 0;  // 0 = default_workers()
};

/// Monte Carlo moments of S_n over `replicas` independent uniform samples.
/// Replica r draws from family.substream(n, r); aggregation runs in replica
/// order, so the report does not depend on the worker count.
/// Requires n >= 2 and replicas >= 100 (InputError otherwise).
EnergyMomentReport energy_moments(const SurfaceModel& s, const GreenKernel& k,
                                  std::size_t n, std::size_t replicas,
                                  const StreamFamily& family,
                                  const EnergyMomentOptions& options = {});

/// Raw per-replica S_n values behind energy_moments (same streams).
std::vector<double> energy_samples(const SurfaceModel& s, const GreenKernel& k,
                                   std::size_t n, std::size_t replicas,
                                   const StreamFamily& family,
                                   std::size_t workers = 0);

}  // namespace gwlab
