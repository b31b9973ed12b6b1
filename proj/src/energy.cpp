// SPDX-License-Identifier: Apache-2.0
#include "gwlab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include "gwlab/error.hpp"
#include "gwlab/parallel.hpp"
#include "gwlab/stats.hpp"

namespace gwlab {

double green_energy(const GreenKernel& k, std::span<const Point> pts) {
  std::vector<Point> sorted(pts.begin(), pts.end());
  std::sort(sorted.begin(), sorted.end(), [](const Point& a, const Point& b) {
    return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
  });
  const std::size_t n = sorted.size();
  CompensatedSum total;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double g = k.eval_fast(sorted[i], sorted[j]);
      if (std::isinf(g)) return std::numeric_limits<double>::infinity();
      total.add(g);
    }
  }
  return 2.0 * total.value();
}

std::vector<double> energy_samples(const SurfaceModel& s, const GreenKernel& k,
                                   std::size_t n, std::size_t replicas,
                                   const StreamFamily& family, std::size_t workers) {
  std::vector<double> values(replicas);
  parallel_for(replicas, workers, [&](std::size_t r) {
    RandomStream stream = family.substream(static_cast<std::uint32_t>(n),
                                           static_cast<std::uint32_t>(r));
    const auto pts = sample_uniform(s, stream, n);
    values[r] = green_energy(k, pts);
  });
  return values;
}

EnergyMomentReport energy_moments(const SurfaceModel& s, const GreenKernel& k,
                                  std::size_t n, std::size_t replicas,
                                  const StreamFamily& family,
                                  const EnergyMomentOptions& options) {
  if (n < 2) throw InputError("energy_moments: n must be at least 2");
  if (replicas < 100) throw InputError("energy_moments: replicas must be at least 100");
  if (!(k.surface() == s)) throw InputError("energy_moments: kernel is for a different surface");

  const std::vector<double> samples = energy_samples(s, k, n, replicas, family, options.workers);
  std::vector<double> vs, vs2, vabs;
  vs.reserve(replicas);
  EnergyMomentReport rep;
  rep.n = n;
  for (double v : samples) {
    if (!std::isfinite(v)) {
      ++rep.excluded;
      continue;
    }
    vs.push_back(v);
    vs2.push_back(v * v);
    vabs.push_back(std::abs(v));
  }
  rep.replicas = vs.size();
  if (rep.replicas < 2) throw InputError("energy_moments: fewer than two usable replicas");
  const SampleSummary m1 = summarize(vs);
  const SampleSummary m2 = summarize(vs2);
  const SampleSummary ma = summarize(vabs);
  rep.mean_s = m1.mean;
  rep.se_s = m1.std_error;
  rep.mean_s2 = m2.mean;
  rep.se_s2 = m2.std_error;
  rep.mean_abs_s = ma.mean;
  rep.se_abs_s = ma.std_error;
  rep.sigma2 = certified_sigma2(k).value;
  const double dn = static_cast<double>(n);
  rep.predicted_s2 = 2.0 * dn * (dn - 1.0) * rep.sigma2;
  rep.ratio = rep.mean_s2 / rep.predicted_s2;
  rep.ratio_se = rep.se_s2 / rep.predicted_s2;
  rep.ratio_ci_low = rep.ratio - kZ95 * rep.ratio_se;
  rep.ratio_ci_high = rep.ratio + kZ95 * rep.ratio_se;
  const double sigma = std::sqrt(rep.sigma2);
  rep.abs_bound = std::sqrt(2.0 * dn * (dn - 1.0)) * sigma;
  rep.abs_bound_loose = std::sqrt(2.0) * sigma * dn;
  return rep;
}

}  // namespace gwlab
