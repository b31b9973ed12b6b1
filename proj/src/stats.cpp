// SPDX-License-Identifier: Apache-2.0
#include "gwlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "gwlab/error.hpp"

namespace gwlab {

SampleSummary summarize(std::span<const double> values) {
  SampleSummary s;
  s.count = values.size();
  if (values.empty()) return s;

  CompensatedSum total;
  for (double v : values) total.add(v);
  s.mean = total.value() / static_cast<double>(values.size());
  if (values.size() < 2) return s;

  CompensatedSum squares;
  for (double v : values) {
    const double d = v - s.mean;
    squares.add(d * d);
  }
  const double var = squares.value() / static_cast<double>(values.size() - 1);
  s.stddev = std::sqrt(var);
  s.std_error = s.stddev / std::sqrt(static_cast<double>(values.size()));
  return s;
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InputError("least_squares: x and y lengths differ");
  }
  const std::size_t n = x.size();
  LinearFit fit;
  fit.points = n;
  if (n < 2) throw InputError("least_squares: singular design (fewer than 2 points)");

  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < n; ++i) {
    sx.add(x[i]);
    sy.add(y[i]);
  }
  const double mx = sx.value() / static_cast<double>(n);
  const double my = sy.value() / static_cast<double>(n);

  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    sxx.add(dx * dx);
    sxy.add(dx * (y[i] - my));
  }
  const double ssx = sxx.value();
  if (!(ssx > 0.0)) {
    throw InputError("least_squares: singular design (fewer than 2 distinct x)");
  }
  fit.slope = sxy.value() / ssx;
  fit.intercept = my - fit.slope * mx;

  if (n > 2) {
    CompensatedSum rss;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss.add(r * r);
    }
    const double s2 = rss.value() / static_cast<double>(n - 2);
    fit.residual_sd = std::sqrt(s2);
    fit.slope_se = std::sqrt(s2 / ssx);
    fit.intercept_se =
        std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / ssx));
  }
  return fit;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InputError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace gwlab
