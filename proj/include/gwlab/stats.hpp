// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace gwlab {

/// Two-sided 95% standard normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

/// Neumaier-compensated accumulator. Order of add() calls fixes the result.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct SampleSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1 denominator)
  double std_error = 0.0;

  double ci_low(double z = kZ95) const { return mean - z * std_error; }
  double ci_high(double z = kZ95) const { return mean + z * std_error; }
};

/// Mean, sample standard deviation and standard error of the mean.
/// Two-pass and compensated; deterministic in input order.
SampleSummary summarize(std::span<const double> values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double residual_sd = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x. Throws InputError if
/// fewer than two distinct x values are given.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

/// Empirical quantile with linear interpolation (type 7). Input need not be
/// sorted.
double quantile(std::vector<double> values, double p);

}  // namespace gwlab
