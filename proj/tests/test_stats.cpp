// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gwlab/error.hpp"
#include "gwlab/random.hpp"
#include "gwlab/stats.hpp"

using namespace gwlab;

TEST(Stats, SummarizeSmallSample) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = summarize(v);
  EXPECT_EQ(s.count, 4u);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.stddev, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_NEAR(s.std_error, std::sqrt(5.0 / 3.0) / 2, 1e-15);
}

TEST(Stats, CompensatedSumRecoversCancellation) {
  CompensatedSum acc;
  acc.add(1e16);
  for (int i = 0; i < 1000; ++i) acc.add(1.0);
  acc.add(-1e16);
  EXPECT_EQ(acc.value(), 1000.0);
}

// 95% intervals on Gaussian data with known mean cover it in 95% +- 3% of
// 1000 trials.
TEST(Stats, ConfidenceIntervalCoverage) {
  StreamFamily fam(20261019, experiment_id::kUser);
  const double mu = 1.7;
  int covered = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    auto rs = fam.substream(0, t);
    std::vector<double> v(200);
    for (auto& x : v) x = mu + 2.0 * rs.normal();
    const auto s = summarize(v);
    if (s.ci_low() <= mu && mu <= s.ci_high()) ++covered;
  }
  const double rate = double(covered) / trials;
  EXPECT_GE(rate, 0.92);
  EXPECT_LE(rate, 0.98);
}

TEST(Stats, LeastSquaresExactLine) {
  std::vector<double> x, y;
  for (int n : {128, 256, 512, 1024, 2048, 4096}) {
    x.push_back(std::log(n));
    y.push_back(0.3 + std::log(n) / (4 * M_PI));
  }
  const auto f = least_squares(x, y);
  EXPECT_NEAR(f.slope, 1 / (4 * M_PI), 1e-12);
  EXPECT_NEAR(f.intercept, 0.3, 1e-12);
  EXPECT_LT(f.slope_se, 1e-12);
}

TEST(Stats, LeastSquaresNeedsTwoDistinctX) {
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  EXPECT_THROW(least_squares(x, y), InputError);
}

TEST(Stats, QuantileType7) {
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile({10, 20}, 0.25), 12.5);
}
