// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gwlab/surface.hpp"

namespace gwlab {

enum class TransportSolver { ExactFlow, Entropic, SemiDiscrete, PermutationOracle };
std::string_view to_string(TransportSolver s);

struct TransportResult {
  double value = 0.0;               // transport cost of the returned coupling
  double dual_value = 0.0;          // certified lower bound (exact, semi-discrete)
  double duality_gap = 0.0;         // value - dual_value
  double marginal_violation = 0.0;  // L1 distance of plan marginals to the inputs
  TransportSolver solver = TransportSolver::ExactFlow;
  std::size_t iterations = 0;       // pivots, Sinkhorn sweeps or Newton steps
  double epsilon = 0.0;             // final regularization (entropic only)
  std::size_t dropped_points = 0;   // zero-mass points removed before solving
  std::vector<std::string> warnings;
};

/// Squared geodesic distances between two point sets. Stored densely when
/// rows * cols * 8 bytes fits in the memory budget, otherwise recomputed on
/// access.
class CostMatrix {
 public:
  static constexpr std::size_t kDefaultBudgetBytes = std::size_t{256} << 20;

  CostMatrix(const SurfaceModel& s, std::vector<Point> rows, std::vector<Point> cols,
             std::size_t budget_bytes = kDefaultBudgetBytes);
  /// Explicit matrix, row-major. Entries must be finite and nonnegative.
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool stored() const { return !values_.empty() || (rows_ == 0 || cols_ == 0); }
  double operator()(std::size_t i, std::size_t j) const {
    if (!values_.empty()) return values_[i * cols_ + j];
    return squared_distance(surface_, row_points_[i], col_points_[j]);
  }
  /// Fills out[j] = cost(i, j) for all j.
  void row(std::size_t i, std::span<double> out) const;
  double max_value() const;

 private:
  SurfaceModel surface_ = SurfaceModel::torus();
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Point> row_points_;
  std::vector<Point> col_points_;
  std::vector<double> values_;
};

/// Exact optimal transport by primal network simplex on the complete
/// bipartite graph. Points with zero mass are dropped (with a warning);
/// total masses differing by more than 1e-12 throw InputError. The duality
/// gap uses c-transformed potentials, so dual_value is a valid lower bound.
TransportResult solve_exact(std::span<const double> source_weights,
                            std::span<const double> sink_weights, const CostMatrix& cost);

/// Convenience overload building the geodesic cost matrix.
TransportResult solve_exact(const SurfaceModel& s, const WeightedPointSet& sources,
                            const WeightedPointSet& sinks);

struct EntropicOptions {
  /// Decreasing regularization values; the last one is the final epsilon.
  /// Empty means the default schedule scaled to the cost range.
  std::vector<double> schedule;
  double tolerance = 1e-9;             // L1 marginal violation at the final epsilon
  std::size_t max_iterations = 20000;  // Sinkhorn sweeps summed over the schedule
};

/// Default annealing schedule: geometric from 0.1 * max cost down to
/// `final_epsilon`, factor 1/2 per stage.
std::vector<double> default_epsilon_schedule(double max_cost, double final_epsilon);

/// Final epsilon used when EntropicOptions::schedule is empty.
inline constexpr double kDefaultFinalEpsilon = 1e-4;

/// Log-domain Sinkhorn with epsilon scaling. Returns <C, P> for the plan at
/// the final epsilon. Throws ConvergenceError (carrying the last marginal
/// violation) if the iteration cap is hit.
TransportResult solve_entropic(std::span<const double> source_weights,
                               std::span<const double> sink_weights, const CostMatrix& cost,
                               const EntropicOptions& options = {});

/// Minimum over all n! assignments; equal weights 1/n, square cost, n <= 9.
TransportResult solve_permutation_oracle(const CostMatrix& cost);

struct SemiDiscreteOptions {
  double tolerance = 1e-9;  // max |cell area - mass| relative to the mass
  std::size_t max_iterations = 100;
};

/// W2^2 between weighted points on the flat torus and the uniform measure,
/// by damped Newton on the Laguerre-cell dual. No discretization of the
/// uniform measure is involved. Coincident sites are merged.
TransportResult solve_semidiscrete_torus(const WeightedPointSet& sites,
                                         const SemiDiscreteOptions& options = {});

enum class SolverChoice { Auto, Exact, Entropic, SemiDiscrete };
std::string_view to_string(SolverChoice s);
/// "auto", "exact", "entropic", "semidiscrete"; other names throw InputError.
SolverChoice solver_from_name(std::string_view name);

struct W2Options {
  SolverChoice solver = SolverChoice::Auto;
  std::size_t resolution = 0;  // 0 = default_resolution(s, n)
  std::size_t exact_limit = 1000000;  // Auto uses the exact solver if n * grid <= this
  EntropicOptions entropic;
  SemiDiscreteOptions semidiscrete;
};

struct W2Estimate {
  TransportResult transport;
  std::size_t resolution = 0;  // 0 when no quadrature was built
  double bias_bound = 0.0;     // |W2(mu, proxy) - W2(mu, dx)| <= bias_bound
  double w2 = 0.0;             // sqrt(transport.value)
  double bracket_low = 0.0;    // bounds on W2(mu_n, dx)
  double bracket_high = 0.0;
};

/// Torus: max(64, ceil(8 sqrt n)) per side. Sphere: max(4096, 64 n) points.
std::size_t default_resolution(const SurfaceModel& s, std::size_t n);

/// Upper bound on W2(quadrature(s, resolution), dx).
double quadrature_bias_bound(const SurfaceModel& s, std::size_t resolution);

/// Constant c in the sphere bound c / sqrt(N) for the Fibonacci quadrature.
/// Calibrated with exact solves against 16x refined spirals: if the bound
/// holds at 16N then W2(F_N, dx) <= W2(F_N, F_16N) + c / (4 sqrt N), which
/// needs c >= (4/3) sqrt(N) W2(F_N, F_16N) ~ 1.96 for N in [16, 256].
inline constexpr double kFibonacciBiasConstant = 2.0;

/// W2(mu_n, dx) for the empirical measure of pts (equal weights). Auto
/// picks the exact solver when n * grid <= exact_limit; otherwise the
/// semi-discrete solver on the torus and the entropic solver on the sphere.
W2Estimate w2_to_uniform(const SurfaceModel& s, std::span<const Point> pts,
                         const W2Options& options = {});

/// Which solver Auto resolves to for n points at the given resolution.
SolverChoice resolve_solver(const SurfaceModel& s, std::size_t n, std::size_t resolution,
                            const W2Options& options);

}  // namespace gwlab
