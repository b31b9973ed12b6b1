// SPDX-License-Identifier: Apache-2.0
#include "gwlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gwlab/error.hpp"

namespace gwlab {

std::string_view to_string(TransportSolver s) {
  switch (s) {
    case TransportSolver::ExactFlow: return "exact";
    case TransportSolver::Entropic: return "entropic";
    case TransportSolver::SemiDiscrete: return "semidiscrete";
    case TransportSolver::PermutationOracle: return "permutation";
  }
  return "unknown";
}

std::string_view to_string(SolverChoice s) {
  switch (s) {
    case SolverChoice::Auto: return "auto";
    case SolverChoice::Exact: return "exact";
    case SolverChoice::Entropic: return "entropic";
    case SolverChoice::SemiDiscrete: return "semidiscrete";
  }
  return "unknown";
}

SolverChoice solver_from_name(std::string_view name) {
  if (name == "auto") return SolverChoice::Auto;
  if (name == "exact") return SolverChoice::Exact;
  if (name == "entropic") return SolverChoice::Entropic;
  if (name == "semidiscrete") return SolverChoice::SemiDiscrete;
  throw InputError("unknown solver '" + std::string(name) +
                   "' (expected auto, exact, entropic or semidiscrete)");
}

CostMatrix::CostMatrix(const SurfaceModel& s, std::vector<Point> rows, std::vector<Point> cols,
                       std::size_t budget_bytes)
    : surface_(s), rows_(rows.size()), cols_(cols.size()) {
  const double bytes = 8.0 * static_cast<double>(rows_) * static_cast<double>(cols_);
  if (bytes <= static_cast<double>(budget_bytes)) {
    values_.resize(rows_ * cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) {
        values_[i * cols_ + j] = squared_distance(s, rows[i], cols[j]);
      }
    }
  } else {
    row_points_ = std::move(rows);
    col_points_ = std::move(cols);
  }
}

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) throw InputError("CostMatrix: size mismatch");
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InputError("CostMatrix: entries must be finite and nonnegative");
    }
  }
}

void CostMatrix::row(std::size_t i, std::span<double> out) const {
  if (!values_.empty()) {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(i * cols_), cols_, out.begin());
    return;
  }
  for (std::size_t j = 0; j < cols_; ++j) {
    out[j] = squared_distance(surface_, row_points_[i], col_points_[j]);
  }
}

double CostMatrix::max_value() const {
  if (!values_.empty()) return *std::max_element(values_.begin(), values_.end());
  if (rows_ == 0 || cols_ == 0) return 0.0;
  // Recomputed matrices only arise from geodesic costs, bounded by diam^2.
  const double d = surface_.diameter();
  return d * d;
}

TransportResult solve_permutation_oracle(const CostMatrix& cost) {
  const std::size_t n = cost.rows();
  if (n != cost.cols()) throw InputError("solve_permutation_oracle: cost must be square");
  if (n == 0 || n > 9) throw InputError("solve_permutation_oracle: need 1 <= n <= 9");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  TransportResult r;
  r.solver = TransportSolver::PermutationOracle;
  r.value = best / static_cast<double>(n);
  r.dual_value = r.value;
  r.iterations = count;
  return r;
}

std::size_t default_resolution(const SurfaceModel& s, std::size_t n) {
  const double dn = static_cast<double>(n);
  if (s.is_torus()) {
    return std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil(8.0 * std::sqrt(dn))));
  }
  return std::max<std::size_t>(4096, 64 * n);
}

double quadrature_bias_bound(const SurfaceModel& s, std::size_t resolution) {
  if (resolution == 0) throw InputError("quadrature_bias_bound: resolution must be positive");
  const double r = static_cast<double>(resolution);
  // Torus: every point of a cell lies within half a diagonal of its centre.
  if (s.is_torus()) return std::sqrt(2.0) / (2.0 * r);
  return kFibonacciBiasConstant / std::sqrt(r);
}

SolverChoice resolve_solver(const SurfaceModel& s, std::size_t n, std::size_t resolution,
                            const W2Options& options) {
  if (options.solver != SolverChoice::Auto) return options.solver;
  const double grid = s.is_torus() ? static_cast<double>(resolution) * resolution
                                   : static_cast<double>(resolution);
  if (static_cast<double>(n) * grid <= static_cast<double>(options.exact_limit)) {
    return SolverChoice::Exact;
  }
  return s.is_torus() ? SolverChoice::SemiDiscrete : SolverChoice::Entropic;
}

W2Estimate w2_to_uniform(const SurfaceModel& s, std::span<const Point> pts,
                         const W2Options& options) {
  const std::size_t n = pts.size();
  if (n == 0) throw InputError("w2_to_uniform: need at least one point");
  for (const Point& p : pts) validate_point(s, p);
  const std::size_t res = options.resolution ? options.resolution : default_resolution(s, n);
  const SolverChoice choice = resolve_solver(s, n, res, options);

  W2Estimate est;
  if (choice == SolverChoice::SemiDiscrete) {
    if (!s.is_torus()) throw UnsupportedError("w2_to_uniform: semi-discrete solver is torus only");
    est.transport = solve_semidiscrete_torus(
        WeightedPointSet::uniform(std::vector<Point>(pts.begin(), pts.end())), options.semidiscrete);
    est.resolution = 0;
    est.bias_bound = 0.0;
  } else {
    if (res > max_quadrature_resolution(s)) {
      throw InputError("w2_to_uniform: resolution exceeds the supported maximum");
    }
    const WeightedPointSet q = quadrature(s, res);
    const std::vector<double> w(n, 1.0 / static_cast<double>(n));
    const CostMatrix cost(s, std::vector<Point>(pts.begin(), pts.end()), q.points);
    est.transport = choice == SolverChoice::Exact ? solve_exact(w, q.weights, cost)
                                                  : solve_entropic(w, q.weights, cost, options.entropic);
    est.resolution = res;
    est.bias_bound = quadrature_bias_bound(s, res);
  }
  est.w2 = std::sqrt(std::max(0.0, est.transport.value));
  est.bracket_low = std::max(0.0, est.w2 - est.bias_bound);
  est.bracket_high = est.w2 + est.bias_bound;
  return est;
}

}  // namespace gwlab
