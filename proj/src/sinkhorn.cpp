// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "gwlab/error.hpp"
#include "gwlab/stats.hpp"
#include "gwlab/transport.hpp"

namespace gwlab {

std::vector<double> default_epsilon_schedule(double max_cost, double final_epsilon) {
  if (!(final_epsilon > 0.0)) throw InputError("epsilon schedule: final epsilon must be positive");
  std::vector<double> out;
  for (double e = 0.1 * max_cost; e > final_epsilon; e *= 0.5) out.push_back(e);
  out.push_back(final_epsilon);
  return out;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Scalings are folded back into the potentials once |log u| exceeds this.
constexpr double kAbsorbThreshold = 30.0;
// Newton on the source potentials costs n^2 m per step.
constexpr std::size_t kNewtonMaxSources = 256;

struct Problem {
  std::span<const double> a, b;
  const CostMatrix& cost;
  std::size_t n, m;
};

/// Potentials (f, g) of the current plan P_ij = exp((f_i + g_j - C_ij) / eps).
struct Potentials {
  std::vector<double> f, g;
};

/// Sinkhorn in the log domain, recomputing exponentials every sweep. Used
/// when the cost matrix is not stored. Returns sweeps used.
std::size_t run_log_domain(const Problem& p, Potentials& pot, double eps, double target,
                           std::size_t budget, double& violation) {
  std::vector<double> row(p.m), col_max(p.m), col_sum(p.m);
  std::size_t sweeps = 0;
  while (true) {
    if (sweeps >= budget) return sweeps;
    ++sweeps;
    violation = 0.0;
    for (std::size_t i = 0; i < p.n; ++i) {
      p.cost.row(i, row);
      double mx = kNegInf;
      for (std::size_t j = 0; j < p.m; ++j) mx = std::max(mx, pot.g[j] - row[j]);
      double s = 0.0;
      for (std::size_t j = 0; j < p.m; ++j) s += std::exp((pot.g[j] - row[j] - mx) / eps);
      const double f_new = eps * std::log(p.a[i]) - mx - eps * std::log(s);
      violation += std::abs(p.a[i] - p.a[i] * std::exp((pot.f[i] - f_new) / eps));
      pot.f[i] = f_new;
    }
    std::fill(col_max.begin(), col_max.end(), kNegInf);
    for (std::size_t i = 0; i < p.n; ++i) {
      p.cost.row(i, row);
      for (std::size_t j = 0; j < p.m; ++j) col_max[j] = std::max(col_max[j], pot.f[i] - row[j]);
    }
    std::fill(col_sum.begin(), col_sum.end(), 0.0);
    for (std::size_t i = 0; i < p.n; ++i) {
      p.cost.row(i, row);
      for (std::size_t j = 0; j < p.m; ++j) {
        col_sum[j] += std::exp((pot.f[i] - row[j] - col_max[j]) / eps);
      }
    }
    for (std::size_t j = 0; j < p.m; ++j) {
      pot.g[j] = eps * std::log(p.b[j]) - col_max[j] - eps * std::log(col_sum[j]);
    }
    if (violation <= target) return sweeps;
  }
}

/// Scaling form with absorption: P = diag(u) K diag(v) with
/// K_ij = exp((f_i + g_j - C_ij) / eps). Each sweep is two dense mat-vecs.
std::size_t run_stabilized(const Problem& p, Potentials& pot, double eps, double target,
                           std::size_t budget, double& violation) {
  const std::size_t n = p.n, m = p.m;
  std::vector<double> kernel(n * m), row(m);
  auto rebuild = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      p.cost.row(i, row);
      double* k = kernel.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) k[j] = std::exp((pot.f[i] + pot.g[j] - row[j]) / eps);
    }
  };
  rebuild();
  std::vector<double> u(n, 1.0), v(m, 1.0), kv(n), ktu(m);
  auto absorb = [&] {
    for (std::size_t i = 0; i < n; ++i) pot.f[i] += eps * std::log(u[i]);
    for (std::size_t j = 0; j < m; ++j) pot.g[j] += eps * std::log(v[j]);
    std::fill(u.begin(), u.end(), 1.0);
    std::fill(v.begin(), v.end(), 1.0);
    rebuild();
  };
  std::size_t sweeps = 0;
  while (true) {
    if (sweeps >= budget) break;
    ++sweeps;
    violation = 0.0;
    bool underflow = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double* k = kernel.data() + i * m;
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += k[j] * v[j];
      if (!(s > 0.0)) underflow = true;
      violation += std::abs(u[i] * s - p.a[i]);
      kv[i] = s;
    }
    if (underflow) {
      // Fall back to exact log-sum-exp sweeps to re-centre the potentials.
      absorb();
      sweeps += run_log_domain(p, pot, eps, 0.0, 1, violation);
      rebuild();
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) u[i] = p.a[i] / kv[i];
    std::fill(ktu.begin(), ktu.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* k = kernel.data() + i * m;
      const double ui = u[i];
      for (std::size_t j = 0; j < m; ++j) ktu[j] += k[j] * ui;
    }
    double big = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!(ktu[j] > 0.0)) {
        underflow = true;
        break;
      }
      v[j] = p.b[j] / ktu[j];
      big = std::max(big, std::abs(std::log(v[j])));
    }
    if (underflow) {
      absorb();
      sweeps += run_log_domain(p, pot, eps, 0.0, 1, violation);
      rebuild();
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) big = std::max(big, std::abs(std::log(u[i])));
    if (violation <= target) break;
    if (big > kAbsorbThreshold) absorb();
  }
  for (std::size_t i = 0; i < n; ++i) pot.f[i] += eps * std::log(u[i]);
  for (std::size_t j = 0; j < m; ++j) pot.g[j] += eps * std::log(v[j]);
  return sweeps;
}

/// Newton's method on the semi-dual in f, with g always set by the exact
/// column update. The Hessian is -1/eps times the Laplacian
///   L = diag(P 1) - P diag(1/b) P^T,
/// an n x n system, so this is cheap when sources are few. Sinkhorn crawls
/// when the plan is close to block diagonal; Newton does not care.
/// Returns steps used, or budget + 1 if the line search stalls.
std::size_t run_newton(const Problem& p, Potentials& pot, double eps, double target,
                       std::size_t budget, double& violation) {
  const std::size_t n = p.n, m = p.m;
  Eigen::MatrixXd plan(n, m);
  std::vector<double> row(m), lse(m);
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    p.cost.row(i, row);
    std::copy(row.begin(), row.end(), cost.begin() + static_cast<std::ptrdiff_t>(i * m));
  }
  // Fills plan and the gradient; returns the semi-dual objective (up to a
  // constant).
  Eigen::VectorXd grad(n);
  auto evaluate = [&](const std::vector<double>& f, double& viol) {
    std::fill(lse.begin(), lse.end(), kNegInf);
    for (std::size_t i = 0; i < n; ++i) {
      const double* c = cost.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) lse[j] = std::max(lse[j], (f[i] - c[j]) / eps);
    }
    std::vector<double> sum(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* c = cost.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) {
        const double e = std::exp((f[i] - c[j]) / eps - lse[j]);
        plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e;
        sum[j] += e;
      }
    }
    CompensatedSum obj;
    for (std::size_t j = 0; j < m; ++j) {
      lse[j] += std::log(sum[j]);
      plan.col(static_cast<Eigen::Index>(j)) *= p.b[j] / sum[j];
      obj.add(-eps * p.b[j] * lse[j]);
    }
    viol = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      obj.add(p.a[i] * f[i]);
      grad[static_cast<Eigen::Index>(i)] = p.a[i] - plan.row(static_cast<Eigen::Index>(i)).sum();
      viol += std::abs(grad[static_cast<Eigen::Index>(i)]);
    }
    return obj.value();
  };

  Eigen::VectorXd inv_b(m);
  for (std::size_t j = 0; j < m; ++j) inv_b[static_cast<Eigen::Index>(j)] = 1.0 / p.b[j];
  std::vector<double> trial(n);
  double obj = evaluate(pot.f, violation);
  std::size_t steps = 0;
  while (violation > target) {
    if (steps >= budget) return steps;
    ++steps;
    const Eigen::VectorXd rows = plan.rowwise().sum();
    Eigen::MatrixXd lap = -(plan * inv_b.asDiagonal() * plan.transpose());
    lap.diagonal() += rows;
    // A small ridge fixes the constant null direction.
    lap.diagonal() += 1e-12 * rows.maxCoeff() * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    const Eigen::VectorXd dir = lap.ldlt().solve(eps * grad);
    const double slope = grad.dot(dir);
    if (!std::isfinite(slope) || slope <= 0.0) return budget + 1;
    const Eigen::VectorXd g0 = grad;
    const double v0 = violation;
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40 && !accepted; ++k, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = pot.f[i] + t * dir[static_cast<Eigen::Index>(i)];
      double v = 0.0;
      const double o = evaluate(trial, v);
      if (o >= obj + 1e-4 * t * slope || v < v0) {
        pot.f = trial;
        obj = o;
        violation = v;
        accepted = true;
      }
    }
    if (!accepted) {
      evaluate(pot.f, violation);
      grad = g0;
      return budget + 1;
    }
  }
  for (std::size_t j = 0; j < m; ++j) pot.g[j] = eps * std::log(p.b[j]) - eps * lse[j];
  return steps;
}

}  // namespace

TransportResult solve_entropic(std::span<const double> a, std::span<const double> b,
                               const CostMatrix& cost, const EntropicOptions& options) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n != cost.rows() || m != cost.cols()) {
    throw InputError("solve_entropic: weight lengths do not match the cost matrix");
  }
  std::vector<double> schedule = options.schedule;
  if (schedule.empty()) schedule = default_epsilon_schedule(cost.max_value(), kDefaultFinalEpsilon);
  for (double e : schedule) {
    if (!(e > 0.0)) throw InputError("solve_entropic: epsilon must be positive");
  }
  CompensatedSum sa, sb;
  for (double w : a) {
    if (!(w > 0.0)) throw InputError("solve_entropic: weights must be positive");
    sa.add(w);
  }
  for (double w : b) {
    if (!(w > 0.0)) throw InputError("solve_entropic: weights must be positive");
    sb.add(w);
  }
  if (std::abs(sa.value() - sb.value()) > 1e-12) {
    throw InputError("solve_entropic: source and sink masses differ");
  }

  const Problem prob{a, b, cost, n, m};
  Potentials pot{std::vector<double>(n, 0.0), std::vector<double>(m, 0.0)};
  // The scaling form keeps a second dense n x m array next to the costs.
  const bool stabilized = cost.stored() && n * m <= CostMatrix::kDefaultBudgetBytes / 8;
  const bool newton = stabilized && n >= 2 && n <= kNewtonMaxSources;
  // Intermediate stages only need a rough fit before annealing further.
  const double stage_tolerance = std::max(options.tolerance, 1e-4);
  std::size_t sweeps = 0;
  double violation = std::numeric_limits<double>::infinity();
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double eps = schedule[stage];
    const double target = stage + 1 == schedule.size() ? options.tolerance : stage_tolerance;
    const std::size_t budget = options.max_iterations - std::min(sweeps, options.max_iterations);
    // Centre the potentials for this epsilon with one exact sweep.
    sweeps += run_log_domain(prob, pot, eps, 0.0, 1, violation);
    if (violation > target && newton) {
      const std::size_t steps = run_newton(prob, pot, eps, target, budget, violation);
      sweeps += std::min(steps, budget);
      if (steps > budget) sweeps += run_log_domain(prob, pot, eps, 0.0, 1, violation);
    }
    if (violation > target) {
      const std::size_t left = options.max_iterations - std::min(sweeps, options.max_iterations);
      sweeps += stabilized ? run_stabilized(prob, pot, eps, target, left, violation)
                           : run_log_domain(prob, pot, eps, target, left, violation);
    }
    if (violation > target) {
      throw ConvergenceError("solve_entropic: iteration cap reached", violation);
    }
  }

  const double eps = schedule.back();
  std::vector<double> row(m);
  // Finish with a column update so the sink marginal is exact.
  {
    std::vector<double> col_max(m, kNegInf), col_sum(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      cost.row(i, row);
      for (std::size_t j = 0; j < m; ++j) col_max[j] = std::max(col_max[j], pot.f[i] - row[j]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      cost.row(i, row);
      for (std::size_t j = 0; j < m; ++j) col_sum[j] += std::exp((pot.f[i] - row[j] - col_max[j]) / eps);
    }
    for (std::size_t j = 0; j < m; ++j) {
      pot.g[j] = eps * std::log(b[j]) - col_max[j] - eps * std::log(col_sum[j]);
    }
  }
  CompensatedSum value;
  std::vector<double> col_mass(m, 0.0);
  double row_violation = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cost.row(i, row);
    double rv = 0.0, rm = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double q = std::exp((pot.f[i] + pot.g[j] - row[j]) / eps);
      rv += q * row[j];
      rm += q;
      col_mass[j] += q;
    }
    value.add(rv);
    row_violation += std::abs(rm - a[i]);
  }
  double col_violation = 0.0;
  for (std::size_t j = 0; j < m; ++j) col_violation += std::abs(col_mass[j] - b[j]);

  TransportResult r;
  r.solver = TransportSolver::Entropic;
  r.value = std::max(0.0, value.value());
  r.marginal_violation = row_violation + col_violation;
  r.iterations = sweeps;
  r.epsilon = eps;
  // c-transform of f gives a dual-feasible pair, hence a lower bound on the
  // unregularized value.
  std::vector<double> v(m, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    cost.row(i, row);
    for (std::size_t j = 0; j < m; ++j) v[j] = std::min(v[j], row[j] - pot.f[i]);
  }
  CompensatedSum dual;
  for (std::size_t i = 0; i < n; ++i) dual.add(a[i] * pot.f[i]);
  for (std::size_t j = 0; j < m; ++j) dual.add(b[j] * v[j]);
  r.dual_value = dual.value();
  r.duality_gap = r.value - r.dual_value;
  return r;
}

}  // namespace gwlab
