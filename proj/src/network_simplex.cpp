// SPDX-License-Identifier: Apache-2.0
//
// Primal network simplex for the transportation problem on a complete
// bipartite graph. The spanning-tree bookkeeping (thread / rev_thread /
// succ_num / last_succ) follows the classic strongly feasible tree scheme
// with block search pricing. Arcs are implicit: arc e < n*m joins source
// e / m to sink e % m; arc n*m + u is the artificial arc of node u.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gwlab/error.hpp"
#include "gwlab/stats.hpp"
#include "gwlab/transport.hpp"

namespace gwlab {
namespace {

constexpr int kDirUp = 1;
constexpr int kDirDown = -1;
constexpr signed char kStateTree = 0;
constexpr signed char kStateLower = 1;

class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand,
                 const CostMatrix& cost)
      : n_(static_cast<int>(supply.size())),
        m_(static_cast<int>(demand.size())),
        cost_(cost),
        node_num_(n_ + m_),
        root_(node_num_),
        arc_num_(static_cast<std::int64_t>(n_) * m_) {
    const double max_cost = cost.max_value();
    art_cost_ = (max_cost + 1.0) * node_num_;
    // Reduced costs above -eps count as optimal; potentials are O(art_cost).
    eps_ = 64.0 * std::numeric_limits<double>::epsilon() * art_cost_;

    const int nodes = node_num_ + 1;
    parent_.assign(nodes, -1);
    pred_.assign(nodes, -1);
    pred_dir_.assign(nodes, 0);
    thread_.assign(nodes, 0);
    rev_thread_.assign(nodes, 0);
    succ_num_.assign(nodes, 0);
    last_succ_.assign(nodes, 0);
    pi_.assign(nodes, 0.0);
    state_.assign(static_cast<std::size_t>(arc_num_), kStateLower);
    flow_.assign(static_cast<std::size_t>(arc_num_), 0.0);
    art_flow_.assign(node_num_, 0.0);

    parent_[root_] = -1;
    pred_[root_] = -1;
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    succ_num_[root_] = node_num_ + 1;
    last_succ_[root_] = root_ - 1;
    pi_[root_] = 0.0;
    for (int u = 0; u < node_num_; ++u) {
      parent_[u] = root_;
      pred_[u] = arc_num_ + u;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      if (u < n_) {
        pred_dir_[u] = kDirUp;
        pi_[u] = 0.0;
        art_flow_[u] = supply[u];
      } else {
        pred_dir_[u] = kDirDown;
        pi_[u] = art_cost_;
        art_flow_[u] = demand[u - n_];
      }
    }
    block_size_ = std::max<std::int64_t>(
        10, static_cast<std::int64_t>(std::sqrt(static_cast<double>(arc_num_))));
  }

  std::size_t run() {
    std::size_t pivots = 0;
    while (find_entering_arc()) {
      find_join_node();
      const bool change = find_leaving_arc();
      if (!(delta_ < std::numeric_limits<double>::infinity())) {
        throw ConvergenceError("network simplex: unbounded cycle", 0.0);
      }
      change_flow(change);
      if (change) {
        update_tree_structure();
        update_potential();
      }
      ++pivots;
    }
    // Flows are sums of up to node_num_ masses, so allow rounding that grows
    // with the node count.
    const double tol =
        1e-12 + 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(node_num_);
    for (int u = 0; u < node_num_; ++u) {
      if (art_flow_[u] > tol) throw InputError("network simplex: infeasible marginals");
    }
    recompute_potentials();
    return pivots;
  }

  double flow(std::int64_t e) const { return flow_[static_cast<std::size_t>(e)]; }
  double potential(int u) const { return pi_[u]; }

 private:
  int source(std::int64_t e) const {
    if (e < arc_num_) return static_cast<int>(e / m_);
    const int u = static_cast<int>(e - arc_num_);
    return u < n_ ? u : root_;
  }
  int target(std::int64_t e) const {
    if (e < arc_num_) return n_ + static_cast<int>(e % m_);
    const int u = static_cast<int>(e - arc_num_);
    return u < n_ ? root_ : u;
  }
  double arc_cost(std::int64_t e) const {
    if (e < arc_num_) return cost_(static_cast<std::size_t>(e / m_), static_cast<std::size_t>(e % m_));
    return e - arc_num_ < n_ ? 0.0 : art_cost_;
  }
  double& flow_ref(std::int64_t e) {
    if (e < arc_num_) return flow_[static_cast<std::size_t>(e)];
    return art_flow_[static_cast<std::size_t>(e - arc_num_)];
  }

  bool find_entering_arc() {
    double min = -eps_;
    std::int64_t cnt = block_size_;
    std::int64_t e;
    bool found = false;
    // Sweep rows in order, resuming where the last search stopped.
    for (e = next_arc_; e != arc_num_; ++e) {
      if (state_[static_cast<std::size_t>(e)] != kStateTree) {
        const int i = static_cast<int>(e / m_);
        const int j = static_cast<int>(e % m_);
        const double c = cost_(i, j) + pi_[i] - pi_[n_ + j];
        if (c < min) {
          min = c;
          in_arc_ = e;
          found = true;
        }
      }
      if (--cnt == 0) {
        if (found) goto search_end;
        cnt = block_size_;
      }
    }
    for (e = 0; e != next_arc_; ++e) {
      if (state_[static_cast<std::size_t>(e)] != kStateTree) {
        const int i = static_cast<int>(e / m_);
        const int j = static_cast<int>(e % m_);
        const double c = cost_(i, j) + pi_[i] - pi_[n_ + j];
        if (c < min) {
          min = c;
          in_arc_ = e;
          found = true;
        }
      }
      if (--cnt == 0) {
        if (found) goto search_end;
        cnt = block_size_;
      }
    }
    if (!found) return false;
  search_end:
    next_arc_ = e;
    return true;
  }

  void find_join_node() {
    int u = source(in_arc_);
    int v = target(in_arc_);
    while (u != v) {
      if (succ_num_[u] < succ_num_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    join_ = u;
  }

  // Entering arcs are always at their lower bound (capacities are infinite),
  // so the cycle is oriented along the entering arc.
  bool find_leaving_arc() {
    first_ = source(in_arc_);
    second_ = target(in_arc_);
    delta_ = std::numeric_limits<double>::infinity();
    int result = 0;
    for (int u = first_; u != join_; u = parent_[u]) {
      if (pred_dir_[u] == kDirDown) continue;
      const double d = flow_ref(pred_[u]);
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (int u = second_; u != join_; u = parent_[u]) {
      if (pred_dir_[u] == kDirUp) continue;
      const double d = flow_ref(pred_[u]);
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first_;
      v_in_ = second_;
    } else {
      u_in_ = second_;
      v_in_ = first_;
    }
    return result != 0;
  }

  void change_flow(bool change) {
    if (delta_ > 0.0) {
      const double val = delta_;
      flow_ref(in_arc_) += val;
      for (int u = source(in_arc_); u != join_; u = parent_[u]) {
        double& f = flow_ref(pred_[u]);
        f -= pred_dir_[u] * val;
        if (std::abs(f) < 1e-18) f = 0.0;
      }
      for (int u = target(in_arc_); u != join_; u = parent_[u]) {
        double& f = flow_ref(pred_[u]);
        f += pred_dir_[u] * val;
        if (std::abs(f) < 1e-18) f = 0.0;
      }
    }
    if (change) {
      state_[static_cast<std::size_t>(in_arc_)] = kStateTree;
      const std::int64_t out = pred_[u_out_];
      flow_ref(out) = 0.0;
      if (out < arc_num_) state_[static_cast<std::size_t>(out)] = kStateLower;
    }
  }

  void update_tree_structure() {
    const int old_rev_thread = rev_thread_[u_out_];
    const int old_succ_num = succ_num_[u_out_];
    const int old_last_succ = last_succ_[u_out_];
    v_out_ = parent_[u_out_];

    if (u_in_ == u_out_) {
      parent_[u_in_] = v_in_;
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source(in_arc_) ? kDirUp : kDirDown;
      if (thread_[v_in_] != u_out_) {
        int after = thread_[old_last_succ];
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
        after = thread_[v_in_];
        thread_[v_in_] = u_out_;
        rev_thread_[u_out_] = v_in_;
        thread_[old_last_succ] = after;
        rev_thread_[after] = old_last_succ;
      }
    } else {
      const int thread_continue =
          old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

      // Re-hang the stem nodes between u_in and u_out.
      int stem = u_in_;
      int par_stem = v_in_;
      int last = last_succ_[u_in_];
      int after = thread_[last];
      thread_[v_in_] = u_in_;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in_);
      while (stem != u_out_) {
        const int next_stem = parent_[stem];
        thread_[last] = next_stem;
        dirty_revs_.push_back(last);

        const int before = rev_thread_[stem];
        thread_[before] = after;
        rev_thread_[after] = before;

        parent_[stem] = par_stem;
        par_stem = stem;
        stem = next_stem;

        last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem]
                                                        : last_succ_[stem];
        after = thread_[last];
      }
      parent_[u_out_] = par_stem;
      thread_[last] = thread_continue;
      rev_thread_[thread_continue] = last;
      last_succ_[u_out_] = last;

      if (old_rev_thread != v_in_) {
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
      }
      for (int u : dirty_revs_) rev_thread_[thread_[u]] = u;

      int tmp_sc = 0;
      const int tmp_ls = last_succ_[u_out_];
      for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
        pred_[u] = pred_[p];
        pred_dir_[u] = -pred_dir_[p];
        tmp_sc += succ_num_[u] - succ_num_[p];
        succ_num_[u] = tmp_sc;
        last_succ_[p] = tmp_ls;
      }
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source(in_arc_) ? kDirUp : kDirDown;
      succ_num_[u_in_] = old_succ_num;
    }

    const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
    const int last_succ_out = last_succ_[u_out_];
    for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) {
      last_succ_[u] = last_succ_out;
    }
    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ;
           u = parent_[u]) {
        last_succ_[u] = old_rev_thread;
      }
    } else if (last_succ_out != old_last_succ) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ;
           u = parent_[u]) {
        last_succ_[u] = last_succ_out;
      }
    }
    for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
    for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
  }

  void update_potential() {
    const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * arc_cost(in_arc_);
    const int end = thread_[last_succ_[u_in_]];
    for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
  }

  // Rebuild potentials from the final tree to shed accumulated rounding.
  void recompute_potentials() {
    pi_[root_] = 0.0;
    for (int u = thread_[root_]; u != root_; u = thread_[u]) {
      // Tree arcs have zero reduced cost c + pi[src] - pi[tgt].
      const double c = arc_cost(pred_[u]);
      pi_[u] = pred_dir_[u] == kDirUp ? pi_[parent_[u]] - c : pi_[parent_[u]] + c;
    }
  }

  int n_;
  int m_;
  const CostMatrix& cost_;
  int node_num_;
  int root_;
  std::int64_t arc_num_;
  double art_cost_ = 0.0;
  double eps_ = 0.0;
  std::int64_t block_size_ = 10;
  std::int64_t next_arc_ = 0;

  std::vector<int> parent_;
  std::vector<std::int64_t> pred_;
  std::vector<int> pred_dir_;
  std::vector<int> thread_;
  std::vector<int> rev_thread_;
  std::vector<int> succ_num_;
  std::vector<int> last_succ_;
  std::vector<double> pi_;
  std::vector<signed char> state_;
  std::vector<double> flow_;
  std::vector<double> art_flow_;
  std::vector<int> dirty_revs_;

  std::int64_t in_arc_ = 0;
  int join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0, first_ = 0, second_ = 0;
  double delta_ = 0.0;
};

struct Compacted {
  std::vector<double> weights;
  std::vector<std::size_t> index;  // position in the original input
};

Compacted drop_zero_mass(std::span<const double> w, const char* side) {
  Compacted c;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) {
      throw InputError(std::string("solve_exact: invalid ") + side + " weight");
    }
    if (w[i] > 0.0) {
      c.weights.push_back(w[i]);
      c.index.push_back(i);
    }
  }
  return c;
}

}  // namespace

TransportResult solve_exact(std::span<const double> source_weights,
                            std::span<const double> sink_weights, const CostMatrix& cost) {
  if (source_weights.size() != cost.rows() || sink_weights.size() != cost.cols()) {
    throw InputError("solve_exact: weight lengths do not match the cost matrix");
  }
  const Compacted src = drop_zero_mass(source_weights, "source");
  const Compacted dst = drop_zero_mass(sink_weights, "sink");
  if (src.weights.empty() || dst.weights.empty()) {
    throw InputError("solve_exact: no point with positive mass");
  }
  CompensatedSum sa, sb;
  for (double w : src.weights) sa.add(w);
  for (double w : dst.weights) sb.add(w);
  if (std::abs(sa.value() - sb.value()) > 1e-12) {
    throw InputError("solve_exact: source and sink masses differ");
  }

  TransportResult res;
  res.solver = TransportSolver::ExactFlow;
  res.dropped_points = (source_weights.size() - src.weights.size()) +
                       (sink_weights.size() - dst.weights.size());
  if (res.dropped_points > 0) {
    res.warnings.push_back("dropped " + std::to_string(res.dropped_points) + " zero-mass point(s)");
  }

  // Rescale sinks so both sides carry the same floating-point total.
  std::vector<double> demand = dst.weights;
  const double scale = sa.value() / sb.value();
  for (double& d : demand) d *= scale;

  const bool compact = res.dropped_points > 0;
  std::vector<double> sub_values;
  const CostMatrix* c = &cost;
  CostMatrix sub(0, 0, {});
  if (compact) {
    sub_values.resize(src.weights.size() * dst.weights.size());
    for (std::size_t i = 0; i < src.index.size(); ++i) {
      for (std::size_t j = 0; j < dst.index.size(); ++j) {
        sub_values[i * dst.index.size() + j] = cost(src.index[i], dst.index[j]);
      }
    }
    sub = CostMatrix(src.weights.size(), dst.weights.size(), std::move(sub_values));
    c = &sub;
  }

  NetworkSimplex ns(src.weights, demand, *c);
  res.iterations = ns.run();

  const std::size_t n = src.weights.size();
  const std::size_t m = demand.size();
  CompensatedSum primal;
  std::vector<CompensatedSum> col_mass(m);
  double violation = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    CompensatedSum row_mass;
    for (std::size_t j = 0; j < m; ++j) {
      const double f = ns.flow(static_cast<std::int64_t>(i * m + j));
      if (f == 0.0) continue;
      primal.add(f * (*c)(i, j));
      row_mass.add(f);
      col_mass[j].add(f);
    }
    violation += std::abs(row_mass.value() - src.weights[i]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    violation += std::abs(col_mass[j].value() - dst.weights[j]);
  }

  // Dual certificate: u_i = -pi_i, then c-transform twice so that
  // u_i + v_j <= c_ij holds exactly as computed.
  std::vector<double> u(n), v(m, std::numeric_limits<double>::infinity());
  const double shift = ns.potential(0);
  for (std::size_t i = 0; i < n; ++i) u[i] = -(ns.potential(static_cast<int>(i)) - shift);
  std::vector<double> row(m);
  for (std::size_t i = 0; i < n; ++i) {
    c->row(i, row);
    for (std::size_t j = 0; j < m; ++j) v[j] = std::min(v[j], row[j] - u[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    c->row(i, row);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) best = std::min(best, row[j] - v[j]);
    u[i] = best;
  }
  CompensatedSum dual;
  for (std::size_t i = 0; i < n; ++i) dual.add(src.weights[i] * u[i]);
  for (std::size_t j = 0; j < m; ++j) dual.add(dst.weights[j] * v[j]);

  res.value = std::max(0.0, primal.value());
  res.dual_value = dual.value();
  res.duality_gap = res.value - res.dual_value;
  res.marginal_violation = violation;
  return res;
}

TransportResult solve_exact(const SurfaceModel& s, const WeightedPointSet& sources,
                            const WeightedPointSet& sinks) {
  sources.validate();
  sinks.validate();
  const CostMatrix cost(s, sources.points, sinks.points);
  return solve_exact(sources.weights, sinks.weights, cost);
}

}  // namespace gwlab
