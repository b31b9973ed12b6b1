// SPDX-License-Identifier: Apache-2.0
//
// Semi-discrete transport from the uniform measure on the flat torus to a
// weighted point set. Cells are Laguerre (power) cells of the periodic
// lattice of sites; the dual is maximized by damped Newton.
#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "gwlab/error.hpp"
#include "gwlab/stats.hpp"
#include "gwlab/transport.hpp"

namespace gwlab {
namespace {

struct Vertex {
  double x;
  double y;
  int label;     // site generating the edge to the next vertex, -1 for self
  double dnorm;  // |d| of that site image
};

using Polygon = std::vector<Vertex>;

/// Clip to {z : z . d <= h}. The new edge along the cut is labelled `label`.
void clip(Polygon& poly, Polygon& scratch, double dx, double dy, double h, int label,
          double dnorm) {
  scratch.clear();
  const std::size_t k = poly.size();
  for (std::size_t i = 0; i < k; ++i) {
    const Vertex& a = poly[i];
    const Vertex& b = poly[(i + 1) % k];
    const double sa = a.x * dx + a.y * dy - h;
    const double sb = b.x * dx + b.y * dy - h;
    if (sa <= 0.0) {
      scratch.push_back(a);
      if (sb > 0.0) {
        const double t = sa / (sa - sb);
        scratch.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), label, dnorm});
      }
    } else if (sb <= 0.0) {
      const double t = sa / (sa - sb);
      scratch.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.label, a.dnorm});
    }
  }
  poly.swap(scratch);
}

double max_radius(const Polygon& poly) {
  double r2 = 0.0;
  for (const Vertex& v : poly) r2 = std::max(r2, v.x * v.x + v.y * v.y);
  return std::sqrt(r2);
}

struct Triplet {
  int i;
  int j;
  double coef;  // facet length / (2 |d|)
};

class LaguerreTorus {
 public:
  LaguerreTorus(std::vector<double> xs, std::vector<double> ys)
      : xs_(std::move(xs)), ys_(std::move(ys)), n_(static_cast<int>(xs_.size())) {
    buckets_ = std::max(1, static_cast<int>(std::floor(std::sqrt(n_ / 2.0))));
    const int nb = buckets_ * buckets_;
    start_.assign(nb + 1, 0);
    cell_of_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      const int bx = std::min(buckets_ - 1, static_cast<int>(xs_[i] * buckets_));
      const int by = std::min(buckets_ - 1, static_cast<int>(ys_[i] * buckets_));
      cell_of_[i] = bx * buckets_ + by;
      ++start_[cell_of_[i] + 1];
    }
    for (int b = 0; b < nb; ++b) start_[b + 1] += start_[b];
    members_.resize(n_);
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (int i = 0; i < n_; ++i) members_[fill[cell_of_[i]]++] = i;
  }

  struct Evaluation {
    std::vector<double> area;
    std::vector<double> moment;  // integral of |x - site|^2 over the cell
    std::vector<Triplet> facets;
  };

  Evaluation evaluate(const std::vector<double>& psi, bool want_facets) const {
    Evaluation ev;
    ev.area.resize(n_);
    ev.moment.resize(n_);
    const double psi_max = *std::max_element(psi.begin(), psi.end());
    Polygon poly, scratch;
    for (int i = 0; i < n_; ++i) {
      cell(i, psi, psi_max, poly, scratch);
      double area = 0.0, mom = 0.0;
      const std::size_t k = poly.size();
      for (std::size_t v = 0; v < k; ++v) {
        const Vertex& a = poly[v];
        const Vertex& b = poly[(v + 1) % k];
        const double cr = a.x * b.y - b.x * a.y;
        area += cr;
        mom += cr * (a.x * a.x + a.x * b.x + b.x * b.x + a.y * a.y + a.y * b.y + b.y * b.y);
        if (want_facets && a.label >= 0) {
          const double len = std::hypot(b.x - a.x, b.y - a.y);
          if (len > 0.0) ev.facets.push_back({i, a.label, len / (2.0 * a.dnorm)});
        }
      }
      ev.area[i] = 0.5 * area;
      ev.moment[i] = mom / 12.0;
    }
    return ev;
  }

 private:
  void cell(int i, const std::vector<double>& psi, double psi_max, Polygon& poly,
            Polygon& scratch) const {
    // The unit square around the site encodes its own periodic images.
    poly.assign({{-0.5, -0.5, -1, 1.0}, {0.5, -0.5, -1, 1.0}, {0.5, 0.5, -1, 1.0},
                 {-0.5, 0.5, -1, 1.0}});
    double rmax = max_radius(poly);
    const double w = psi_max - psi[i];
    const int bx = cell_of_[i] / buckets_;
    const int by = cell_of_[i] % buckets_;
    const double xi = xs_[i], yi = ys_[i];
    for (int r = 0;; ++r) {
      for (int ox = -r; ox <= r; ++ox) {
        const bool edge_col = ox == -r || ox == r;
        for (int oy = -r; oy <= r; oy += edge_col ? 1 : 2 * r) {
          const int cx = bx + ox, cy = by + oy;
          const int kx = floor_div(cx, buckets_), ky = floor_div(cy, buckets_);
          const int b = (cx - kx * buckets_) * buckets_ + (cy - ky * buckets_);
          for (int t = start_[b]; t < start_[b + 1]; ++t) {
            const int j = members_[t];
            if (j == i) continue;
            const double dx = xs_[j] + kx - xi;
            const double dy = ys_[j] + ky - yi;
            const double d2 = dx * dx + dy * dy;
            const double dn = std::sqrt(d2);
            const double h = 0.5 * (d2 + psi[i] - psi[j]);
            if (h / dn >= rmax) continue;
            clip(poly, scratch, dx, dy, h, j, dn);
            if (poly.empty()) return;
            rmax = max_radius(poly);
          }
          if (r == 0) break;
        }
      }
      // Sites outside rings 0..r are at distance >= r / B.
      const double dmin = static_cast<double>(r) / buckets_;
      if (dmin > 0.0 && (dmin * dmin - w) / (2.0 * dmin) >= rmax) return;
    }
  }

  static int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

  std::vector<double> xs_, ys_;
  int n_;
  int buckets_ = 1;
  std::vector<int> start_;
  std::vector<int> members_;
  std::vector<int> cell_of_;
};

double max_relative_error(const std::vector<double>& area, const std::vector<double>& mass) {
  double e = 0.0;
  for (std::size_t i = 0; i < area.size(); ++i) e = std::max(e, std::abs(area[i] - mass[i]) / mass[i]);
  return e;
}

double max_abs_error(const std::vector<double>& area, const std::vector<double>& mass) {
  double e = 0.0;
  for (std::size_t i = 0; i < area.size(); ++i) e = std::max(e, std::abs(area[i] - mass[i]));
  return e;
}

}  // namespace

TransportResult solve_semidiscrete_torus(const WeightedPointSet& sites,
                                         const SemiDiscreteOptions& options) {
  sites.validate();
  const SurfaceModel torus = SurfaceModel::torus();
  // Merge coincident sites and drop zero masses.
  std::vector<std::tuple<double, double, double>> pts;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    validate_point(torus, sites.points[i]);
    if (sites.weights[i] == 0.0) {
      ++dropped;
      continue;
    }
    pts.emplace_back(sites.points[i].x, sites.points[i].y, sites.weights[i]);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> xs, ys, mass;
  for (const auto& [x, y, w] : pts) {
    if (!xs.empty() && xs.back() == x && ys.back() == y) {
      mass.back() += w;
    } else {
      xs.push_back(x);
      ys.push_back(y);
      mass.push_back(w);
    }
  }
  CompensatedSum total;
  for (double w : mass) total.add(w);
  for (double& w : mass) w /= total.value();

  const int n = static_cast<int>(xs.size());
  const LaguerreTorus lag(xs, ys);
  std::vector<double> psi(n, 0.0);
  auto ev = lag.evaluate(psi, true);

  TransportResult res;
  res.solver = TransportSolver::SemiDiscrete;
  res.dropped_points = dropped;
  if (dropped > 0) res.warnings.push_back("dropped " + std::to_string(dropped) + " zero-mass point(s)");
  if (sites.size() - dropped > static_cast<std::size_t>(n)) {
    res.warnings.push_back("merged coincident sites");
  }

  double min_mass = *std::min_element(mass.begin(), mass.end());
  double min_area0 = *std::min_element(ev.area.begin(), ev.area.end());
  const double floor_area = 0.5 * std::min(min_mass, min_area0);

  std::size_t it = 0;
  while (n > 1 && max_relative_error(ev.area, mass) > options.tolerance) {
    if (it >= options.max_iterations) {
      throw ConvergenceError("solve_semidiscrete_torus: Newton iteration cap reached",
                             max_abs_error(ev.area, mass));
    }
    ++it;
    // Jacobian of the areas w.r.t. psi is a graph Laplacian; pin psi_0.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * ev.facets.size());
    for (const Triplet& f : ev.facets) {
      const double c = 0.5 * f.coef;
      if (f.i > 0) trip.emplace_back(f.i - 1, f.i - 1, c);
      if (f.j > 0) trip.emplace_back(f.j - 1, f.j - 1, c);
      if (f.i > 0 && f.j > 0) {
        trip.emplace_back(f.i - 1, f.j - 1, -c);
        trip.emplace_back(f.j - 1, f.i - 1, -c);
      }
    }
    Eigen::SparseMatrix<double> jac(n - 1, n - 1);
    jac.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd rhs(n - 1);
    for (int i = 1; i < n; ++i) rhs[i - 1] = mass[i] - ev.area[i];
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(jac);
    if (solver.info() != Eigen::Success) {
      throw ConvergenceError("solve_semidiscrete_torus: singular Newton system",
                             max_abs_error(ev.area, mass));
    }
    const Eigen::VectorXd step = solver.solve(rhs);

    const double err0 = max_abs_error(ev.area, mass);
    double t = 1.0;
    while (true) {
      std::vector<double> trial(psi);
      for (int i = 1; i < n; ++i) trial[i] += t * step[i - 1];
      auto ev_t = lag.evaluate(trial, true);
      const double min_area = *std::min_element(ev_t.area.begin(), ev_t.area.end());
      if (min_area >= floor_area && max_abs_error(ev_t.area, mass) <= (1.0 - 0.5 * t) * err0) {
        psi.swap(trial);
        ev = std::move(ev_t);
        break;
      }
      t *= 0.5;
      if (t < 1e-12) {
        throw ConvergenceError("solve_semidiscrete_torus: line search failed", err0);
      }
    }
  }

  CompensatedSum primal, dual;
  double violation = 0.0;
  for (int i = 0; i < n; ++i) {
    primal.add(ev.moment[i]);
    dual.add(mass[i] * psi[i]);
    dual.add(ev.moment[i] - psi[i] * ev.area[i]);
    violation += std::abs(ev.area[i] - mass[i]);
  }
  res.value = primal.value();
  res.dual_value = dual.value();
  res.duality_gap = res.value - res.dual_value;
  res.marginal_violation = violation;
  res.iterations = it;
  return res;
}

}  // namespace gwlab
