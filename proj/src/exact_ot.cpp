#include "otprop/exact_ot.hpp"

#include "otprop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace otprop {

namespace {

// Spanning-tree basis of the transportation problem. Nodes 0..I-1 are
// sources, I..I+J-1 sinks; the root is sink 0. Every non-root node stores the
// flow on the arc to its parent (arcs always run source -> sink).
class NetworkSimplex {
 public:
  NetworkSimplex(const RowMatrix& cost, const Vector& supply, const Vector& demand, const ExactConfig& cfg)
      : cost_(cost),
        sources_(cost.rows()),
        sinks_(cost.cols()),
        nodes_(sources_ + sinks_),
        root_(sources_),
        parent_(static_cast<std::size_t>(nodes_), -1),
        flow_(static_cast<std::size_t>(nodes_), 0.0),
        depth_(static_cast<std::size_t>(nodes_), 0),
        potential_(static_cast<std::size_t>(nodes_), 0.0),
        stamp_(static_cast<std::size_t>(nodes_), 0) {
    const double scale = 1.0 + std::max(std::abs(cost.maxCoeff()), std::abs(cost.minCoeff()));
    optimality_eps_ = 1e-12 * scale;
    max_pivots_ = cfg.max_pivots > 0
                      ? cfg.max_pivots
                      : 100L * nodes_ * static_cast<long>(std::ceil(std::log2(static_cast<double>(nodes_) + 1.0))) +
                            10000L;
    const long arcs = static_cast<long>(sources_) * sinks_;
    block_ = arcs <= 10000 ? arcs : std::max<long>(static_cast<long>(std::sqrt(static_cast<double>(arcs))), 1000);

    Vector s = supply.array() + cfg.perturbation;
    Vector d = demand;
    d[sinks_ - 1] += cfg.perturbation * static_cast<double>(sources_);
    initial_basis(s, d);
    refresh_tree();
  }

  long run() {
    long pivots = 0;
    while (true) {
      const auto entering = price();
      if (entering < 0) break;
      if (++pivots > max_pivots_) {
        throw NumericError("solve_exact: pivot cap of " + std::to_string(max_pivots_) + " reached");
      }
      pivot(entering);
    }
    return pivots;
  }

  // Recomputes tree flows for the unperturbed marginals and returns the plan.
  TransportPlan extract(const Vector& supply, const Vector& demand, long pivots) const {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(nodes_));
    for (Eigen::Index v = 0; v < nodes_; ++v) order[static_cast<std::size_t>(v)] = v;
    std::sort(order.begin(), order.end(), [this](Eigen::Index x, Eigen::Index y) {
      return depth_[static_cast<std::size_t>(x)] > depth_[static_cast<std::size_t>(y)];
    });
    std::vector<double> excess(static_cast<std::size_t>(nodes_));
    for (Eigen::Index i = 0; i < sources_; ++i) excess[static_cast<std::size_t>(i)] = supply[i];
    for (Eigen::Index j = 0; j < sinks_; ++j) excess[static_cast<std::size_t>(sources_ + j)] = -demand[j];

    TransportPlan out;
    out.plan = RowMatrix::Zero(sources_, sinks_);
    const double tiny = 1e-9;
    for (const auto v : order) {
      if (v == root_) continue;
      const auto p = parent_[static_cast<std::size_t>(v)];
      double f;
      if (is_source(v)) {
        f = excess[static_cast<std::size_t>(v)];
        excess[static_cast<std::size_t>(p)] += f;
      } else {
        f = -excess[static_cast<std::size_t>(v)];
        excess[static_cast<std::size_t>(p)] -= f;
      }
      if (f < -tiny) throw NumericError("solve_exact: infeasible basis after removing the perturbation");
      f = std::max(f, 0.0);
      const auto [i, j] = arc_of(v);
      out.plan(i, j) = f;
    }
    out.cost = 0.0;
    for (Eigen::Index v = 0; v < nodes_; ++v) {
      if (v == root_) continue;
      const auto [i, j] = arc_of(v);
      out.cost += out.plan(i, j) * cost_(i, j);
    }
    out.dual_phi.resize(sources_);
    out.dual_psi.resize(sinks_);
    for (Eigen::Index i = 0; i < sources_; ++i) out.dual_phi[i] = potential_[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < sinks_; ++j) out.dual_psi[j] = potential_[static_cast<std::size_t>(sources_ + j)];
    out.pivots = pivots;
    return out;
  }

 private:
  bool is_source(Eigen::Index v) const { return v < sources_; }

  // (source, sink) of the arc joining v to its parent.
  std::pair<Eigen::Index, Eigen::Index> arc_of(Eigen::Index v) const {
    const auto p = parent_[static_cast<std::size_t>(v)];
    return is_source(v) ? std::pair{v, p - sources_} : std::pair{p, v - sources_};
  }

  // Least-cost-per-row start: each allocation exhausts exactly one row or
  // one column, so the I + J - 1 allocated arcs form a spanning tree.
  void initial_basis(const Vector& supply, Vector demand) {
    std::vector<std::vector<std::pair<Eigen::Index, double>>> adjacency(static_cast<std::size_t>(nodes_));
    auto link = [&](Eigen::Index i, Eigen::Index j, double f) {
      adjacency[static_cast<std::size_t>(i)].push_back({sources_ + j, f});
      adjacency[static_cast<std::size_t>(sources_ + j)].push_back({i, f});
    };
    std::vector<char> alive(static_cast<std::size_t>(sinks_), 1);
    Eigen::Index cols_left = sinks_;
    for (Eigen::Index i = 0; i < sources_; ++i) {
      double remaining = supply[i];
      const bool last_row = i == sources_ - 1;
      while (true) {
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < sinks_; ++j) {
          if (alive[static_cast<std::size_t>(j)] && (best < 0 || cost_(i, j) < cost_(i, best))) best = j;
        }
        if (cols_left == 1) {
          link(i, best, remaining);
          demand[best] -= remaining;
          break;
        }
        if (!last_row && remaining <= demand[best]) {
          link(i, best, remaining);
          demand[best] -= remaining;
          break;
        }
        const double f = demand[best];
        link(i, best, f);
        remaining -= f;
        alive[static_cast<std::size_t>(best)] = 0;
        --cols_left;
      }
    }
    // Orient the tree from the root.
    std::vector<Eigen::Index> queue{root_};
    std::vector<char> seen(static_cast<std::size_t>(nodes_), 0);
    seen[static_cast<std::size_t>(root_)] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const auto v = queue[q];
      for (const auto& [w, f] : adjacency[static_cast<std::size_t>(v)]) {
        if (seen[static_cast<std::size_t>(w)]) continue;
        seen[static_cast<std::size_t>(w)] = 1;
        parent_[static_cast<std::size_t>(w)] = v;
        flow_[static_cast<std::size_t>(w)] = f;
        queue.push_back(w);
      }
    }
    if (static_cast<Eigen::Index>(queue.size()) != nodes_) {
      throw NumericError("solve_exact: initial basis is not a spanning tree");
    }
  }

  // Depth and potentials (u_i + v_j = c_ij on tree arcs, root potential 0).
  void refresh_tree() {
    ++generation_;
    std::size_t* stamp = stamp_.data();
    stamp[static_cast<std::size_t>(root_)] = generation_;
    depth_[static_cast<std::size_t>(root_)] = 0;
    potential_[static_cast<std::size_t>(root_)] = 0.0;
    std::vector<Eigen::Index> path;
    for (Eigen::Index v = 0; v < nodes_; ++v) {
      Eigen::Index w = v;
      path.clear();
      while (stamp[static_cast<std::size_t>(w)] != generation_) {
        path.push_back(w);
        w = parent_[static_cast<std::size_t>(w)];
      }
      for (auto it = path.rbegin(); it != path.rend(); ++it) {
        const auto x = *it;
        const auto p = parent_[static_cast<std::size_t>(x)];
        const auto [i, j] = arc_of(x);
        potential_[static_cast<std::size_t>(x)] = cost_(i, j) - potential_[static_cast<std::size_t>(p)];
        depth_[static_cast<std::size_t>(x)] = depth_[static_cast<std::size_t>(p)] + 1;
        stamp[static_cast<std::size_t>(x)] = generation_;
      }
    }
  }

  // Block search: scan blocks of arcs from where the last scan stopped and
  // take the most negative reduced cost of the first block that has one.
  // Small problems use one block, i.e. full Dantzig pricing.
  long price() {
    const long arcs = static_cast<long>(sources_) * sinks_;
    long best_arc = -1;
    double best = -optimality_eps_;
    long scanned_in_block = 0;
    for (long n = 0; n < arcs; ++n) {
      const long e = cursor_;
      cursor_ = (cursor_ + 1 == arcs) ? 0 : cursor_ + 1;
      const auto i = static_cast<Eigen::Index>(e / sinks_);
      const auto j = static_cast<Eigen::Index>(e % sinks_);
      const double r = cost_(i, j) - potential_[static_cast<std::size_t>(i)] -
                       potential_[static_cast<std::size_t>(sources_ + j)];
      if (r < best) {
        best = r;
        best_arc = e;
      }
      if (++scanned_in_block == block_) {
        if (best_arc >= 0) return best_arc;
        scanned_in_block = 0;
      }
    }
    return best_arc;
  }

  void pivot(long entering) {
    const auto i = static_cast<Eigen::Index>(entering / sinks_);
    const auto j = static_cast<Eigen::Index>(entering % sinks_);
    const Eigen::Index s = i, t = sources_ + j;

    // Tree paths from both endpoints up to their common ancestor, as lists
    // of child nodes (each identifies the arc to its parent).
    side_s_.clear();
    side_t_.clear();
    Eigen::Index x = s, y = t;
    while (depth_[static_cast<std::size_t>(x)] > depth_[static_cast<std::size_t>(y)]) {
      side_s_.push_back(x);
      x = parent_[static_cast<std::size_t>(x)];
    }
    while (depth_[static_cast<std::size_t>(y)] > depth_[static_cast<std::size_t>(x)]) {
      side_t_.push_back(y);
      y = parent_[static_cast<std::size_t>(y)];
    }
    while (x != y) {
      side_s_.push_back(x);
      x = parent_[static_cast<std::size_t>(x)];
      side_t_.push_back(y);
      y = parent_[static_cast<std::size_t>(y)];
    }

    // Pushing delta along s -> t decreases the arcs at even positions of
    // each side (counted from the endpoint) and increases the odd ones.
    // Among ties, take the last blocking arc in cycle order starting from the apex.
    double delta = std::numeric_limits<double>::infinity();
    Eigen::Index leaving = -1;
    bool leaving_on_s = false;
    for (std::size_t k = side_s_.size(); k-- > 0;) {
      if (k % 2 != 0) continue;
      const double f = flow_[static_cast<std::size_t>(side_s_[k])];
      if (f <= delta) {
        delta = f;
        leaving = side_s_[k];
        leaving_on_s = true;
      }
    }
    for (std::size_t k = 0; k < side_t_.size(); k += 2) {
      const double f = flow_[static_cast<std::size_t>(side_t_[k])];
      if (f <= delta) {
        delta = f;
        leaving = side_t_[k];
        leaving_on_s = false;
      }
    }
    delta = std::max(delta, 0.0);

    for (std::size_t k = 0; k < side_s_.size(); ++k) {
      flow_[static_cast<std::size_t>(side_s_[k])] += (k % 2 == 0) ? -delta : delta;
    }
    for (std::size_t k = 0; k < side_t_.size(); ++k) {
      flow_[static_cast<std::size_t>(side_t_[k])] += (k % 2 == 0) ? -delta : delta;
    }

    // Cut the leaving arc and re-hang its subtree through the entering arc:
    // reverse parent pointers on the path from the entering endpoint up to
    // the old subtree root.
    Eigen::Index node = leaving_on_s ? s : t;
    Eigen::Index new_parent = leaving_on_s ? t : s;
    double carried = delta;
    while (true) {
      const auto old_parent = parent_[static_cast<std::size_t>(node)];
      const double old_flow = flow_[static_cast<std::size_t>(node)];
      parent_[static_cast<std::size_t>(node)] = new_parent;
      flow_[static_cast<std::size_t>(node)] = carried;
      if (node == leaving) break;
      new_parent = node;
      node = old_parent;
      carried = old_flow;
    }
    refresh_tree();
  }

  const RowMatrix& cost_;
  Eigen::Index sources_, sinks_, nodes_, root_;
  std::vector<Eigen::Index> parent_;
  std::vector<double> flow_;
  std::vector<int> depth_;
  std::vector<double> potential_;
  std::vector<std::size_t> stamp_;
  std::size_t generation_ = 0;
  std::vector<Eigen::Index> side_s_, side_t_;
  double optimality_eps_ = 0.0;
  long max_pivots_ = 0;
  long block_ = 1;
  long cursor_ = 0;
};

}  // namespace

TransportPlan solve_exact(const RowMatrix& cost, const Vector& a, const Vector& b, const ExactConfig& cfg) {
  if (cost.rows() != a.size() || cost.cols() != b.size() || a.size() == 0 || b.size() == 0) {
    throw InputError("solve_exact: cost / weight size mismatch");
  }
  if (!cost.allFinite()) throw InputError("solve_exact: non-finite cost");
  if ((a.array() < 0.0).any() || (b.array() < 0.0).any()) throw InputError("solve_exact: negative weight");
  if (std::abs(a.sum() - b.sum()) > 1e-9) throw InputError("solve_exact: unbalanced marginals");
  NetworkSimplex solver(cost, a, b, cfg);
  const long pivots = solver.run();
  return solver.extract(a, b, pivots);
}

TransportPlan solve_exact(const DiscreteMeasure& a, const DiscreteMeasure& b, const ExactConfig& cfg) {
  return solve_exact(cost_matrix(a, b).entries(), a.weights(), b.weights(), cfg);
}

double w0(const DiscreteMeasure& a, const DiscreteMeasure& b) { return solve_exact(a, b).cost; }

}  // namespace otprop
