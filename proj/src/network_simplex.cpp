#include "snot/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "snot/error.hpp"

namespace snot {
namespace {

constexpr Index kNone = -1;

// Spanning-tree state. Every non-root node stores the tree arc to its parent,
// the flow on that arc and whether the arc points towards the parent.
// Arc ids: real arc (i, j) is i * m + j; the artificial arc of node v is A + v.
class Solver {
 public:
  Solver(const double* cost, Index n, Index m, const Vector& a, const Vector& b)
      : c_(cost), n_(n), m_(m), nodes_(n + m + 1), root_(n + m), arcs_(n * m) {
    double maxc = 0.0;
    for (Index k = 0; k < arcs_; ++k) maxc = std::max(maxc, std::abs(c_[k]));
    art_cost_ = (maxc + 1.0) * static_cast<double>(nodes_);
    tol_ = 1e-14 * art_cost_;

    parent_.assign(nodes_, root_);
    pred_.resize(nodes_);
    up_.assign(nodes_, 0);
    flow_.assign(nodes_, 0.0);
    depth_.assign(nodes_, 1);
    pi_.assign(nodes_, 0.0);
    first_child_.assign(nodes_, kNone);
    next_sib_.assign(nodes_, kNone);
    prev_sib_.assign(nodes_, kNone);

    parent_[root_] = kNone;
    depth_[root_] = 0;
    for (Index v = 0; v < root_; ++v) {
      pred_[v] = arcs_ + v;
      if (v < n_) {
        up_[v] = 1;  // v -> root, cost 0
        flow_[v] = a[v];
        pi_[v] = 0.0;
      } else {
        up_[v] = 0;  // root -> v, cost ART
        flow_[v] = b[v - n_];
        pi_[v] = art_cost_;
      }
      link(v, root_);
    }
    block_ = std::max<Index>(10, static_cast<Index>(std::sqrt(static_cast<double>(arcs_))));
  }

  std::size_t run() {
    std::size_t pivots = 0;
    for (;;) {
      while (find_entering()) {
        pivot();
        ++pivots;
      }
      // Potentials drift through incremental updates; recompute them and make sure
      // no arc became attractive again before declaring optimality.
      refresh_potentials();
      if (!find_entering()) break;
      pivot();
      ++pivots;
    }
    return pivots;
  }

  SimplexResult result() const {
    SimplexResult r;
    for (Index v = 0; v < root_; ++v) {
      const Index arc = pred_[v];
      if (arc >= arcs_ || !(flow_[v] > 0.0)) continue;
      r.source.push_back(arc / m_);
      r.target.push_back(arc % m_);
      r.mass.push_back(flow_[v]);
    }
    const double shift = pi_[n_];
    r.u.resize(n_);
    r.v.resize(m_);
    for (Index i = 0; i < n_; ++i) r.u[i] = shift - pi_[i];
    for (Index j = 0; j < m_; ++j) r.v[j] = pi_[n_ + j] - shift;
    return r;
  }

 private:
  double arc_cost(Index arc) const {
    if (arc < arcs_) return c_[arc];
    return arc - arcs_ < n_ ? 0.0 : art_cost_;
  }

  bool in_tree(Index arc) const {
    const Index i = arc / m_;
    const Index j = n_ + arc % m_;
    return pred_[i] == arc || pred_[j] == arc;
  }

  // Block search pricing over the real arcs, resuming where the last search stopped.
  bool find_entering() {
    double best = -tol_;
    Index best_arc = kNone;
    Index seen = 0;
    Index k = next_arc_;
    while (seen < arcs_) {
      const Index stop = std::min(seen + block_, arcs_);
      for (; seen < stop; ++seen) {
        const Index i = k / m_;
        const Index j = k - i * m_;
        const double rc = c_[k] + pi_[i] - pi_[n_ + j];
        if (rc < best && !in_tree(k)) {
          best = rc;
          best_arc = k;
        }
        if (++k == arcs_) k = 0;
      }
      if (best_arc != kNone) {
        entering_ = best_arc;
        next_arc_ = k;
        return true;
      }
    }
    return false;
  }

  Index find_join(Index u, Index v) const {
    while (u != v) {
      if (depth_[u] > depth_[v]) {
        u = parent_[u];
      } else if (depth_[v] > depth_[u]) {
        v = parent_[v];
      } else {
        u = parent_[u];
        v = parent_[v];
      }
    }
    return u;
  }

  void pivot() {
    const Index first = entering_ / m_;         // tail of the entering arc
    const Index second = n_ + entering_ % m_;   // head of the entering arc
    const Index join = find_join(first, second);

    // Strongly feasible leaving arc selection.
    constexpr double inf = std::numeric_limits<double>::infinity();
    double delta = inf;
    Index u_out = kNone;
    int side = 0;
    for (Index u = first; u != join; u = parent_[u]) {
      const double d = up_[u] ? flow_[u] : inf;
      if (d < delta) {
        delta = d;
        u_out = u;
        side = 1;
      }
    }
    for (Index u = second; u != join; u = parent_[u]) {
      const double d = up_[u] ? inf : flow_[u];
      if (d <= delta) {
        delta = d;
        u_out = u;
        side = 2;
      }
    }
    if (side == 0) throw Error("network simplex: unbounded cycle");

    if (delta > 0.0) {
      for (Index u = first; u != join; u = parent_[u]) flow_[u] += up_[u] ? -delta : delta;
      for (Index u = second; u != join; u = parent_[u]) flow_[u] += up_[u] ? delta : -delta;
    }

    const Index u_in = side == 1 ? first : second;
    const Index v_in = side == 1 ? second : first;

    // Reverse the path u_in .. u_out and hang it below v_in.
    path_.clear();
    for (Index u = u_in;; u = parent_[u]) {
      path_.push_back(u);
      if (u == u_out) break;
    }
    for (Index u : path_) unlink(u);
    Index carry_pred = entering_;
    char carry_up = side == 1 ? 1 : 0;
    double carry_flow = delta;
    Index new_parent = v_in;
    for (Index u : path_) {
      const Index old_pred = pred_[u];
      const char old_up = up_[u];
      const double old_flow = flow_[u];
      pred_[u] = carry_pred;
      up_[u] = carry_up;
      flow_[u] = carry_flow;
      link(u, new_parent);
      carry_pred = old_pred;
      carry_up = !old_up;
      carry_flow = old_flow;
      new_parent = u;
    }
    update_subtree(u_in);
  }

  void unlink(Index v) {
    const Index p = parent_[v];
    if (prev_sib_[v] != kNone) {
      next_sib_[prev_sib_[v]] = next_sib_[v];
    } else {
      first_child_[p] = next_sib_[v];
    }
    if (next_sib_[v] != kNone) prev_sib_[next_sib_[v]] = prev_sib_[v];
    next_sib_[v] = prev_sib_[v] = kNone;
  }

  void link(Index v, Index p) {
    parent_[v] = p;
    prev_sib_[v] = kNone;
    next_sib_[v] = first_child_[p];
    if (first_child_[p] != kNone) prev_sib_[first_child_[p]] = v;
    first_child_[p] = v;
  }

  void set_from_parent(Index v) {
    const Index p = parent_[v];
    depth_[v] = depth_[p] + 1;
    const double w = arc_cost(pred_[v]);
    pi_[v] = up_[v] ? pi_[p] - w : pi_[p] + w;
  }

  void update_subtree(Index top) {
    stack_.clear();
    stack_.push_back(top);
    while (!stack_.empty()) {
      const Index v = stack_.back();
      stack_.pop_back();
      set_from_parent(v);
      for (Index c = first_child_[v]; c != kNone; c = next_sib_[c]) stack_.push_back(c);
    }
  }

  void refresh_potentials() {
    pi_[root_] = 0.0;
    for (Index c = first_child_[root_]; c != kNone; c = next_sib_[c]) update_subtree(c);
  }

  const double* c_;
  Index n_, m_, nodes_, root_, arcs_;
  double art_cost_ = 0.0;
  double tol_ = 0.0;
  Index block_ = 10;
  Index next_arc_ = 0;
  Index entering_ = kNone;

  std::vector<Index> parent_, pred_;
  std::vector<char> up_;
  std::vector<double> flow_;
  std::vector<Index> depth_;
  std::vector<double> pi_;
  std::vector<Index> first_child_, next_sib_, prev_sib_;
  std::vector<Index> path_, stack_;
};

}  // namespace

SimplexResult network_simplex(const double* cost, Index n, Index m, const Vector& a,
                              const Vector& b) {
  if (n < 1 || m < 1) throw ShapeError("network simplex: empty problem");
  if (a.size() != n || b.size() != m) throw ShapeError("network simplex: weight size mismatch");
  Solver solver(cost, n, m, a, b);
  const std::size_t pivots = solver.run();
  SimplexResult r = solver.result();
  r.pivots = pivots;
  return r;
}

}  // namespace snot
