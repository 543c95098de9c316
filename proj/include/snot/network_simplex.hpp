#pragma once

#include <cstddef>
#include <vector>

#include "snot/linalg.hpp"

namespace snot {

// Result of the uncapacitated transportation problem
//   min sum_ij C_ij f_ij  s.t.  sum_j f_ij = a_i, sum_i f_ij = b_j, f >= 0.
struct SimplexResult {
  std::vector<Index> source;
  std::vector<Index> target;
  std::vector<double> mass;
  // Dual potentials with u_i + v_j <= C_ij, equality on every arc carrying flow.
  Vector u;
  Vector v;
  std::size_t pivots = 0;
};

// Primal network simplex on the bipartite graph with an artificial root.
// cost is row-major n x m; a and b are strictly positive and have equal sums.
SimplexResult network_simplex(const double* cost, Index n, Index m, const Vector& a,
                              const Vector& b);

}  // namespace snot
