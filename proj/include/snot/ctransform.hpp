#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "snot/discrete_ot.hpp"
#include "snot/linalg.hpp"
#include "snot/measures.hpp"

namespace snot {

// A dual potential V known on a finite candidate set.
struct GridPotential {
  Matrix support;  // M x d
  Vector values;   // V(y_j)
  Cost cost;

  void validate() const;
  // Support point nearest the origin (smallest index on ties).
  Index anchor() const;
  // Shifts values so that V(anchor) = 0.
  void normalize();
};

struct CTransformResult {
  Vector values;              // V^c(x_i)
  std::vector<Index> argmin;  // smallest minimising support index
};

// V^c(x) = min_j c(x, y_j) - V(y_j).
CTransformResult c_transform(const GridPotential& potential, const Matrix& x_points);

// V^cc(y) = min_i c(x_i, y) - V^c(x_i) with the infimum over the supplied x grid.
Vector cc_transform(const GridPotential& potential, const Matrix& x_grid, const Matrix& y_eval);

// The potential V^cc restricted to its own support, as a new GridPotential.
GridPotential cc_potential(const GridPotential& potential, const Matrix& x_grid);

// sum_i mu_i V^c(x_i) + sum_j nu_j V(y_j).
double semidual_value(const GridPotential& potential, const EmpiricalMeasure& mu,
                      const Vector& nu_weights);

// Index of the support point nearest to each row of points (Euclidean, smallest index on ties).
std::vector<Index> nearest_support(const Matrix& support, const Matrix& points);

// mu-weighted mean of c(x_i, y) - V(y) - V^c(x_i) where y is the support point nearest T(x_i).
double recovery_residual(const GridPotential& potential, const Matrix& t_values,
                         const Matrix& x_points, const Vector& mu_weights);

void write_potential_csv(std::ostream& os, const GridPotential& potential);
void write_potential_csv(const std::filesystem::path& path, const GridPotential& potential);

}  // namespace snot
