#pragma once

#include "snot/linalg.hpp"

namespace snot {

// Standard normal CDF and density.
double phi_cdf(double x);
double phi_pdf(double x);
// Inverse of phi_cdf on (0, 1).
double phi_quantile(double p);

// Monge map N(0, eps^2) -> Unif(-1, 1): 2 Phi(x/eps) - 1, and its derivative.
double map_gauss_to_uniform(double x, double eps);
double map_gauss_to_uniform_derivative(double x, double eps);

// Monge map N(0, eps^2) -> Unif(0, 1): Phi(x/eps).
double map_gauss_to_unit_interval(double x, double eps);

// Pointwise limit of Phi(x/eps) as eps -> 0: 0, 1/2 or 1.
double map_degenerate_limit(double x);

// Monge map from the smoothed point mass N(0, eps^2 I) to N(0, I): x / eps.
Vector map_delta_to_gaussian(const Vector& x, double eps);
Matrix map_delta_to_gaussian_jacobian(Index dim, double eps);

// Midpoint quantile atoms F^{-1}((k + 1/2) / n), k = 0..n-1, as an n x 1 matrix.
Matrix gaussian_quantile_atoms(Index n, double sigma);
Matrix uniform_quantile_atoms(Index n, double low, double high);

}  // namespace snot
