#include "snot/analytic.hpp"

#include <cmath>
#include <numbers>

#include "snot/error.hpp"

namespace snot {

// erfc keeps full relative accuracy in the lower tail where 1 + erf would cancel.
double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double phi_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("phi_quantile: p must lie in (0, 1)");
  // Bisection to a tight bracket, then Newton steps polish to full precision.
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (phi_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double d = phi_pdf(x);
    if (d <= 0.0) break;
    x -= (phi_cdf(x) - p) / d;
  }
  return x;
}

double map_gauss_to_uniform(double x, double eps) {
  if (!(eps > 0.0)) throw DomainError("map_gauss_to_uniform: eps must be positive");
  return 2.0 * phi_cdf(x / eps) - 1.0;
}

double map_gauss_to_uniform_derivative(double x, double eps) {
  if (!(eps > 0.0)) throw DomainError("map_gauss_to_uniform: eps must be positive");
  return 2.0 * phi_pdf(x / eps) / eps;
}

double map_gauss_to_unit_interval(double x, double eps) {
  if (!(eps > 0.0)) throw DomainError("map_gauss_to_unit_interval: eps must be positive");
  return phi_cdf(x / eps);
}

double map_degenerate_limit(double x) {
  if (x < 0.0) return 0.0;
  if (x > 0.0) return 1.0;
  return 0.5;
}

Vector map_delta_to_gaussian(const Vector& x, double eps) {
  if (!(eps > 0.0)) throw DomainError("map_delta_to_gaussian: eps must be positive");
  return x / eps;
}

Matrix map_delta_to_gaussian_jacobian(Index dim, double eps) {
  if (!(eps > 0.0)) throw DomainError("map_delta_to_gaussian: eps must be positive");
  return Matrix::Identity(dim, dim) / eps;
}

Matrix gaussian_quantile_atoms(Index n, double sigma) {
  Matrix a(n, 1);
  for (Index k = 0; k < n; ++k) {
    a(k, 0) = sigma * phi_quantile((static_cast<double>(k) + 0.5) / static_cast<double>(n));
  }
  return a;
}

Matrix uniform_quantile_atoms(Index n, double low, double high) {
  Matrix a(n, 1);
  for (Index k = 0; k < n; ++k) {
    a(k, 0) = low + (high - low) * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
  }
  return a;
}

}  // namespace snot
