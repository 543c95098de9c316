#pragma once

#include <cstdint>
#include <vector>

#include "snot/discrete_ot.hpp"
#include "snot/linalg.hpp"
#include "snot/measures.hpp"
#include "snot/nn.hpp"

namespace snot {

// |mu-weighted mean of the first `block` coordinates of the images| (Euclidean norm of the mean).
double tangential_error(const Matrix& images, const Vector& weights, Index block);
double tangential_error(const MlpParams& t, const EmpiricalMeasure& source, Index block);

// Squared W_2 between the pushforward of the trailing `block` coordinates and
// `atoms` midpoint quantiles of Unif([low, high]). One-dimensional normal blocks only.
double normal_error(const Matrix& images, const Vector& weights, double low, double high,
                    Index atoms = 2048);
double normal_error(const MlpParams& t, const EmpiricalMeasure& smoothed_source,
                    const DatasetSpec& target, Index atoms = 2048);

// Squared W_2 with cost |x-y|^2 via the exact solver.
double w2_squared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                  const SolverOptions& options = {});

// |W_2^2(mu, nu) - mean |T(x) - x|^2|, given the images T(x_i).
double d_cost(const Matrix& images, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
              const SolverOptions& options = {});
double d_cost(const MlpParams& t, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
              const SolverOptions& options = {});
// W_2^2(T#mu, nu).
double d_target(const Matrix& images, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                const SolverOptions& options = {});
double d_target(const MlpParams& t, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                const SolverOptions& options = {});

// Largest singular value by power iteration on A^T A.
double spectral_norm(const Matrix& a, int max_iters = 50, double tol = 1e-8);
double sup_jacobian_norm(const MlpParams& t, const Matrix& probes);

struct RatePoint {
  double n = 0.0;
  double value = 0.0;
  Index replicates = 1;
  double std_err = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;  // log C
  double r_squared = 0.0;
  Index n_points = 0;
};

// OLS of ln(value) on ln(N).
RateFit fit_rate(const std::vector<RatePoint>& points);

enum class PotentialFamily { LinearPotential, QuadraticPotential };

struct HessianReport {
  Vector grad_formula, grad_fd, grad_closed;
  Matrix hess_formula, hess_fd, hess_closed;
  double max_discrepancy = 0.0;
};

// Reduced semi-dual J(theta) = int V_theta^c dmu + int V_theta dnu for cost |x-y|^2 / 2.
double reduced_semidual(PotentialFamily family, const Vector& theta, const EmpiricalMeasure& mu,
                        const EmpiricalMeasure& nu);
// Gradient and Hessian of J three ways: the implicit-function formulas, central finite
// differences of J (step fd_step), and closed form.
HessianReport hessian_check(PotentialFamily family, const Vector& theta, const EmpiricalMeasure& mu,
                            const EmpiricalMeasure& nu, double fd_step = 1e-4);

struct PlanStability {
  double w2_plans = 0.0;
  double w1_sources = 0.0;
  double w2_sources = 0.0;
  double alpha_p = 0.0;
};

// alpha(p) = p / (6p + 16d).
double stability_exponent(double p, double d);
PlanStability plan_stability_ratio(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2,
                                   const EmpiricalMeasure& nu, double p,
                                   const SolverOptions& options = {});

}  // namespace snot
