#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "snot/linalg.hpp"
#include "snot/measures.hpp"

namespace snot {

enum class CostKind { SqEuclideanHalf, Euclidean };

// tau/2 |x-y|^2 or tau |x-y|.
struct Cost {
  CostKind kind = CostKind::SqEuclideanHalf;
  double tau = 1.0;

  template <class A, class B>
  double operator()(const A& x, const B& y) const {
    const double s = (x - y).squaredNorm();
    return kind == CostKind::SqEuclideanHalf ? 0.5 * tau * s : tau * std::sqrt(s);
  }

  void validate() const;
};

// Row-major N x M matrix of c(x_i, y_j).
Matrix cost_matrix(const Matrix& x, const Matrix& y, const Cost& cost);

struct PlanEntry {
  Index source = 0;
  Index target = 0;
  double mass = 0.0;
};

struct TransportPlan {
  std::vector<PlanEntry> entries;
  Index source_n = 0;
  Index target_n = 0;
  double cost_value = 0.0;

  Vector row_sums() const;
  Vector col_sums() const;
};

struct SolverOptions {
  // Largest N*M accepted by solve_exact.
  std::size_t max_entries = 4'000'000;
};

struct DualSolution {
  TransportPlan plan;
  // u_i + v_j <= c(x_i, y_j) with equality on the plan's support.
  Vector u;
  Vector v;
};

TransportPlan solve_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Cost& cost,
                          const SolverOptions& options = {});
DualSolution solve_exact_with_duals(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                    const Cost& cost, const SolverOptions& options = {});

// Monotone coupling of two measures on the line.
TransportPlan solve_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Cost& cost);

// Enumerates all N! matchings; N = M <= 8 with uniform weights.
TransportPlan brute_force(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Cost& cost);

// W_1 under |x-y|, W_2 as the square root of the optimum under |x-y|^2.
double wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int order,
                   const SolverOptions& options = {});

// The coupling as a measure on R^{d_mu + d_nu}: atoms (x_i, y_j) with the plan's masses.
EmpiricalMeasure plan_as_measure(const TransportPlan& plan, const EmpiricalMeasure& mu,
                                 const EmpiricalMeasure& nu);

// W_2 between two couplings viewed as measures on the product space.
double plan_distance(const TransportPlan& plan_a, const EmpiricalMeasure& mu_a,
                     const EmpiricalMeasure& nu_a, const TransportPlan& plan_b,
                     const EmpiricalMeasure& mu_b, const EmpiricalMeasure& nu_b,
                     const SolverOptions& options = {});

// Barycentric image of each source atom: sum_j pi_ij y_j / mu_i.
Matrix barycentric_map(const TransportPlan& plan, const EmpiricalMeasure& mu,
                       const EmpiricalMeasure& nu);

void write_plan_csv(std::ostream& os, const TransportPlan& plan);
void write_plan_csv(const std::filesystem::path& path, const TransportPlan& plan);

}  // namespace snot
