#include "snot/discrete_ot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "snot/csv.hpp"
#include "snot/error.hpp"
#include "snot/network_simplex.hpp"

namespace snot {
namespace {

void check_pair(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  mu.validate();
  nu.validate();
  if (mu.dim() != nu.dim()) throw ShapeError("ot: measures live in different dimensions");
}

double plan_cost(const TransportPlan& plan, const Matrix& x, const Matrix& y, const Cost& cost) {
  double total = 0.0;
  for (const auto& e : plan.entries) total += e.mass * cost(x.row(e.source), y.row(e.target));
  return total;
}

// Indices with strictly positive weight; the simplex needs positive supplies and demands.
std::vector<Index> positive_support(const Vector& w) {
  std::vector<Index> idx;
  for (Index i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) idx.push_back(i);
  }
  return idx;
}

}  // namespace

void Cost::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("cost: tau must be positive");
}

Matrix cost_matrix(const Matrix& x, const Matrix& y, const Cost& cost) {
  if (x.cols() != y.cols()) throw ShapeError("cost_matrix: dimension mismatch");
  Matrix c(x.rows(), y.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < y.rows(); ++j) c(i, j) = cost(x.row(i), y.row(j));
  }
  return c;
}

Vector TransportPlan::row_sums() const {
  Vector r = Vector::Zero(source_n);
  for (const auto& e : entries) r[e.source] += e.mass;
  return r;
}

Vector TransportPlan::col_sums() const {
  Vector c = Vector::Zero(target_n);
  for (const auto& e : entries) c[e.target] += e.mass;
  return c;
}

DualSolution solve_exact_with_duals(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                    const Cost& cost, const SolverOptions& options) {
  check_pair(mu, nu);
  cost.validate();
  const std::size_t entries = static_cast<std::size_t>(mu.size()) * static_cast<std::size_t>(nu.size());
  if (entries > options.max_entries) {
    throw CapacityError("solve_exact: " + std::to_string(mu.size()) + " x " +
                        std::to_string(nu.size()) + " exceeds the cap of " +
                        std::to_string(options.max_entries) + " entries");
  }
  const std::vector<Index> rows = positive_support(mu.weights);
  const std::vector<Index> cols = positive_support(nu.weights);
  const Index n = static_cast<Index>(rows.size());
  const Index m = static_cast<Index>(cols.size());

  Matrix c(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) c(i, j) = cost(mu.points.row(rows[i]), nu.points.row(cols[j]));
  }
  Vector a(n), b(m);
  for (Index i = 0; i < n; ++i) a[i] = mu.weights[rows[i]];
  for (Index j = 0; j < m; ++j) b[j] = nu.weights[cols[j]];

  const SimplexResult r = network_simplex(c.data(), n, m, a, b);

  DualSolution out;
  out.plan.source_n = mu.size();
  out.plan.target_n = nu.size();
  out.plan.entries.reserve(r.mass.size());
  for (std::size_t k = 0; k < r.mass.size(); ++k) {
    out.plan.entries.push_back({rows[r.source[k]], cols[r.target[k]], r.mass[k]});
    out.plan.cost_value += r.mass[k] * c(r.source[k], r.target[k]);
  }

  // Zero-weight atoms get the tightest potentials compatible with dual feasibility.
  out.u = Vector::Zero(mu.size());
  out.v = Vector::Zero(nu.size());
  std::vector<char> has_u(mu.size(), 0), has_v(nu.size(), 0);
  for (Index i = 0; i < n; ++i) {
    out.u[rows[i]] = r.u[i];
    has_u[rows[i]] = 1;
  }
  for (Index j = 0; j < m; ++j) {
    out.v[cols[j]] = r.v[j];
    has_v[cols[j]] = 1;
  }
  for (Index j = 0; j < nu.size(); ++j) {
    if (has_v[j]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (Index i : rows) best = std::min(best, cost(mu.points.row(i), nu.points.row(j)) - out.u[i]);
    out.v[j] = best;
  }
  for (Index i = 0; i < mu.size(); ++i) {
    if (has_u[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < nu.size(); ++j) {
      best = std::min(best, cost(mu.points.row(i), nu.points.row(j)) - out.v[j]);
    }
    out.u[i] = best;
  }
  return out;
}

TransportPlan solve_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Cost& cost,
                          const SolverOptions& options) {
  return solve_exact_with_duals(mu, nu, cost, options).plan;
}

TransportPlan solve_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Cost& cost) {
  check_pair(mu, nu);
  cost.validate();
  if (mu.dim() != 1) throw ShapeError("solve_1d: measures must be one-dimensional");

  auto order = [](const EmpiricalMeasure& m) {
    std::vector<Index> idx(static_cast<std::size_t>(m.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index p, Index q) { return m.points(p, 0) < m.points(q, 0); });
    return idx;
  };
  const std::vector<Index> ix = order(mu);
  const std::vector<Index> iy = order(nu);

  TransportPlan plan;
  plan.source_n = mu.size();
  plan.target_n = nu.size();
  // Quantile coupling: walk the merged breakpoints of both cumulative distributions.
  // The final breakpoint of each side is pinned to 1 so rounding never strands mass.
  const std::size_t nx = ix.size(), ny = iy.size();
  auto cum = [](double c, double w, bool last) { return last ? 1.0 : c + w; };
  std::size_t p = 0, q = 0;
  double ca = cum(0.0, mu.weights[ix[0]], nx == 1);
  double cb = cum(0.0, nu.weights[iy[0]], ny == 1);
  double prev = 0.0;
  while (p < nx && q < ny) {
    const double next = std::min(ca, cb);
    if (next > prev) {
      plan.entries.push_back({ix[p], iy[q], next - prev});
      prev = next;
    }
    const bool adv_p = ca <= cb;
    const bool adv_q = cb <= ca;
    if (adv_p && ++p < nx) ca = cum(ca, mu.weights[ix[p]], p + 1 == nx);
    if (adv_q && ++q < ny) cb = cum(cb, nu.weights[iy[q]], q + 1 == ny);
  }
  plan.cost_value = plan_cost(plan, mu.points, nu.points, cost);
  return plan;
}

TransportPlan brute_force(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Cost& cost) {
  check_pair(mu, nu);
  cost.validate();
  const Index n = mu.size();
  if (nu.size() != n) throw ShapeError("brute_force: needs equal atom counts");
  if (n > 8) throw CapacityError("brute_force: at most 8 atoms per side");
  const Matrix c = cost_matrix(mu.points, nu.points, cost);

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::vector<Index> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += c(i, perm[i]);
    if (s < best_cost) {
      best_cost = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  TransportPlan plan;
  plan.source_n = n;
  plan.target_n = n;
  const double w = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) plan.entries.push_back({i, best[i], w});
  plan.cost_value = best_cost * w;
  return plan;
}

double wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int order,
                   const SolverOptions& options) {
  if (order == 1) return solve_exact(mu, nu, {CostKind::Euclidean, 1.0}, options).cost_value;
  if (order == 2) {
    const double v = solve_exact(mu, nu, {CostKind::SqEuclideanHalf, 2.0}, options).cost_value;
    return std::sqrt(std::max(0.0, v));
  }
  throw DomainError("wasserstein: order must be 1 or 2");
}

EmpiricalMeasure plan_as_measure(const TransportPlan& plan, const EmpiricalMeasure& mu,
                                 const EmpiricalMeasure& nu) {
  if (plan.source_n != mu.size() || plan.target_n != nu.size()) {
    throw ShapeError("plan_as_measure: plan does not match its marginals");
  }
  if (plan.entries.empty()) throw ShapeError("plan_as_measure: empty plan");
  const Index k = static_cast<Index>(plan.entries.size());
  EmpiricalMeasure out;
  out.points.resize(k, mu.dim() + nu.dim());
  out.weights.resize(k);
  for (Index r = 0; r < k; ++r) {
    const auto& e = plan.entries[static_cast<std::size_t>(r)];
    out.points.row(r) << mu.points.row(e.source), nu.points.row(e.target);
    out.weights[r] = e.mass;
  }
  // Absorb floating-point drift so the product measure validates.
  out.weights /= out.weights.sum();
  return out;
}

double plan_distance(const TransportPlan& plan_a, const EmpiricalMeasure& mu_a,
                     const EmpiricalMeasure& nu_a, const TransportPlan& plan_b,
                     const EmpiricalMeasure& mu_b, const EmpiricalMeasure& nu_b,
                     const SolverOptions& options) {
  return wasserstein(plan_as_measure(plan_a, mu_a, nu_a), plan_as_measure(plan_b, mu_b, nu_b), 2,
                     options);
}

Matrix barycentric_map(const TransportPlan& plan, const EmpiricalMeasure& mu,
                       const EmpiricalMeasure& nu) {
  Matrix out = Matrix::Zero(mu.size(), nu.dim());
  Vector mass = Vector::Zero(mu.size());
  for (const auto& e : plan.entries) {
    out.row(e.source) += e.mass * nu.points.row(e.target);
    mass[e.source] += e.mass;
  }
  for (Index i = 0; i < mu.size(); ++i) {
    if (mass[i] > 0.0) out.row(i) /= mass[i];
  }
  return out;
}

void write_plan_csv(std::ostream& os, const TransportPlan& plan) {
  CsvTable t;
  t.header = {"i", "j", "mass"};
  for (const auto& e : plan.entries) {
    t.rows.push_back({static_cast<double>(e.source), static_cast<double>(e.target), e.mass});
  }
  write_csv(os, t);
}

void write_plan_csv(const std::filesystem::path& path, const TransportPlan& plan) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_plan_csv(os, plan);
}

}  // namespace snot
