#include "snot/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "snot/analytic.hpp"
#include "snot/error.hpp"

namespace snot {
namespace {

const Cost kSqEuclidean{CostKind::SqEuclideanHalf, 2.0};

EmpiricalMeasure with_points(const EmpiricalMeasure& base, Matrix points) {
  EmpiricalMeasure out;
  out.points = std::move(points);
  out.weights = base.weights;
  return out;
}

}  // namespace

double tangential_error(const Matrix& images, const Vector& weights, Index block) {
  if (images.rows() != weights.size()) throw ShapeError("tangential_error: weight count mismatch");
  if (block < 1 || block > images.cols()) throw ShapeError("tangential_error: bad block size");
  const RowVector mean = weights.transpose() * images.leftCols(block);
  return mean.norm();
}

double tangential_error(const MlpParams& t, const EmpiricalMeasure& source, Index block) {
  return tangential_error(forward(t, source.points), source.weights, block);
}

double normal_error(const Matrix& images, const Vector& weights, double low, double high, Index atoms) {
  if (images.rows() != weights.size()) throw ShapeError("normal_error: weight count mismatch");
  EmpiricalMeasure push;
  push.points = images.rightCols(1);
  push.weights = weights;
  const EmpiricalMeasure ref = EmpiricalMeasure::uniform(uniform_quantile_atoms(atoms, low, high));
  return solve_1d(push, ref, kSqEuclidean).cost_value;
}

double normal_error(const MlpParams& t, const EmpiricalMeasure& smoothed_source, const DatasetSpec& target,
                    Index atoms) {
  if (target.manifold_dim != 1) {
    throw ShapeError("normal_error: only one-dimensional normal blocks are supported");
  }
  return normal_error(forward(t, smoothed_source.points), smoothed_source.weights, target.params.low,
                      target.params.high, atoms);
}

double w2_squared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const SolverOptions& options) {
  return solve_exact(mu, nu, kSqEuclidean, options).cost_value;
}

double d_cost(const Matrix& images, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
              const SolverOptions& options) {
  if (images.rows() != mu.size() || images.cols() != mu.dim()) throw ShapeError("d_cost: image shape mismatch");
  const double moved = mu.weights.dot((images - mu.points).rowwise().squaredNorm());
  return std::abs(w2_squared(mu, nu, options) - moved);
}

double d_cost(const MlpParams& t, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
              const SolverOptions& options) {
  return d_cost(forward(t, mu.points), mu, nu, options);
}

double d_target(const Matrix& images, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                const SolverOptions& options) {
  if (images.rows() != mu.size()) throw ShapeError("d_target: image count mismatch");
  return w2_squared(with_points(mu, images), nu, options);
}

double d_target(const MlpParams& t, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                const SolverOptions& options) {
  return d_target(forward(t, mu.points), mu, nu, options);
}

double spectral_norm(const Matrix& a, int max_iters, double tol) {
  if (a.size() == 0) return 0.0;
  const Matrix ata = a.transpose() * a;
  Vector v = Vector::Ones(a.cols()) / std::sqrt(static_cast<double>(a.cols()));
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = ata * v;
    const double norm = w.norm();
    if (norm == 0.0) {
      // The start vector may lie in the null space; retry once along the largest column.
      if (it == 0 && ata.diagonal().maxCoeff() > 0.0) {
        Index k = 0;
        ata.diagonal().maxCoeff(&k);
        v = Vector::Unit(a.cols(), k);
        continue;
      }
      return 0.0;
    }
    const double next = v.dot(w);
    v = w / norm;
    if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(0.0, lambda));
}

double sup_jacobian_norm(const MlpParams& t, const Matrix& probes) {
  if (probes.rows() < 1) throw ShapeError("sup_jacobian_norm: empty probe set");
  double best = 0.0;
  for (Index i = 0; i < probes.rows(); ++i) {
    best = std::max(best, spectral_norm(jacobian_map(t, probes.row(i).transpose())));
  }
  return best;
}

RateFit fit_rate(const std::vector<RatePoint>& points) {
  if (points.size() < 3) throw DomainError("fit_rate: need at least three points");
  const Index k = static_cast<Index>(points.size());
  Vector lx(k), ly(k);
  for (Index i = 0; i < k; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    if (!(p.value > 0.0) || !(p.n > 0.0)) throw DomainError("fit_rate: values and N must be positive");
    lx[i] = std::log(p.n);
    ly[i] = std::log(p.value);
  }
  const double mx = lx.mean(), my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  if (!(sxx > 0.0)) throw DomainError("fit_rate: N values must be distinct");
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  const double syy = (ly.array() - my).square().sum();
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  fit.n_points = k;
  return fit;
}

namespace {

void check_family(PotentialFamily family, const Vector& theta, const EmpiricalMeasure& mu,
                  const EmpiricalMeasure& nu) {
  if (mu.dim() != nu.dim()) throw ShapeError("hessian_check: dimension mismatch");
  if (family == PotentialFamily::LinearPotential) {
    if (theta.size() != mu.dim()) throw ShapeError("hessian_check: linear theta must have dimension d");
  } else {
    if (theta.size() != 1) throw ShapeError("hessian_check: quadratic theta is a scalar");
    if (!(theta[0] < 1.0)) throw DomainError("hessian_check: quadratic family needs theta < 1");
  }
}

// Closed-form argmin of |x-y|^2/2 - V_theta(y).
RowVector t_map(PotentialFamily family, const Vector& theta, const RowVector& x) {
  if (family == PotentialFamily::LinearPotential) return x + theta.transpose();
  return x / (1.0 - theta[0]);
}

double potential(PotentialFamily family, const Vector& theta, const RowVector& y) {
  if (family == PotentialFamily::LinearPotential) return y.dot(theta.transpose());
  return 0.5 * theta[0] * y.squaredNorm();
}

// grad_theta V, k-vector.
Vector potential_grad_theta(PotentialFamily family, const RowVector& y) {
  if (family == PotentialFamily::LinearPotential) return y.transpose();
  return Vector::Constant(1, 0.5 * y.squaredNorm());
}

// G = d(grad_y V)/d(theta), d x k.
Matrix mixed_derivative(PotentialFamily family, Index d, const RowVector& y) {
  if (family == PotentialFamily::LinearPotential) return Matrix::Identity(d, d);
  return y.transpose();
}

// grad_yy V, d x d.
Matrix hessian_y(PotentialFamily family, const Vector& theta, Index d) {
  if (family == PotentialFamily::LinearPotential) return Matrix::Zero(d, d);
  return theta[0] * Matrix::Identity(d, d);
}

}  // namespace

double reduced_semidual(PotentialFamily family, const Vector& theta, const EmpiricalMeasure& mu,
                        const EmpiricalMeasure& nu) {
  check_family(family, theta, mu, nu);
  double j = 0.0;
  for (Index i = 0; i < mu.size(); ++i) {
    const RowVector x = mu.points.row(i);
    const RowVector t = t_map(family, theta, x);
    j += mu.weights[i] * (0.5 * (x - t).squaredNorm() - potential(family, theta, t));
  }
  for (Index i = 0; i < nu.size(); ++i) j += nu.weights[i] * potential(family, theta, nu.points.row(i));
  return j;
}

HessianReport hessian_check(PotentialFamily family, const Vector& theta, const EmpiricalMeasure& mu,
                            const EmpiricalMeasure& nu, double fd_step) {
  check_family(family, theta, mu, nu);
  const Index d = mu.dim();
  const Index k = theta.size();
  HessianReport r;

  // (a) implicit-function formulas. Both families have grad_thetatheta V = 0.
  r.grad_formula = Vector::Zero(k);
  r.hess_formula = Matrix::Zero(k, k);
  const Matrix jac_t = (Matrix::Identity(d, d) - hessian_y(family, theta, d)).inverse();
  for (Index i = 0; i < nu.size(); ++i) r.grad_formula += nu.weights[i] * potential_grad_theta(family, nu.points.row(i));
  for (Index i = 0; i < mu.size(); ++i) {
    const RowVector t = t_map(family, theta, mu.points.row(i));
    r.grad_formula -= mu.weights[i] * potential_grad_theta(family, t);
    const Matrix g = mixed_derivative(family, d, t);
    r.hess_formula -= mu.weights[i] * (g.transpose() * jac_t * g);
  }

  // (b) central differences of J.
  auto j_at = [&](const Vector& th) { return reduced_semidual(family, th, mu, nu); };
  // The quadratic family's J has derivatives growing like (1 - theta)^-k, so the step shrinks with it.
  const double h = family == PotentialFamily::QuadraticPotential ? fd_step * std::min(1.0, 1.0 - theta[0]) : fd_step;
  const double j0 = j_at(theta);
  r.grad_fd.resize(k);
  r.hess_fd.resize(k, k);
  for (Index a = 0; a < k; ++a) {
    Vector tp = theta, tm = theta;
    tp[a] += h;
    tm[a] -= h;
    const double jp = j_at(tp), jm = j_at(tm);
    r.grad_fd[a] = (jp - jm) / (2.0 * h);
    r.hess_fd(a, a) = (jp - 2.0 * j0 + jm) / (h * h);
    for (Index b = 0; b < a; ++b) {
      Vector tpp = theta, tpm = theta, tmp = theta, tmm = theta;
      tpp[a] += h; tpp[b] += h;
      tpm[a] += h; tpm[b] -= h;
      tmp[a] -= h; tmp[b] += h;
      tmm[a] -= h; tmm[b] -= h;
      const double v = (j_at(tpp) - j_at(tpm) - j_at(tmp) + j_at(tmm)) / (4.0 * h * h);
      r.hess_fd(a, b) = r.hess_fd(b, a) = v;
    }
  }

  // (c) closed form.
  if (family == PotentialFamily::LinearPotential) {
    const Vector mean_y = nu.points.transpose() * nu.weights;
    const Vector mean_x = mu.points.transpose() * mu.weights;
    r.grad_closed = mean_y - mean_x - theta;
    r.hess_closed = -Matrix::Identity(d, d);
  } else {
    const double s = 1.0 - theta[0];
    const double ex2 = mu.weights.dot(mu.points.rowwise().squaredNorm());
    const double ey2 = nu.weights.dot(nu.points.rowwise().squaredNorm());
    r.grad_closed = Vector::Constant(1, 0.5 * ey2 - 0.5 * ex2 / (s * s));
    r.hess_closed = Matrix::Constant(1, 1, -ex2 / (s * s * s));
  }

  auto gap = [](const auto& p, const auto& q) { return (p - q).cwiseAbs().maxCoeff(); };
  r.max_discrepancy = std::max({gap(r.grad_formula, r.grad_fd), gap(r.grad_formula, r.grad_closed),
                                gap(r.grad_fd, r.grad_closed), gap(r.hess_formula, r.hess_fd),
                                gap(r.hess_formula, r.hess_closed), gap(r.hess_fd, r.hess_closed)});
  return r;
}

double stability_exponent(double p, double d) {
  if (!(p > 0.0) || !(d > 0.0)) throw DomainError("stability_exponent: p and d must be positive");
  return p / (6.0 * p + 16.0 * d);
}

PlanStability plan_stability_ratio(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2,
                                   const EmpiricalMeasure& nu, double p, const SolverOptions& options) {
  const TransportPlan pi1 = solve_exact(mu1, nu, {CostKind::SqEuclideanHalf, 1.0}, options);
  const TransportPlan pi2 = solve_exact(mu2, nu, {CostKind::SqEuclideanHalf, 1.0}, options);
  PlanStability s;
  s.w2_plans = plan_distance(pi1, mu1, nu, pi2, mu2, nu, options);
  s.w1_sources = wasserstein(mu1, mu2, 1, options);
  s.w2_sources = wasserstein(mu1, mu2, 2, options);
  s.alpha_p = stability_exponent(p, static_cast<double>(mu1.dim()));
  return s;
}

}  // namespace snot
