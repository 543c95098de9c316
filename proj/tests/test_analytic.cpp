#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "snot/analytic.hpp"
#include "snot/discrete_ot.hpp"
#include "snot/error.hpp"
#include "snot/rng.hpp"

using namespace snot;

namespace {

// Composite Simpson integral of the standard normal density on [0, x].
double simpson_phi(double x) {
  const int n = 20000;
  const double h = x / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = i * h;
    const double f = std::exp(-0.5 * t * t) / std::sqrt(2 * std::numbers::pi);
    s += f * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
  }
  return 0.5 + s * h / 3;
}

}  // namespace

TEST(Phi, KnownValues) {
  EXPECT_EQ(phi_cdf(0.0), 0.5);
  EXPECT_NEAR(phi_cdf(1.959964), 0.975, 1e-6);
  for (const double x : {0.3, 1.0, 2.5, 4.0}) EXPECT_NEAR(phi_cdf(x), simpson_phi(x), 1e-12);
}

TEST(Phi, Symmetry) {
  Rng rng = make_rng(1);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = g(rng);
    EXPECT_NEAR(phi_cdf(-x), 1.0 - phi_cdf(x), 1e-14);
  }
}

TEST(Phi, QuantileInverts) {
  for (const double p : {1e-10, 0.01, 0.3, 0.5, 0.9, 1 - 1e-9}) EXPECT_NEAR(phi_cdf(phi_quantile(p)), p, 1e-13);
  EXPECT_THROW(phi_quantile(0.0), DomainError);
}

TEST(GaussToUniform, ValuesAndDerivative) {
  for (const double eps : {0.1, 0.3, 1.0}) {
    EXPECT_EQ(map_gauss_to_uniform(0.0, eps), 0.0);
    EXPECT_NEAR(map_gauss_to_uniform_derivative(0.0, eps), 2.0 / (eps * std::sqrt(2 * std::numbers::pi)), 1e-12);
    const double h = 1e-6 * eps;
    const double fd = (map_gauss_to_uniform(h, eps) - map_gauss_to_uniform(-h, eps)) / (2 * h);
    EXPECT_NEAR(fd, 2.0 / (eps * std::sqrt(2 * std::numbers::pi)), 1e-6 / eps);
  }
  EXPECT_THROW(map_gauss_to_uniform(0.0, 0.0), DomainError);
}

TEST(GaussToUniform, StrictlyIncreasing) {
  double prev = -2.0;
  for (double x = -2.0; x <= 2.0; x += 0.01) {
    const double v = map_gauss_to_uniform(x, 0.3);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(GaussToUniform, PushforwardIsUniform) {
  const double eps = 0.4;
  Rng rng = make_rng(2);
  std::normal_distribution<double> g(0.0, eps);
  std::vector<double> v(100000);
  for (double& a : v) a = map_gauss_to_uniform(g(rng), eps);
  std::sort(v.begin(), v.end());
  double ks = 0.0;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = (v[i] + 1.0) / 2.0;
    ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  EXPECT_LT(ks, 0.01);
}

TEST(GaussToUniform, QuantileAtomsMatchMonotoneCoupling) {
  for (const double eps : {0.1, 0.3, 1.0}) {
    const auto mu = EmpiricalMeasure::uniform(gaussian_quantile_atoms(1000, eps));
    const auto nu = EmpiricalMeasure::uniform(uniform_quantile_atoms(1000, -1.0, 1.0));
    const Matrix t = barycentric_map(solve_1d(mu, nu, Cost{}), mu, nu);
    double sup = 0.0;
    for (Index i = 0; i < 1000; ++i) sup = std::max(sup, std::abs(t(i, 0) - map_gauss_to_uniform(mu.points(i, 0), eps)));
    EXPECT_LT(sup, 0.02);
    // On quantile atoms the closed form hits the reference atoms exactly.
    EXPECT_LT(sup, 1e-12);
  }
}

TEST(DegenerateLimit, CasesAndConvergence) {
  EXPECT_EQ(map_degenerate_limit(-1.0), 0.0);
  EXPECT_EQ(map_degenerate_limit(0.0), 0.5);
  EXPECT_EQ(map_degenerate_limit(1.0), 1.0);
  for (const double eps : {0.05, 0.01})
    for (const double x : {-3.0, -1.0, 1.0, 2.0}) EXPECT_LT(std::abs(map_gauss_to_unit_interval(x, eps) - map_degenerate_limit(x)), 1e-6);
  // delta_0 pushed through the limit lands on 1/2, never on the spread-out target.
  EXPECT_EQ(map_degenerate_limit(0.0), 0.5);
}

TEST(DeltaToGaussian, MapAndJacobian) {
  EXPECT_TRUE(map_delta_to_gaussian(Vector::Zero(10), 0.25).isZero(0.0));
  const Matrix j = map_delta_to_gaussian_jacobian(10, 0.25);
  EXPECT_TRUE(j.isApprox(4.0 * Matrix::Identity(10, 10)));
  EXPECT_THROW(map_delta_to_gaussian(Vector::Zero(2), -1.0), DomainError);
}

TEST(DeltaToGaussian, PushforwardCovariance) {
  const double eps = 0.2;
  const Index n = 100000, d = 3;
  Rng rng = make_rng(3);
  std::normal_distribution<double> g(0.0, eps);
  Matrix y(n, d);
  for (Index i = 0; i < n; ++i) {
    Vector x(d);
    for (Index k = 0; k < d; ++k) x[k] = g(rng);
    y.row(i) = map_delta_to_gaussian(x, eps).transpose();
  }
  const Matrix c = y.rowwise() - y.colwise().mean();
  const Matrix cov = (c.transpose() * c) / static_cast<double>(n - 1);
  EXPECT_LT((cov - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 0.05);
}
