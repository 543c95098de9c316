#include "snot/selftest.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "snot/analytic.hpp"
#include "snot/ctransform.hpp"
#include "snot/discrete_ot.hpp"
#include "snot/metrics.hpp"
#include "snot/nn.hpp"
#include "snot/rng.hpp"
#include "snot/schedule.hpp"
#include "snot/trainer.hpp"

namespace snot {
namespace {

class Property {
 public:
  explicit Property(std::string name) { r_.name = std::move(name); }
  // Records one instance whose violation must stay <= tol.
  void check(double violation, double tol) {
    ++r_.instances;
    if (!(violation <= tol)) ++r_.failures;
    if (!(violation <= r_.worst)) r_.worst = violation;
  }
  PropertyResult done() const { return r_; }

 private:
  PropertyResult r_;
};

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

Vector random_weights(Index n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Vector w(n);
  for (Index i = 0; i < n; ++i) w[i] = u(rng);
  return w / w.sum();
}

Index uniform_index(Index lo, Index hi, Rng& rng) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

EmpiricalMeasure random_measure(Index n, Index d, Rng& rng, bool uniform_weights) {
  EmpiricalMeasure m;
  m.points = gaussian_matrix(n, d, rng);
  m.weights = uniform_weights ? Vector::Constant(n, 1.0 / static_cast<double>(n)) : random_weights(n, rng);
  return m;
}

// ---- c-transform ----

SuiteResult ctransform_suite(Rng& rng) {
  SuiteResult s{"ctransform", {}};
  Property lip("1-Lipschitz in sup norm"), above("V^cc >= V"), same("(V^cc)^c = V^c"),
      feasible("V^c(x) + V(y) <= c(x, y)"), idem("(V^cc)^cc = V^cc"), weak("weak duality"),
      strong("LP duals attain the optimum");
  const Cost cost{CostKind::SqEuclideanHalf, 1.0};
  for (int inst = 0; inst < 100; ++inst) {
    const Index d = uniform_index(1, 3, rng), m = uniform_index(2, 30, rng), n = uniform_index(2, 30, rng);
    const Matrix y = gaussian_matrix(m, d, rng), x = gaussian_matrix(n, d, rng);
    GridPotential f{y, gaussian_matrix(m, 1, rng).col(0), cost};
    GridPotential g{y, gaussian_matrix(m, 1, rng).col(0), cost};
    const Vector fc = c_transform(f, x).values, gc = c_transform(g, x).values;
    lip.check((fc - gc).cwiseAbs().maxCoeff() - (f.values - g.values).cwiseAbs().maxCoeff(), 1e-12);

    const GridPotential fcc = cc_potential(f, x);
    above.check((f.values - fcc.values).maxCoeff(), 1e-12);
    same.check((c_transform(fcc, x).values - fc).cwiseAbs().maxCoeff(), 1e-12);
    idem.check((cc_transform(fcc, x, y) - fcc.values).cwiseAbs().maxCoeff(), 1e-12);
    double worst = -1e300;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) worst = std::max(worst, fc[i] + f.values[j] - cost(x.row(i), y.row(j)));
    }
    feasible.check(worst, 1e-12);

    const EmpiricalMeasure mu{x, random_weights(n, rng)};
    const EmpiricalMeasure nu{y, random_weights(m, rng)};
    const DualSolution lp = solve_exact_with_duals(mu, nu, cost);
    weak.check(semidual_value(f, mu, nu.weights) - lp.plan.cost_value, 1e-9);
    const GridPotential dual{y, lp.v, cost};
    strong.check(std::abs(semidual_value(dual, mu, nu.weights) - lp.plan.cost_value), 1e-8);
  }
  for (const auto& p : {lip, above, same, feasible, idem, weak, strong}) s.properties.push_back(p.done());
  return s;
}

// ---- discrete OT ----

SuiteResult ot_suite(Rng& rng) {
  SuiteResult s{"discrete_ot", {}};
  Property brute("simplex = brute force"), mono("1D monotone = simplex"), marg("plan marginals"),
      tri("triangle inequality");
  for (int inst = 0; inst < 200; ++inst) {
    const Index n = uniform_index(1, 6, rng), d = uniform_index(1, 4, rng);
    const Cost cost{inst % 2 ? CostKind::Euclidean : CostKind::SqEuclideanHalf, 1.0};
    const EmpiricalMeasure mu = random_measure(n, d, rng, true), nu = random_measure(n, d, rng, true);
    const TransportPlan p = solve_exact(mu, nu, cost);
    brute.check(std::abs(p.cost_value - brute_force(mu, nu, cost).cost_value), 1e-9);
    marg.check(std::max((p.row_sums() - mu.weights).cwiseAbs().maxCoeff(),
                        (p.col_sums() - nu.weights).cwiseAbs().maxCoeff()),
               1e-9);
  }
  for (int inst = 0; inst < 200; ++inst) {
    const Index n = uniform_index(1, 40, rng), m = uniform_index(1, 40, rng);
    const Cost cost{inst % 2 ? CostKind::Euclidean : CostKind::SqEuclideanHalf, 1.0 + inst % 3};
    const EmpiricalMeasure mu = random_measure(n, 1, rng, inst % 3 == 0), nu = random_measure(m, 1, rng, false);
    mono.check(std::abs(solve_1d(mu, nu, cost).cost_value - solve_exact(mu, nu, cost).cost_value), 1e-9);
  }
  for (int inst = 0; inst < 50; ++inst) {
    const Index d = uniform_index(1, 3, rng);
    const EmpiricalMeasure a = random_measure(uniform_index(1, 20, rng), d, rng, false);
    const EmpiricalMeasure b = random_measure(uniform_index(1, 20, rng), d, rng, false);
    const EmpiricalMeasure c = random_measure(uniform_index(1, 20, rng), d, rng, false);
    for (int order : {1, 2}) {
      tri.check(wasserstein(a, c, order) - wasserstein(a, b, order) - wasserstein(b, c, order), 1e-9);
    }
  }
  for (const auto& p : {brute, mono, marg, tri}) s.properties.push_back(p.done());
  return s;
}

// ---- gradients ----

double rel_gap(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

// Re-draws inputs until every pre-activation is clear of the ReLU kink by `margin`.
Matrix batch_away_from_kinks(const MlpParams& p, Index rows, Rng& rng, double margin) {
  for (;;) {
    Matrix x = gaussian_matrix(rows, p.input_dim(), rng);
    Matrix pre = x * p.W1.transpose();
    pre.rowwise() += p.b1.transpose();
    if (pre.cwiseAbs().minCoeff() > margin) return x;
  }
}

SuiteResult gradient_suite(Rng& rng) {
  SuiteResult s{"gradients", {}};
  Property back("backward vs central differences"), jac("jacobian_map vs central differences"),
      dir("directional derivative"), loss_t("loss_minimax map gradient"), loss_v("loss_minimax potential gradient");
  const double h = 1e-5;
  for (int inst = 0; inst < 100; ++inst) {
    const Index d_in = uniform_index(1, 4, rng), hid = uniform_index(1, 6, rng), d_out = uniform_index(1, 3, rng);
    MlpParams p = MlpParams::init(d_in, hid, d_out, rng);
    const Matrix x = batch_away_from_kinks(p, 4, rng, 1e-3);
    const Matrix g = gaussian_matrix(4, d_out, rng);
    ForwardCache cache;
    forward(p, x, &cache);
    Matrix dx;
    const MlpParams grad = backward(p, cache, g, &dx);
    double worst = 0.0;
    for (Index k = 0; k < p.parameter_count(); ++k) {
      const double keep = p.at(k);
      p.at(k) = keep + h;
      const double fp = forward(p, x).cwiseProduct(g).sum();
      p.at(k) = keep - h;
      const double fm = forward(p, x).cwiseProduct(g).sum();
      p.at(k) = keep;
      worst = std::max(worst, rel_gap(grad.at(k), (fp - fm) / (2.0 * h)));
    }
    for (Index k = 0; k < x.size(); ++k) {
      Matrix xp = x, xm = x;
      xp.data()[k] += h;
      xm.data()[k] -= h;
      const double fd = (forward(p, xp).cwiseProduct(g).sum() - forward(p, xm).cwiseProduct(g).sum()) / (2.0 * h);
      worst = std::max(worst, rel_gap(dx.data()[k], fd));
    }
    back.check(worst, 1e-6);

    const Vector x0 = x.row(0).transpose();
    const Matrix j = jacobian_map(p, x0);
    double jworst = 0.0;
    for (Index c = 0; c < d_in; ++c) {
      Matrix xp = x0.transpose(), xm = x0.transpose();
      xp(0, c) += h;
      xm(0, c) -= h;
      const RowVector col = (forward(p, xp) - forward(p, xm)) / (2.0 * h);
      for (Index r = 0; r < d_out; ++r) jworst = std::max(jworst, std::abs(col[r] - j(r, c)));
    }
    jac.check(jworst, 1e-5);
    const Vector v = gaussian_matrix(d_in, 1, rng).col(0);
    const double t = 1e-6;
    const RowVector step = (forward(p, (x0 + t * v).transpose()) - forward(p, x0.transpose())) / t;
    dir.check((step.transpose() - j * v).cwiseAbs().maxCoeff(), 1e-4);
  }

  for (int inst = 0; inst < 20; ++inst) {
    const Index d = uniform_index(1, 3, rng);
    MlpParams t = MlpParams::init(d, 4, d, rng);
    MlpParams v = MlpParams::init(d, 4, 1, rng);
    const Matrix x = batch_away_from_kinks(t, 5, rng, 1e-3);
    const Matrix y = batch_away_from_kinks(v, 6, rng, 1e-3);
    const double tau = 0.5 + inst % 3, lambda = 0.1 * (inst % 4);
    const LossResult rt = loss_minimax(v, t, x, y, tau, lambda, LossSide::Map);
    const LossResult rv = loss_minimax(v, t, x, y, tau, lambda, LossSide::Potential);
    auto objective_t = [&] { return loss_minimax(v, t, x, y, tau, 0.0, LossSide::Map).loss; };
    auto objective_v = [&] {
      return lambda * r1_penalty(v, y) - loss_minimax(v, t, x, y, tau, 0.0, LossSide::Map).loss;
    };
    double worst_t = 0.0, worst_v = 0.0;
    for (Index k = 0; k < t.parameter_count(); ++k) {
      const double keep = t.at(k);
      t.at(k) = keep + h;
      const double fp = objective_t();
      t.at(k) = keep - h;
      const double fm = objective_t();
      t.at(k) = keep;
      worst_t = std::max(worst_t, rel_gap(rt.grad.at(k), (fp - fm) / (2.0 * h)));
    }
    for (Index k = 0; k < v.parameter_count(); ++k) {
      const double keep = v.at(k);
      v.at(k) = keep + h;
      const double fp = objective_v();
      v.at(k) = keep - h;
      const double fm = objective_v();
      v.at(k) = keep;
      worst_v = std::max(worst_v, rel_gap(rv.grad.at(k), (fp - fm) / (2.0 * h)));
    }
    loss_t.check(worst_t, 1e-5);
    loss_v.check(worst_v, 1e-5);
  }
  for (const auto& p : {back, jac, dir, loss_t, loss_v}) s.properties.push_back(p.done());
  return s;
}

// ---- reduced semi-dual derivatives ----

SuiteResult hessian_suite(Rng& rng) {
  SuiteResult s{"hessian", {}};
  Property lin("linear potential"), quad("quadratic potential");
  for (int inst = 0; inst < 20; ++inst) {
    const Index d = uniform_index(1, 4, rng);
    const EmpiricalMeasure mu = random_measure(20, d, rng, false), nu = random_measure(25, d, rng, false);
    lin.check(hessian_check(PotentialFamily::LinearPotential, gaussian_matrix(d, 1, rng).col(0), mu, nu).max_discrepancy, 1e-5);
    const double theta = std::uniform_real_distribution<double>(-1.0, 0.5)(rng);
    quad.check(hessian_check(PotentialFamily::QuadraticPotential, Vector::Constant(1, theta), mu, nu).max_discrepancy, 1e-5);
  }
  s.properties = {lin.done(), quad.done()};
  return s;
}

// ---- stability inequalities ----

SuiteResult stability_suite(Rng& rng) {
  SuiteResult s{"stability", {}};
  Property proj("W2(plans) >= W2(left marginals)"), coupling("W1(mu_N, mu_N^eps) <= eps mean|Y|");
  for (int inst = 0; inst < 200; ++inst) {
    const Index d = uniform_index(1, 3, rng);
    const EmpiricalMeasure mu1 = random_measure(uniform_index(1, 50, rng), d, rng, inst % 2 == 0);
    const EmpiricalMeasure mu2 = random_measure(uniform_index(1, 50, rng), d, rng, inst % 2 == 0);
    const EmpiricalMeasure nu = random_measure(uniform_index(1, 50, rng), d, rng, inst % 2 == 0);
    const PlanStability r = plan_stability_ratio(mu1, mu2, nu, 2.0);
    proj.check(r.w2_sources - r.w2_plans, 1e-9);
  }
  for (int inst = 0; inst < 200; ++inst) {
    const Index n = uniform_index(1, 200, rng), d = uniform_index(1, 10, rng);
    const EmpiricalMeasure mu = random_measure(n, d, rng, true);
    const double eps = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const Matrix y = gaussian_matrix(n, d, rng);
    const EmpiricalMeasure noisy{mu.points + eps * y, mu.weights};
    coupling.check(wasserstein(mu, noisy, 1) - eps * y.rowwise().norm().mean(), 1e-9);
  }
  s.properties = {proj.done(), coupling.done()};
  return s;
}

// ---- analytic maps ----

SuiteResult analytic_suite() {
  SuiteResult s{"analytic", {}};
  Property map("1D solver matches 2 Phi(x/eps) - 1"), deriv("T'(0) = 2/(eps sqrt(2 pi))");
  const Cost cost{CostKind::SqEuclideanHalf, 1.0};
  const EmpiricalMeasure nu = EmpiricalMeasure::uniform(uniform_quantile_atoms(1000, -1.0, 1.0));
  for (double eps : {0.1, 0.3, 1.0}) {
    const EmpiricalMeasure mu = EmpiricalMeasure::uniform(gaussian_quantile_atoms(1000, eps));
    const Matrix image = barycentric_map(solve_1d(mu, nu, cost), mu, nu);
    double worst = 0.0;
    for (Index i = 0; i < mu.size(); ++i) {
      worst = std::max(worst, std::abs(image(i, 0) - map_gauss_to_uniform(mu.points(i, 0), eps)));
    }
    map.check(worst, 0.02);
    const double h = 1e-5;
    const double fd = (map_gauss_to_uniform(h, eps) - map_gauss_to_uniform(-h, eps)) / (2.0 * h);
    const double expected = 2.0 / (eps * std::sqrt(2.0 * std::numbers::pi));
    deriv.check(std::max(std::abs(fd - expected), std::abs(map_gauss_to_uniform_derivative(0.0, eps) - expected)), 1e-6);
  }
  s.properties = {map.done(), deriv.done()};
  return s;
}

// ---- schedules ----

SuiteResult schedule_suite() {
  SuiteResult s{"schedule", {}};
  Property trace("trace matches closed form"), stat("eps_stat(1e6, m=3) = 0.01");
  const std::int64_t b = 64, iters = 3000;
  const std::vector<NoiseSchedule> schedules{ConstantSchedule{0.05}, StepwiseLinearSchedule{0.2, 0.05, 500, iters},
                                             RateOptimalSchedule{3, 1.7, 1.0, 0.02, 250}};
  for (const auto& sch : schedules) {
    const CsvTable t = schedule_trace(sch, iters, b);
    double worst = 0.0;
    for (std::int64_t k = 0; k < iters; ++k) {
      double expected = 0.0;
      if (const auto* c = std::get_if<ConstantSchedule>(&sch)) {
        expected = c->eps;
      } else if (const auto* l = std::get_if<StepwiseLinearSchedule>(&sch)) {
        const double tt = static_cast<double>((k / l->period) * l->period + 1) / static_cast<double>(l->total);
        expected = (1.0 - tt) * l->sigma_max + tt * l->sigma_min;
      } else {
        const auto& r = std::get<RateOptimalSchedule>(sch);
        const double n = static_cast<double>(((k / r.period) * r.period + 1) * b);
        expected = std::max(r.c0 / r.e_abs_y / std::cbrt(n), r.eps_min);
      }
      worst = std::max(worst, std::abs(t.rows[static_cast<std::size_t>(k)][2] - expected));
    }
    trace.check(worst, 0.0);
  }
  stat.check(std::abs(epsilon_stat(1000000, 3, 1.0, 1.0) - 0.01), 0.0);
  s.properties = {trace.done(), stat.done()};
  return s;
}

}  // namespace

bool SuiteResult::passed() const {
  for (const auto& p : properties) {
    if (p.failures) return false;
  }
  return true;
}

std::vector<SuiteResult> run_selftest(const SelftestOptions& options) {
  struct FaultGuard {
    explicit FaultGuard(bool on) { testing::set_backward_sign_fault(on); }
    ~FaultGuard() { testing::set_backward_sign_fault(false); }
  } guard(options.inject_backward_sign);

  std::vector<SuiteResult> out;
  Rng rng = make_rng(options.seed, 1);
  out.push_back(ctransform_suite(rng));
  out.push_back(ot_suite(rng));
  out.push_back(gradient_suite(rng));
  out.push_back(hessian_suite(rng));
  out.push_back(stability_suite(rng));
  out.push_back(analytic_suite());
  out.push_back(schedule_suite());
  return out;
}

std::string format_selftest(const std::vector<SuiteResult>& suites) {
  std::ostringstream os;
  os.precision(3);
  for (const auto& s : suites) {
    os << (s.passed() ? "PASS " : "FAIL ") << s.name << '\n';
    for (const auto& p : s.properties) {
      os << "  " << (p.failures ? "FAIL " : "ok   ") << p.name << ": " << p.instances - p.failures << '/'
         << p.instances << " worst=" << p.worst << '\n';
    }
  }
  return os.str();
}

}  // namespace snot
