#include "snot/ctransform.hpp"

#include <fstream>
#include <limits>

#include "snot/csv.hpp"
#include "snot/error.hpp"

namespace snot {

void GridPotential::validate() const {
  if (support.rows() < 1) throw ShapeError("potential: empty support");
  if (values.size() != support.rows()) throw ShapeError("potential: value count differs from support");
  if (!values.allFinite() || !support.allFinite()) throw DomainError("potential: non-finite entries");
  cost.validate();
}

Index GridPotential::anchor() const {
  Index best = 0;
  support.rowwise().squaredNorm().minCoeff(&best);
  return best;
}

void GridPotential::normalize() {
  validate();
  values.array() -= values[anchor()];
}

CTransformResult c_transform(const GridPotential& potential, const Matrix& x_points) {
  potential.validate();
  if (x_points.cols() != potential.support.cols()) throw ShapeError("c_transform: dimension mismatch");
  const Index n = x_points.rows();
  const Index m = potential.support.rows();
  CTransformResult r;
  r.values.resize(n);
  r.argmin.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = 0;
    for (Index j = 0; j < m; ++j) {
      const double v = potential.cost(x_points.row(i), potential.support.row(j)) - potential.values[j];
      if (v < best) {
        best = v;
        arg = j;
      }
    }
    r.values[i] = best;
    r.argmin[static_cast<std::size_t>(i)] = arg;
  }
  return r;
}

Vector cc_transform(const GridPotential& potential, const Matrix& x_grid, const Matrix& y_eval) {
  if (x_grid.rows() < 1 || y_eval.rows() < 1) throw ShapeError("cc_transform: empty grid");
  if (y_eval.cols() != potential.support.cols()) throw ShapeError("cc_transform: dimension mismatch");
  const Vector vc = c_transform(potential, x_grid).values;
  Vector out(y_eval.rows());
  for (Index j = 0; j < y_eval.rows(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < x_grid.rows(); ++i) {
      best = std::min(best, potential.cost(x_grid.row(i), y_eval.row(j)) - vc[i]);
    }
    out[j] = best;
  }
  return out;
}

GridPotential cc_potential(const GridPotential& potential, const Matrix& x_grid) {
  GridPotential out = potential;
  out.values = cc_transform(potential, x_grid, potential.support);
  return out;
}

double semidual_value(const GridPotential& potential, const EmpiricalMeasure& mu,
                      const Vector& nu_weights) {
  mu.validate();
  if (nu_weights.size() != potential.support.rows()) {
    throw ShapeError("semidual_value: target weights do not align with the support");
  }
  const Vector vc = c_transform(potential, mu.points).values;
  return mu.weights.dot(vc) + nu_weights.dot(potential.values);
}

std::vector<Index> nearest_support(const Matrix& support, const Matrix& points) {
  if (support.cols() != points.cols()) throw ShapeError("nearest_support: dimension mismatch");
  std::vector<Index> idx(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) {
    Index best = 0;
    (support.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
    idx[static_cast<std::size_t>(i)] = best;
  }
  return idx;
}

double recovery_residual(const GridPotential& potential, const Matrix& t_values,
                         const Matrix& x_points, const Vector& mu_weights) {
  if (t_values.rows() != x_points.rows() || mu_weights.size() != x_points.rows()) {
    throw ShapeError("recovery_residual: row counts differ");
  }
  if (t_values.cols() != potential.support.cols()) throw ShapeError("recovery_residual: dimension mismatch");
  const Vector vc = c_transform(potential, x_points).values;
  const std::vector<Index> snap = nearest_support(potential.support, t_values);
  double total = 0.0;
  for (Index i = 0; i < x_points.rows(); ++i) {
    const Index j = snap[static_cast<std::size_t>(i)];
    const double gap =
        potential.cost(x_points.row(i), potential.support.row(j)) - potential.values[j] - vc[i];
    total += mu_weights[i] * gap;
  }
  return total;
}

void write_potential_csv(std::ostream& os, const GridPotential& potential) {
  CsvTable t;
  for (Index k = 0; k < potential.support.cols(); ++k) t.header.push_back("y" + std::to_string(k));
  t.header.push_back("V");
  for (Index j = 0; j < potential.support.rows(); ++j) {
    std::vector<double> row(potential.support.row(j).begin(), potential.support.row(j).end());
    row.push_back(potential.values[j]);
    t.rows.push_back(std::move(row));
  }
  write_csv(os, t);
}

void write_potential_csv(const std::filesystem::path& path, const GridPotential& potential) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_potential_csv(os, potential);
}

}  // namespace snot
