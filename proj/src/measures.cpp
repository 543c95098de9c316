#include "snot/measures.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include "snot/csv.hpp"
#include "snot/error.hpp"

namespace snot {

EmpiricalMeasure EmpiricalMeasure::uniform(Matrix points) {
  EmpiricalMeasure m;
  const Index n = points.rows();
  if (n < 1) throw ShapeError("measure: need at least one point");
  m.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
  m.points = std::move(points);
  return m;
}

void EmpiricalMeasure::validate() const {
  if (points.rows() < 1) throw ShapeError("measure: need at least one point");
  if (weights.size() != points.rows()) throw ShapeError("measure: weight count differs from point count");
  if (!points.allFinite()) throw DomainError("measure: non-finite point coordinate");
  if ((weights.array() < 0.0).any()) throw DomainError("measure: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw DomainError("measure: weights do not sum to one");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Perpendicular: return "perpendicular";
    case DatasetKind::OneToMany: return "one_to_many";
    case DatasetKind::UniformCubeEmbedded: return "uniform_cube_embedded";
    case DatasetKind::PointMass: return "point_mass";
    case DatasetKind::StandardGaussian: return "standard_gaussian";
    case DatasetKind::UniformInterval: return "uniform_interval";
  }
  return "?";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  static const std::map<std::string, DatasetKind> kinds{
      {"perpendicular", DatasetKind::Perpendicular},
      {"one_to_many", DatasetKind::OneToMany},
      {"uniform_cube_embedded", DatasetKind::UniformCubeEmbedded},
      {"point_mass", DatasetKind::PointMass},
      {"standard_gaussian", DatasetKind::StandardGaussian},
      {"uniform_interval", DatasetKind::UniformInterval},
  };
  auto it = kinds.find(s);
  if (it == kinds.end()) throw ConfigError("unknown dataset kind '" + s + "'");
  return it->second;
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::GaussianIsotropic ? "gaussian" : "uniform_ball";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseKind::GaussianIsotropic;
  if (s == "uniform_ball") return NoiseKind::CompactUniformBall;
  throw ConfigError("unknown noise kind '" + s + "'");
}

void DatasetSpec::validate() const {
  if (ambient_dim < 1) throw ConfigError("dataset: ambient_dim must be positive");
  if (manifold_dim < 1) throw ConfigError("dataset: manifold_dim must be positive");
  if (manifold_dim > ambient_dim) throw ConfigError("dataset: manifold_dim exceeds ambient_dim");
  if (!(params.low <= params.high)) throw ConfigError("dataset: low must not exceed high");
  if (kind == DatasetKind::OneToMany && side == Side::Target && manifold_dim >= ambient_dim) {
    throw ConfigError("dataset: one_to_many target needs ambient_dim > manifold_dim");
  }
  if (params.location.size() != 0 && params.location.size() != ambient_dim) {
    throw ConfigError("dataset: location has wrong dimension");
  }
  if (params.offset.size() != 0 && params.offset.size() != ambient_dim) {
    throw ConfigError("dataset: offset has wrong dimension");
  }
}

Matrix sample_points(const DatasetSpec& spec, Index n, Rng& rng) {
  spec.validate();
  if (n < 1) throw ShapeError("sample: n must be at least 1");
  const int d = spec.ambient_dim;
  const int m = spec.manifold_dim;
  Matrix x = Matrix::Zero(n, d);
  std::uniform_real_distribution<double> unif(spec.params.low, spec.params.high);
  std::normal_distribution<double> gauss(0.0, 1.0);

  switch (spec.kind) {
    case DatasetKind::Perpendicular:
      for (Index i = 0; i < n; ++i) {
        // Source on the first m coordinates, target on the last m.
        const int first = spec.side == Side::Source ? 0 : d - m;
        for (int k = 0; k < m; ++k) x(i, first + k) = unif(rng);
      }
      break;
    case DatasetKind::OneToMany:
      for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < m; ++k) x(i, k) = unif(rng);
        if (spec.side == Side::Target) {
          // e_1 of the trailing block sits at coordinate m.
          x(i, m) = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
        }
      }
      break;
    case DatasetKind::UniformCubeEmbedded:
      for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < m; ++k) x(i, k) = unif(rng);
      }
      break;
    case DatasetKind::PointMass:
      if (spec.params.location.size() == d) x.rowwise() = spec.params.location.transpose();
      break;
    case DatasetKind::StandardGaussian:
      for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) x(i, k) = gauss(rng);
      }
      break;
    case DatasetKind::UniformInterval:
      for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) x(i, k) = unif(rng);
      }
      break;
  }
  if (spec.params.offset.size() == d) x.rowwise() += spec.params.offset.transpose();
  return x;
}

EmpiricalMeasure sample(const DatasetSpec& spec, Index n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return EmpiricalMeasure::uniform(sample_points(spec, n, rng));
}

Matrix draw_noise(const NoiseModel& noise, Index n, Rng& rng) {
  if (noise.dim < 1) throw ConfigError("noise: dim must be positive");
  Matrix y(n, noise.dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < noise.dim; ++k) y(i, k) = gauss(rng);
  }
  if (noise.kind == NoiseKind::CompactUniformBall) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
      const double norm = y.row(i).norm();
      const double radius = std::pow(unif(rng), 1.0 / noise.dim);
      if (norm > 0.0) y.row(i) *= radius / norm;
    }
  }
  return y;
}

EmpiricalMeasure smooth(const EmpiricalMeasure& measure, const NoiseModel& noise, double epsilon,
                        std::uint64_t seed) {
  if (!(epsilon >= 0.0)) throw DomainError("smooth: epsilon must be nonnegative");
  if (noise.dim != measure.dim()) throw ShapeError("smooth: noise dimension differs from measure");
  EmpiricalMeasure out = measure;
  if (epsilon == 0.0) return out;
  Rng rng = make_rng(seed);
  out.points += epsilon * draw_noise(noise, measure.size(), rng);
  return out;
}

double mean_noise_norm(const NoiseModel& noise, Index n_mc, std::uint64_t seed) {
  if (n_mc < 1) throw DomainError("mean_noise_norm: n_mc must be at least 1");
  Rng rng = make_rng(seed);
  // Chunked so memory stays bounded for large n_mc.
  constexpr Index kChunk = 8192;
  double total = 0.0;
  for (Index done = 0; done < n_mc;) {
    const Index take = std::min(kChunk, n_mc - done);
    total += draw_noise(noise, take, rng).rowwise().norm().sum();
    done += take;
  }
  return total / static_cast<double>(n_mc);
}

double cached_mean_noise_norm(const NoiseModel& noise) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, double> cache;
  const auto key = std::make_pair(static_cast<int>(noise.kind), noise.dim);
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const double v = mean_noise_norm(noise, 100000, 0x5EEDULL);
  cache.emplace(key, v);
  return v;
}

void write_measure_csv(std::ostream& os, const EmpiricalMeasure& measure) {
  CsvTable t;
  for (Index k = 0; k < measure.dim(); ++k) t.header.push_back("x" + std::to_string(k));
  t.header.push_back("w");
  for (Index i = 0; i < measure.size(); ++i) {
    std::vector<double> row(measure.points.row(i).begin(), measure.points.row(i).end());
    row.push_back(measure.weights[i]);
    t.rows.push_back(std::move(row));
  }
  write_csv(os, t);
}

void write_measure_csv(const std::filesystem::path& path, const EmpiricalMeasure& measure) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_measure_csv(os, measure);
}

EmpiricalMeasure read_measure_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  if (t.header.size() < 2 || t.header.back() != "w") throw ConfigError("measure csv: last column must be 'w'");
  const Index d = static_cast<Index>(t.header.size()) - 1;
  for (Index k = 0; k < d; ++k) {
    if (t.header[k] != "x" + std::to_string(k)) throw ConfigError("measure csv: unexpected header '" + t.header[k] + "'");
  }
  EmpiricalMeasure m;
  m.points.resize(static_cast<Index>(t.rows.size()), d);
  m.weights.resize(static_cast<Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (Index k = 0; k < d; ++k) m.points(static_cast<Index>(i), k) = t.rows[i][k];
    m.weights[static_cast<Index>(i)] = t.rows[i][d];
  }
  m.validate();
  return m;
}

EmpiricalMeasure read_measure_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path.string() + "'");
  return read_measure_csv(is);
}

}  // namespace snot
