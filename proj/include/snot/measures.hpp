#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "snot/linalg.hpp"
#include "snot/rng.hpp"

namespace snot {

// A probability measure represented by weighted atoms in R^d.
struct EmpiricalMeasure {
  Matrix points;   // N x d
  Vector weights;  // N, nonnegative, sums to one

  static EmpiricalMeasure uniform(Matrix points);

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }

  // Throws ShapeError / DomainError when the invariants do not hold.
  void validate() const;
};

enum class DatasetKind {
  Perpendicular,
  OneToMany,
  UniformCubeEmbedded,
  PointMass,
  StandardGaussian,
  UniformInterval,
};

// Perpendicular and OneToMany describe a source/target pair; the side picks which one.
enum class Side { Source, Target };

struct DatasetParams {
  double low = -1.0;  // cube / interval lower end
  double high = 1.0;  // cube / interval upper end
  Vector location;    // PointMass atom (defaults to the origin)
  Vector offset;      // added to every sample when non-empty
};

struct DatasetSpec {
  DatasetKind kind = DatasetKind::PointMass;
  Side side = Side::Source;
  int ambient_dim = 1;
  int manifold_dim = 1;
  DatasetParams params;

  void validate() const;
};

enum class NoiseKind { GaussianIsotropic, CompactUniformBall };

struct NoiseModel {
  NoiseKind kind = NoiseKind::GaussianIsotropic;
  int dim = 1;

  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& s);
std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);

// Draws n i.i.d. points from the spec using the supplied generator.
Matrix sample_points(const DatasetSpec& spec, Index n, Rng& rng);

// n i.i.d. samples with uniform weights; bitwise reproducible for a fixed seed.
EmpiricalMeasure sample(const DatasetSpec& spec, Index n, std::uint64_t seed);

Matrix draw_noise(const NoiseModel& noise, Index n, Rng& rng);

// Points X_i + eps * Y_i with Y_i drawn from the noise model; weights are copied.
EmpiricalMeasure smooth(const EmpiricalMeasure& measure, const NoiseModel& noise, double epsilon,
                        std::uint64_t seed);

// Monte Carlo estimate of E|Y|.
double mean_noise_norm(const NoiseModel& noise, Index n_mc, std::uint64_t seed);

// mean_noise_norm with 1e5 draws and a fixed seed, memoised per noise model.
double cached_mean_noise_norm(const NoiseModel& noise);

void write_measure_csv(std::ostream& os, const EmpiricalMeasure& measure);
void write_measure_csv(const std::filesystem::path& path, const EmpiricalMeasure& measure);
EmpiricalMeasure read_measure_csv(std::istream& is);
EmpiricalMeasure read_measure_csv(const std::filesystem::path& path);

}  // namespace snot
