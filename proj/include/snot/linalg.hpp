#pragma once

#include <Eigen/Dense>

namespace snot {

using Index = Eigen::Index;

// Point clouds and batches: one row per point.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace snot
