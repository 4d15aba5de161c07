#pragma once

#include <Eigen/Dense>

namespace dpgnn {

// Node-feature matrices are row-major: one row per graph node.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

}  // namespace dpgnn
