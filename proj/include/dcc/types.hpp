#ifndef DCC_TYPES_HPP
#define DCC_TYPES_HPP

#include <Eigen/Dense>

namespace dcc {

// Row-major to match the on-disk row-major layout and per-row sample access.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace dcc

#endif  // DCC_TYPES_HPP
