#pragma once

#include <Eigen/Dense>

namespace uqgfn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace uqgfn
