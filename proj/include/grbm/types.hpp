#pragma once

#include <Eigen/Dense>

namespace grbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace grbm
