#pragma once

#include <Eigen/Dense>

namespace simplex_uq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace simplex_uq
