#pragma once

#include <Eigen/Dense>

namespace aspire {

/// Column-major dense design matrix; rows are samples.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace aspire
