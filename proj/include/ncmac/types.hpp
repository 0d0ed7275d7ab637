#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace ncmac {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

// [k][n]: n-th point of user k
using PointSet = std::vector<std::vector<CMatrix>>;

}  // namespace ncmac
