#pragma once

#include <Eigen/Dense>
#include <complex>

namespace qresp {

using Complex = std::complex<double>;

/// Dense complex operator on a Hilbert space (always square).
using Operator = Eigen::MatrixXcd;

/// Density matrix; same storage as Operator, Hermitian and unit trace
/// when it represents a physical state.
using DensityMatrix = Eigen::MatrixXcd;

/// Vectorized density matrix, row-major pairing: component (i,j) of rho
/// sits at slot i*dim + j.
using VectorizedState = Eigen::VectorXcd;

/// Linear map on vectorized density matrices (dim^2 x dim^2).
using SuperOperator = Eigen::MatrixXcd;

using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

}  // namespace qresp
