// SPDX-License-Identifier: MIT

/// @file
/// Common linear-algebra aliases and error helpers.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>

namespace fasflow
{

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

inline void require(bool condition, const std::string& message)
{
    if (!condition) { throw std::invalid_argument(message); }
}

[[noreturn]] inline void fail(const std::string& message)
{
    throw std::runtime_error(message);
}

inline double clamp01(double v)
{
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

} // namespace fasflow
