#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace gen1s {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ClassId = std::uint32_t;

// Copies `values` into a Vector, rejecting NaN/Inf.
Vector make_vector(std::span<const double> values);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

void require_same_dim(const Vector& a, const Vector& b, const char* where);

}  // namespace gen1s
