#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>

namespace fracstein {

using Real = double;
using Index = Eigen::Index;

using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
inline constexpr Scalar kInfinity = std::numeric_limits<Scalar>::infinity();

// Raised when a computation fails for numerical reasons (non-SPD matrix,
// violated simulation bound) rather than because of bad input.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fracstein
