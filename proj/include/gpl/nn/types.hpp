#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gpl::nn {

// Activations and weights are row-major so that a batch row is contiguous and
// the flat layout of a parameter matches its serialized order.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Thrown when operand shapes disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(Index rows, Index cols) {
  std::ostringstream os;
  os << '[' << rows << " x " << cols << ']';
  return os.str();
}

template <typename Derived>
std::string shape_str(const Eigen::EigenBase<Derived>& m) {
  return shape_str(m.rows(), m.cols());
}

}  // namespace gpl::nn
