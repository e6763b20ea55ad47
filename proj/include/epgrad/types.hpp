// Dense type aliases used across the library. Everything is 64-bit float and
// row-major: a batch is (N x d), logits are (N x K), a bias is a 1 x K row.
#pragma once

#include <Eigen/Core>

#include <sstream>
#include <stdexcept>
#include <string>

namespace epgrad {

template <class Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using RowVecT = Eigen::Matrix<Scalar, 1, Eigen::Dynamic, Eigen::RowMajor>;

using Mat = MatT<double>;
using Vec = VecT<double>;
using RowVec = RowVecT<double>;
using Index = Eigen::Index;

using ConstMatRef = Eigen::Ref<const Mat>;

inline std::string shape_str(const ConstMatRef& m) {
  std::ostringstream os;
  os << "(" << m.rows() << "x" << m.cols() << ")";
  return os.str();
}

// Thrown by tape ops on incompatible operand shapes.
class ShapeError : public std::runtime_error {
 public:
  ShapeError(const std::string& op, const std::string& detail)
      : std::runtime_error(op + ": " + detail) {}
};

}  // namespace epgrad
