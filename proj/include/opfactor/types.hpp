#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace opfactor {

using Scalar = double;
using Index = Eigen::Index;

using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using SparseMatrix = Eigen::SparseMatrix<Scalar>;
using Triplet = Eigen::Triplet<Scalar>;

/// Error with a human-readable diagnostic. All library failures derive from this.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when recovery hits a nonpositive pivot or a non-SPD diagonal block.
/// Signals an under-resolved separation parameter or a non-SPD oracle.
class SpdViolation : public Error {
 public:
  SpdViolation(const std::string& what, int color, long index, double value)
      : Error(what), color(color), index(index), value(value) {}
  int color;
  long index;
  double value;
};

}  // namespace opfactor
