#pragma once

// Core image type and error hierarchy shared by every module.

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mdf {

// Row-major so that .data() matches the raster order used on disk and on the wire.
template <typename Scalar>
using ImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image = ImageT<double>;

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;

struct Shape {
  Eigen::Index height = 0;
  Eigen::Index width = 0;

  Eigen::Index size() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

template <typename Derived>
Shape shape_of(const Eigen::DenseBase<Derived>& img) {
  return {img.rows(), img.cols()};
}

std::string to_string(Shape s);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimensions incompatible with an operator (non-divisible, mismatched pair).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition or theorem hypothesis does not hold; the operation declines to run.
class RefusalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values appeared during an iterative solve.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.derived().array().isFinite().all();
}

// Flattened, row-major view of an image as a column vector.
template <typename Scalar>
Eigen::Map<const VectorT<Scalar>> as_vector(const ImageT<Scalar>& img) {
  return {img.data(), img.size()};
}

template <typename Scalar>
ImageT<Scalar> from_vector(const VectorT<Scalar>& v, Shape s) {
  if (v.size() != s.size()) throw ShapeError("vector length does not match image shape " + to_string(s));
  ImageT<Scalar> out(s.height, s.width);
  Eigen::Map<VectorT<Scalar>>(out.data(), out.size()) = v;
  return out;
}

}  // namespace mdf
