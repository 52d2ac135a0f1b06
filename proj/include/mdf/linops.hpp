#pragma once

// Linear operators of the block-averaging measurement model.
//
//   A   : block_sum        HR (h x w)     -> LR (h/L x w/L), sum over each L x L block
//   A^T : block_replicate  LR (h x w)     -> HR (hL x wL),   copy each pixel into its block
//   Psi : block_average    = A / L^2
//   B   : bicubic_upsample LR -> HR, separable cubic convolution
//
// A A^T = L^2 I holds exactly; the solver and the theory checks rely on it.

#include "mdf/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace mdf {

inline void check_factor(int factor) {
  if (factor < 1) throw ShapeError("scale factor must be >= 1, got " + std::to_string(factor));
}

inline void check_divisible(Shape hr, int factor) {
  check_factor(factor);
  if (hr.height % factor != 0 || hr.width % factor != 0) {
    throw ShapeError("HR shape " + to_string(hr) + " not divisible by L=" + std::to_string(factor));
  }
}

template <typename Scalar>
ImageT<Scalar> block_sum(const ImageT<Scalar>& x, int factor) {
  check_divisible(shape_of(x), factor);
  const Eigen::Index h = x.rows() / factor;
  const Eigen::Index w = x.cols() / factor;
  ImageT<Scalar> out = ImageT<Scalar>::Zero(h, w);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::Index oi = i / factor;
    for (Eigen::Index j = 0; j < x.cols(); ++j) out(oi, j / factor) += x(i, j);
  }
  return out;
}

template <typename Scalar>
ImageT<Scalar> block_replicate(const ImageT<Scalar>& z, int factor) {
  check_factor(factor);
  ImageT<Scalar> out(z.rows() * factor, z.cols() * factor);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = z(i / factor, j / factor);
  return out;
}

template <typename Scalar>
ImageT<Scalar> block_average(const ImageT<Scalar>& x, int factor) {
  ImageT<Scalar> out = block_sum(x, factor);
  out /= Scalar(factor) * Scalar(factor);
  return out;
}

// A, A^T and Psi bound to a fixed HR grid.
class BlockOperator {
 public:
  BlockOperator(int factor, Shape hr_shape) : factor_(factor), hr_(hr_shape) {
    check_divisible(hr_shape, factor);
  }

  int factor() const { return factor_; }
  Shape hr_shape() const { return hr_; }
  Shape lr_shape() const { return {hr_.height / factor_, hr_.width / factor_}; }

  template <typename Scalar>
  ImageT<Scalar> sum(const ImageT<Scalar>& x) const {
    require(shape_of(x), hr_, "block sum input");
    return block_sum(x, factor_);
  }
  template <typename Scalar>
  ImageT<Scalar> replicate(const ImageT<Scalar>& z) const {
    require(shape_of(z), lr_shape(), "block replicate input");
    return block_replicate(z, factor_);
  }
  template <typename Scalar>
  ImageT<Scalar> average(const ImageT<Scalar>& x) const {
    require(shape_of(x), hr_, "block average input");
    return block_average(x, factor_);
  }

 private:
  static void require(Shape got, Shape want, const char* what) {
    if (got != want) throw ShapeError(std::string(what) + ": expected " + to_string(want) + ", got " + to_string(got));
  }

  int factor_;
  Shape hr_;
};

// Backprojector that is exactly A^T; lets the RAP update degenerate to the standard one.
struct BlockReplicator {
  int factor = 1;

  template <typename Scalar>
  ImageT<Scalar> apply(const ImageT<Scalar>& z) const {
    return block_replicate(z, factor);
  }
};

// Keys cubic convolution kernel; a = -0.5 is Catmull-Rom.
template <typename Scalar>
Scalar cubic_kernel(Scalar t, Scalar a) {
  t = std::abs(t);
  if (t <= Scalar(1)) return ((a + 2) * t - (a + 3)) * t * t + 1;
  if (t < Scalar(2)) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
  return Scalar(0);
}

class BicubicUpsampler {
 public:
  explicit BicubicUpsampler(int factor, double a = -0.5) : factor_(factor), a_(a) { check_factor(factor); }

  int factor() const { return factor_; }
  double kernel_parameter() const { return a_; }

  // Four taps per output sample. LR pixel k has its centre at HR coordinate (k + 0.5) L - 0.5,
  // the centre of the block it averages. Out-of-range taps are clamped (edge replication).
  struct Taps {
    std::array<Eigen::Index, 4> index;
    std::array<double, 4> weight;
  };

  std::vector<Taps> axis_taps(Eigen::Index lr_len) const {
    std::vector<Taps> taps(static_cast<std::size_t>(lr_len * factor_));
    for (Eigen::Index i = 0; i < lr_len * factor_; ++i) {
      const double t = (static_cast<double>(i) + 0.5) / factor_ - 0.5;
      const double base = std::floor(t);
      const double frac = t - base;
      auto& tp = taps[static_cast<std::size_t>(i)];
      double total = 0.0;
      for (int k = 0; k < 4; ++k) {
        const auto src = static_cast<Eigen::Index>(base) - 1 + k;
        tp.index[k] = std::clamp<Eigen::Index>(src, 0, lr_len - 1);
        tp.weight[k] = cubic_kernel(frac - (k - 1), a_);
        total += tp.weight[k];
      }
      // the kernel sums to one analytically; remove the last ulp of drift
      for (auto& wk : tp.weight) wk /= total;
    }
    return taps;
  }

  template <typename Scalar>
  ImageT<Scalar> apply(const ImageT<Scalar>& z) const {
    const auto row_taps = axis_taps(z.rows());
    const auto col_taps = axis_taps(z.cols());
    ImageT<Scalar> wide(z.rows(), z.cols() * factor_);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < wide.cols(); ++j) {
        const auto& tp = col_taps[static_cast<std::size_t>(j)];
        Scalar acc(0);
        for (int k = 0; k < 4; ++k) acc += Scalar(tp.weight[k]) * z(i, tp.index[k]);
        wide(i, j) = acc;
      }
    }
    ImageT<Scalar> out(z.rows() * factor_, wide.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const auto& tp = row_taps[static_cast<std::size_t>(i)];
      out.row(i) = Scalar(tp.weight[0]) * wide.row(tp.index[0]) + Scalar(tp.weight[1]) * wide.row(tp.index[1]) +
                   Scalar(tp.weight[2]) * wide.row(tp.index[2]) + Scalar(tp.weight[3]) * wide.row(tp.index[3]);
    }
    return out;
  }

 private:
  int factor_;
  double a_;
};

template <typename Scalar>
ImageT<Scalar> bicubic_upsample(const ImageT<Scalar>& z, int factor, double a = -0.5) {
  return BicubicUpsampler(factor, a).apply(z);
}

inline constexpr Eigen::Index kMaterializeMaxSide = 64;

// Dense matrix of a linear image operator: column j is op(e_j) flattened row-major.
// Both the input and output grids must fit in 64 x 64.
template <typename Scalar = double, typename Op>
MatrixT<Scalar> materialize(Op&& op, Shape in_shape) {
  auto fits = [](Shape s) { return s.height <= kMaterializeMaxSide && s.width <= kMaterializeMaxSide; };
  if (!fits(in_shape)) throw RefusalError("materialize: input shape " + to_string(in_shape) + " exceeds 64x64 guard");
  if (in_shape.size() == 0) throw ShapeError("materialize: empty input shape");
  MatrixT<Scalar> dense;
  ImageT<Scalar> basis = ImageT<Scalar>::Zero(in_shape.height, in_shape.width);
  for (Eigen::Index j = 0; j < in_shape.size(); ++j) {
    basis.data()[j] = Scalar(1);
    const ImageT<Scalar> col = op(basis);
    basis.data()[j] = Scalar(0);
    if (j == 0) {
      if (!fits(shape_of(col)))
        throw RefusalError("materialize: output shape " + to_string(shape_of(col)) + " exceeds 64x64 guard");
      dense.resize(col.size(), in_shape.size());
    }
    dense.col(j) = as_vector(col);
  }
  return dense;
}

}  // namespace mdf
