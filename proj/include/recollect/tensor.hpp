// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense tensors and the raw kernels (matmul, 2-D convolution and its
// transpose, binary cross entropy) the layer stack is built from.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace recollect {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a NaN or Inf shows up where only finite values are legal.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Row-major array of doubles with an explicit shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor from_matrix(const Matrix& m);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// 2-D view: first axis as rows, remaining axes flattened into columns.
  Eigen::Map<Matrix> matrix();
  Eigen::Map<const Matrix> matrix() const;

  bool all_finite() const;
  /// Throws NumericError naming `what` if any element is not finite.
  void require_finite(const char* what) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

double inner(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);

/// Geometry of one convolution: a C x H x W input correlated with F kernels
/// of C x K x K, zero padding on every side, unit stride.
struct ConvGeometry {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t filters = 1;
  std::size_t kernel = 5;
  std::size_t padding = 0;

  std::size_t out_height() const { return height + 2 * padding + 1 - kernel; }
  std::size_t out_width() const { return width + 2 * padding + 1 - kernel; }
  std::size_t in_size() const { return channels * height * width; }
  std::size_t out_size() const { return filters * out_height() * out_width(); }
  std::size_t patch_size() const { return channels * kernel * kernel; }
  void validate() const;
};

/// Unfolds one image into a (C*K*K) x (H'*W') patch matrix.
Matrix im2col(std::span<const double> image, const ConvGeometry& g);
/// Adjoint of im2col; accumulates into `image`.
void col2im(const Matrix& cols, const ConvGeometry& g, std::span<double> image);

/// Cross-correlation of a C x H x W input with F x C x K x K kernels.
/// Output is F x (H + 2p - K + 1) x (W + 2p - K + 1).
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t padding);

/// Transposed convolution: the adjoint of conv2d in its input argument.
/// `input` is F x h x w, kernels F x C x K x K; output C x (h - 2p + K - 1) x ...
Tensor deconv2d(const Tensor& input, const Tensor& kernels, std::size_t padding);

inline constexpr double kProbClamp = 1e-7;

/// Mean over elements of -[t ln p + (1 - t) ln(1 - p)], p clamped to
/// [1e-7, 1 - 1e-7].
double bce_loss(const Tensor& pred, const Tensor& target);
double bce_loss(const Matrix& pred, const Matrix& target);
/// d(bce_loss)/d(pred), treating the clamp as the identity.
Matrix bce_grad(const Matrix& pred, const Matrix& target);
/// Gradient of bce_loss(sigmoid(z), target) with respect to z, given
/// pred = sigmoid(z): (pred - target) / n. Stays informative when the
/// sigmoid saturates past the clamp, where chaining bce_grad through it
/// underflows.
Matrix bce_logit_grad(const Matrix& pred, const Matrix& target);

}  // namespace recollect
