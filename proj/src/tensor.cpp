// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace recollect {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::pair<std::size_t, std::size_t> matrix_dims(const Shape& shape) {
  if (shape.empty()) return {1, 1};
  std::size_t cols = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) cols *= shape[i];
  return {shape[0], cols};
}

}  // namespace

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::from_matrix(const Matrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.matrix() = m;
  return t;
}

Eigen::Map<Matrix> Tensor::matrix() {
  auto [r, c] = matrix_dims(shape_);
  return {data_.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

Eigen::Map<const Matrix> Tensor::matrix() const {
  auto [r, c] = matrix_dims(shape_);
  return {data_.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(const char* what) const {
  if (!all_finite()) throw NumericError(std::string("non-finite value in ") + what);
}

double inner(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("inner: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                     shape_string(b.shape()));
  }
  Tensor out({a.dim(0), b.dim(1)});
  out.matrix().noalias() = a.matrix() * b.matrix();
  return out;
}

void ConvGeometry::validate() const {
  if (channels == 0 || height == 0 || width == 0 || filters == 0 || kernel == 0) {
    throw ShapeError("convolution: zero-sized dimension");
  }
  if (height + 2 * padding < kernel || width + 2 * padding < kernel) {
    throw ShapeError("convolution: kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(height + 2 * padding) + "x" + std::to_string(width + 2 * padding));
  }
}

Matrix im2col(std::span<const double> image, const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(g.patch_size()), static_cast<Eigen::Index>(oh * ow));
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = image.data() + c * g.height * g.width;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        double* row = cols.row(static_cast<Eigen::Index>((c * k + ki) * k + kj)).data();
        for (std::size_t y = 0; y < oh; ++y) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ki) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t x = 0; x < ow; ++x) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kj) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            row[y * ow + x] = plane[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const Matrix& cols, const ConvGeometry& g, std::span<double> image) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = image.data() + c * g.height * g.width;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const double* row = cols.row(static_cast<Eigen::Index>((c * k + ki) * k + kj)).data();
        for (std::size_t y = 0; y < oh; ++y) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ki) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t x = 0; x < ow; ++x) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kj) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            plane[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)] += row[y * ow + x];
          }
        }
      }
    }
  }
}

namespace {

void check_kernel_rank(const Tensor& kernels) {
  if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3)) {
    throw ShapeError("convolution: kernels must be F x C x K x K, got " + shape_string(kernels.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t padding) {
  check_kernel_rank(kernels);
  if (input.rank() != 3) throw ShapeError("conv2d: input must be C x H x W, got " + shape_string(input.shape()));
  if (kernels.dim(1) != input.dim(0)) {
    throw ShapeError("conv2d: kernel channels " + std::to_string(kernels.dim(1)) + " != input channels " +
                     std::to_string(input.dim(0)));
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), kernels.dim(0), kernels.dim(2), padding};
  g.validate();
  Eigen::Map<const Matrix> kmat(kernels.data().data(), static_cast<Eigen::Index>(g.filters),
                                static_cast<Eigen::Index>(g.patch_size()));
  Tensor out({g.filters, g.out_height(), g.out_width()});
  out.matrix().noalias() = kmat * im2col(input.data(), g);
  return out;
}

Tensor deconv2d(const Tensor& input, const Tensor& kernels, std::size_t padding) {
  check_kernel_rank(kernels);
  if (input.rank() != 3) throw ShapeError("deconv2d: input must be F x h x w, got " + shape_string(input.shape()));
  if (kernels.dim(0) != input.dim(0)) {
    throw ShapeError("deconv2d: kernel filters " + std::to_string(kernels.dim(0)) + " != input channels " +
                     std::to_string(input.dim(0)));
  }
  const std::size_t k = kernels.dim(2);
  if (input.dim(1) + k - 1 <= 2 * padding || input.dim(2) + k - 1 <= 2 * padding) {
    throw ShapeError("deconv2d: padding " + std::to_string(padding) + " too large for input " +
                     shape_string(input.shape()));
  }
  ConvGeometry g{kernels.dim(1), input.dim(1) + k - 1 - 2 * padding, input.dim(2) + k - 1 - 2 * padding,
                 kernels.dim(0), k, padding};
  g.validate();
  Eigen::Map<const Matrix> kmat(kernels.data().data(), static_cast<Eigen::Index>(g.filters),
                                static_cast<Eigen::Index>(g.patch_size()));
  Tensor out({g.channels, g.height, g.width});
  const Matrix cols = kmat.transpose() * input.matrix();
  col2im(cols, g, out.data());
  return out;
}

double bce_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("bce_loss: prediction " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                     " vs target " + std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  }
  double total = 0.0;
  const double* p = pred.data();
  const double* t = target.data();
  const Eigen::Index n = pred.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    total -= t[i] * std::log(q) + (1.0 - t[i]) * std::log1p(-q);
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

double bce_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("bce_loss: " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  }
  return bce_loss(pred.matrix(), target.matrix());
}

Matrix bce_grad(const Matrix& pred, const Matrix& target) {
  Matrix g(pred.rows(), pred.cols());
  const double scale = 1.0 / static_cast<double>(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double q = std::clamp(pred.data()[i], kProbClamp, 1.0 - kProbClamp);
    g.data()[i] = scale * (q - target.data()[i]) / (q * (1.0 - q));
  }
  return g;
}

Matrix bce_logit_grad(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("bce_logit_grad: shape mismatch");
  return (pred - target) / static_cast<double>(pred.size());
}

}  // namespace recollect
