// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace recollect {

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_channels = in;
  s.out_channels = out;
  return s;
}

LayerSpec LayerSpec::conv(std::size_t c, std::size_t h, std::size_t w, std::size_t filters, std::size_t padding,
                          std::size_t kernel) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.in_channels = c;
  s.in_height = h;
  s.in_width = w;
  s.out_channels = filters;
  s.padding = padding;
  s.kernel = kernel;
  return s;
}

LayerSpec LayerSpec::deconv(std::size_t c, std::size_t h, std::size_t w, std::size_t out_channels,
                            std::size_t padding, std::size_t kernel) {
  LayerSpec s = conv(c, h, w, out_channels, padding, kernel);
  s.kind = LayerKind::deconv2d;
  return s;
}

LayerSpec LayerSpec::act(ActivationKind kind, std::size_t features, std::size_t group) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = kind;
  s.in_channels = features;
  s.out_channels = features;
  s.group = group;
  return s;
}

std::size_t LayerSpec::in_features() const {
  switch (kind) {
    case LayerKind::dense:
    case LayerKind::activation:
      return in_channels;
    default:
      return in_channels * in_height * in_width;
  }
}

std::size_t LayerSpec::out_features() const {
  switch (kind) {
    case LayerKind::dense:
    case LayerKind::activation:
      return out_channels;
    case LayerKind::conv2d:
      return out_channels * (in_height + 2 * padding + 1 - kernel) * (in_width + 2 * padding + 1 - kernel);
    case LayerKind::deconv2d:
      return out_channels * (in_height + kernel - 1 - 2 * padding) * (in_width + kernel - 1 - 2 * padding);
  }
  return 0;
}

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

void check_width(const Matrix& in, std::size_t expected, const char* who) {
  if (static_cast<std::size_t>(in.cols()) != expected) {
    throw ShapeError(std::string(who) + ": expected " + std::to_string(expected) + " features, got " +
                     std::to_string(in.cols()));
  }
}

class Dense final : public Layer {
 public:
  Dense(const LayerSpec& s, Rng& rng)
      : spec_(s),
        weight_("weight", glorot(s.in_channels, s.out_channels, double(s.in_channels), double(s.out_channels), rng)),
        bias_("bias", Matrix::Zero(1, static_cast<Eigen::Index>(s.out_channels))) {}

  Matrix apply(const Matrix& in) const override {
    check_width(in, spec_.in_channels, "dense");
    Matrix out = in * weight_.value;
    out.rowwise() += bias_.value.row(0);
    return out;
  }
  Matrix forward(const Matrix& in) override {
    input_ = in;
    return apply(in);
  }
  Matrix backward(const Matrix& g) override {
    weight_.grad.noalias() += input_.transpose() * g;
    bias_.grad.row(0) += g.colwise().sum();
    return g * weight_.value.transpose();
  }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  const LayerSpec& spec() const override { return spec_; }

 private:
  LayerSpec spec_;
  Parameter weight_;
  Parameter bias_;
  Matrix input_;
};

/// Shared by conv and deconv. `geom` is always the forward-convolution
/// geometry, so a deconv layer's output volume is geom's input volume.
class ConvBase : public Layer {
 protected:
  ConvBase(const LayerSpec& s, ConvGeometry g, std::size_t bias_width, Rng& rng)
      : spec_(s),
        geom_(g),
        kernel_("kernel", glorot(g.filters, g.patch_size(), double(g.patch_size()),
                                 double(g.filters * g.kernel * g.kernel), rng)),
        bias_("bias", Matrix::Zero(1, static_cast<Eigen::Index>(bias_width))) {
    geom_.validate();
  }

 public:
  std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }
  const LayerSpec& spec() const override { return spec_; }
  Matrix forward(const Matrix& in) override {
    input_ = in;
    return apply(in);
  }

 protected:
  LayerSpec spec_;
  ConvGeometry geom_;
  Parameter kernel_;  // filters x (channels * k * k)
  Parameter bias_;
  Matrix input_;
};

class Conv2d final : public ConvBase {
 public:
  Conv2d(const LayerSpec& s, Rng& rng)
      : ConvBase(s, ConvGeometry{s.in_channels, s.in_height, s.in_width, s.out_channels, s.kernel, s.padding},
                 s.out_channels, rng) {}

  Matrix apply(const Matrix& in) const override {
    check_width(in, geom_.in_size(), "conv2d");
    const auto plane = static_cast<Eigen::Index>(geom_.out_height() * geom_.out_width());
    Matrix out(in.rows(), static_cast<Eigen::Index>(geom_.out_size()));
    for (Eigen::Index b = 0; b < in.rows(); ++b) {
      Eigen::Map<Matrix> o(out.row(b).data(), static_cast<Eigen::Index>(geom_.filters), plane);
      o.noalias() = kernel_.value * im2col({in.row(b).data(), geom_.in_size()}, geom_);
      o.colwise() += bias_.value.row(0).transpose();
    }
    return out;
  }
  Matrix backward(const Matrix& g) override {
    const auto plane = static_cast<Eigen::Index>(geom_.out_height() * geom_.out_width());
    Matrix grad_in = Matrix::Zero(g.rows(), static_cast<Eigen::Index>(geom_.in_size()));
    for (Eigen::Index b = 0; b < g.rows(); ++b) {
      Eigen::Map<const Matrix> go(g.row(b).data(), static_cast<Eigen::Index>(geom_.filters), plane);
      const Matrix cols = im2col({input_.row(b).data(), geom_.in_size()}, geom_);
      kernel_.grad.noalias() += go * cols.transpose();
      bias_.grad.row(0) += go.rowwise().sum().transpose();
      col2im(kernel_.value.transpose() * go, geom_, {grad_in.row(b).data(), geom_.in_size()});
    }
    return grad_in;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
};

ConvGeometry deconv_geometry(const LayerSpec& s) {
  if (s.in_height + s.kernel - 1 <= 2 * s.padding || s.in_width + s.kernel - 1 <= 2 * s.padding) {
    throw ShapeError("deconv2d: padding too large for input");
  }
  return ConvGeometry{s.out_channels, s.in_height + s.kernel - 1 - 2 * s.padding,
                      s.in_width + s.kernel - 1 - 2 * s.padding, s.in_channels, s.kernel, s.padding};
}

class Deconv2d final : public ConvBase {
 public:
  Deconv2d(const LayerSpec& s, Rng& rng) : ConvBase(s, deconv_geometry(s), s.out_channels, rng) {}

  Matrix apply(const Matrix& in) const override {
    check_width(in, geom_.out_size(), "deconv2d");
    const auto plane = static_cast<Eigen::Index>(geom_.out_height() * geom_.out_width());
    const auto out_plane = static_cast<Eigen::Index>(geom_.height * geom_.width);
    Matrix out = Matrix::Zero(in.rows(), static_cast<Eigen::Index>(geom_.in_size()));
    for (Eigen::Index b = 0; b < in.rows(); ++b) {
      Eigen::Map<const Matrix> x(in.row(b).data(), static_cast<Eigen::Index>(geom_.filters), plane);
      col2im(kernel_.value.transpose() * x, geom_, {out.row(b).data(), geom_.in_size()});
      Eigen::Map<Matrix> o(out.row(b).data(), static_cast<Eigen::Index>(geom_.channels), out_plane);
      o.colwise() += bias_.value.row(0).transpose();
    }
    return out;
  }
  Matrix backward(const Matrix& g) override {
    const auto plane = static_cast<Eigen::Index>(geom_.out_height() * geom_.out_width());
    const auto out_plane = static_cast<Eigen::Index>(geom_.height * geom_.width);
    Matrix grad_in(g.rows(), static_cast<Eigen::Index>(geom_.out_size()));
    for (Eigen::Index b = 0; b < g.rows(); ++b) {
      const Matrix cols = im2col({g.row(b).data(), geom_.in_size()}, geom_);
      Eigen::Map<const Matrix> x(input_.row(b).data(), static_cast<Eigen::Index>(geom_.filters), plane);
      kernel_.grad.noalias() += x * cols.transpose();
      Eigen::Map<const Matrix> go(g.row(b).data(), static_cast<Eigen::Index>(geom_.channels), out_plane);
      bias_.grad.row(0) += go.rowwise().sum().transpose();
      Eigen::Map<Matrix> gi(grad_in.row(b).data(), static_cast<Eigen::Index>(geom_.filters), plane);
      gi.noalias() = kernel_.value * cols;
    }
    return grad_in;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Deconv2d>(*this); }
};

class Activation final : public Layer {
 public:
  explicit Activation(const LayerSpec& s) : spec_(s) {
    if (s.activation == ActivationKind::softmax_group && (s.group == 0 || s.in_channels % s.group != 0)) {
      throw ShapeError("softmax group width must divide the feature count");
    }
  }

  Matrix apply(const Matrix& in) const override {
    check_width(in, spec_.in_channels, "activation");
    switch (spec_.activation) {
      case ActivationKind::relu:
        return in.cwiseMax(0.0);
      case ActivationKind::sigmoid:
        return in.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      case ActivationKind::softmax_group:
        return softmax_groups(in, spec_.group);
      case ActivationKind::identity:
        break;
    }
    return in;
  }
  Matrix forward(const Matrix& in) override {
    if (spec_.activation == ActivationKind::relu) input_ = in;
    output_ = apply(in);
    return output_;
  }
  Matrix backward(const Matrix& g) override {
    switch (spec_.activation) {
      case ActivationKind::relu:
        return g.cwiseProduct((input_.array() > 0.0).cast<double>().matrix());
      case ActivationKind::sigmoid:
        return g.cwiseProduct(output_.cwiseProduct((1.0 - output_.array()).matrix()));
      case ActivationKind::softmax_group: {
        Matrix out(g.rows(), g.cols());
        const auto w = static_cast<Eigen::Index>(spec_.group);
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          for (Eigen::Index s = 0; s < g.cols(); s += w) {
            auto y = output_.row(r).segment(s, w);
            auto dy = g.row(r).segment(s, w);
            const double dot = y.dot(dy);
            out.row(r).segment(s, w) = y.cwiseProduct((dy.array() - dot).matrix());
          }
        }
        return out;
      }
      case ActivationKind::identity:
        break;
    }
    return g;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Activation>(*this); }
  const LayerSpec& spec() const override { return spec_; }

  static Matrix softmax_groups(const Matrix& in, std::size_t group) {
    Matrix out(in.rows(), in.cols());
    const auto w = static_cast<Eigen::Index>(group);
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      for (Eigen::Index s = 0; s < in.cols(); s += w) {
        auto x = in.row(r).segment(s, w);
        const double m = x.maxCoeff();
        auto e = (x.array() - m).exp();
        out.row(r).segment(s, w) = (e / e.sum()).matrix();
      }
    }
    return out;
  }

 private:
  LayerSpec spec_;
  Matrix input_;
  Matrix output_;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case LayerKind::dense:
      return std::make_unique<Dense>(spec, rng);
    case LayerKind::conv2d:
      return std::make_unique<Conv2d>(spec, rng);
    case LayerKind::deconv2d:
      return std::make_unique<Deconv2d>(spec, rng);
    case LayerKind::activation:
      return std::make_unique<Activation>(spec);
  }
  throw std::invalid_argument("unknown layer kind");
}

Network::Network(const std::vector<LayerSpec>& specs, Rng& rng) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i > 0 && specs[i - 1].out_features() != specs[i].in_features()) {
      throw ShapeError("layer " + std::to_string(i) + " expects " + std::to_string(specs[i].in_features()) +
                       " inputs but layer " + std::to_string(i - 1) + " produces " +
                       std::to_string(specs[i - 1].out_features()));
    }
    layers_.push_back(make_layer(specs[i], rng));
  }
}

Network::Network(const Network& other) : pending_backward_(false) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Matrix Network::forward(const Matrix& in) {
  Matrix x = in;
  for (auto& l : layers_) x = l->forward(x);
  pending_backward_ = true;
  return x;
}

Matrix Network::apply(const Matrix& in) const {
  Matrix x = in;
  for (const auto& l : layers_) x = l->apply(x);
  return x;
}

Matrix Network::backward(const Matrix& grad_out) {
  if (!pending_backward_) throw std::logic_error("backward called without a preceding forward pass");
  pending_backward_ = false;
  Matrix g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

Matrix Network::backward_from_logits(const Matrix& grad_logits) {
  if (!pending_backward_) throw std::logic_error("backward called without a preceding forward pass");
  if (layers_.empty() || layers_.back()->spec().kind != LayerKind::activation ||
      layers_.back()->spec().activation != ActivationKind::sigmoid) {
    throw std::logic_error("backward_from_logits needs a network ending in a sigmoid");
  }
  pending_backward_ = false;
  Matrix g = grad_logits;
  for (auto it = std::next(layers_.rbegin()); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

ParameterSet Network::parameters() {
  ParameterSet set;
  for (auto& l : layers_) {
    for (auto* p : l->parameters()) set.add(*p);
  }
  return set;
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

std::size_t Network::in_features() const { return layers_.empty() ? 0 : layers_.front()->spec().in_features(); }
std::size_t Network::out_features() const { return layers_.empty() ? 0 : layers_.back()->spec().out_features(); }

}  // namespace recollect
