// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Layer stack with layer-wise reverse-mode differentiation. Every layer maps
// a batch (one example per row, features flattened C x H x W) to a batch.
// forward() records what backward() needs; apply() is the read-only path.

#pragma once

#include "recollect/params.hpp"
#include "recollect/rng.hpp"
#include "recollect/tensor.hpp"

#include <memory>
#include <vector>

namespace recollect {

enum class LayerKind { dense, conv2d, deconv2d, activation };
enum class ActivationKind { relu, sigmoid, softmax_group, identity };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  // dense: in_channels = input features. conv/deconv: input volume.
  std::size_t in_channels = 0;
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  // dense: output features. conv: filters. deconv: output channels.
  std::size_t out_channels = 0;
  std::size_t kernel = 5;
  std::size_t padding = 0;
  ActivationKind activation = ActivationKind::identity;
  std::size_t group = 0;  // softmax group width

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv(std::size_t c, std::size_t h, std::size_t w, std::size_t filters, std::size_t padding,
                        std::size_t kernel = 5);
  static LayerSpec deconv(std::size_t c, std::size_t h, std::size_t w, std::size_t out_channels,
                          std::size_t padding, std::size_t kernel = 5);
  static LayerSpec act(ActivationKind kind, std::size_t features, std::size_t group = 0);

  std::size_t in_features() const;
  std::size_t out_features() const;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Matrix forward(const Matrix& in) = 0;
  virtual Matrix apply(const Matrix& in) const = 0;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  virtual Matrix backward(const Matrix& grad_out) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual const LayerSpec& spec() const = 0;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, Rng& rng);

/// Ordered chain of layers. Weights are Glorot-uniform, biases zero.
class Network {
 public:
  Network() = default;
  Network(const std::vector<LayerSpec>& specs, Rng& rng);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Matrix forward(const Matrix& in);
  Matrix apply(const Matrix& in) const;
  /// Rejects a second call without an intervening forward().
  Matrix backward(const Matrix& grad_out);
  /// Backward pass that starts below a final sigmoid, from the gradient
  /// with respect to its input.
  Matrix backward_from_logits(const Matrix& grad_logits);

  ParameterSet parameters();
  std::vector<LayerSpec> specs() const;
  std::size_t in_features() const;
  std::size_t out_features() const;
  bool empty() const { return layers_.empty(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  bool pending_backward_ = false;
};

}  // namespace recollect
