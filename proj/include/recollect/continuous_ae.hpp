// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "recollect/discrete_vae.hpp"

namespace recollect {

/// Plain (non-variational) autoencoder with an h-unit real-valued
/// bottleneck; the baseline that discrete codes are compared against.
class ContinuousAutoencoder {
 public:
  ContinuousAutoencoder(const ImageShape& input, Architecture arch, std::size_t hidden, std::size_t bottleneck,
                        Rng& init_rng);

  std::size_t bottleneck() const { return bottleneck_; }
  /// 32 bits per stored unit.
  std::size_t code_bits() const { return 32 * bottleneck_; }

  Matrix encode(const Matrix& x) const { return encoder_.apply(x); }
  Matrix decode(const Matrix& z) const { return decoder_.apply(z); }
  Matrix reconstruct(const Matrix& x) const { return decode(encode(x)); }
  double reconstruction_l1(const Matrix& x) const { return mean_l1(reconstruct(x), x); }

  double loss(const Matrix& x, bool with_grad);
  double train_batch(const Matrix& x, double lr);

  ParameterSet parameters();

 private:
  ImageShape input_;
  std::size_t bottleneck_;
  Network encoder_;
  Network decoder_;
};

/// Compression figure used when reporting continuous baselines on 28x28
/// 8-bit images: 49 / h (the 6272-bit image over 128 bits per unit).
double continuous_compression(std::size_t bottleneck, std::size_t input_bits = 6272);

/// Input bits over the k-bit packed code.
double discrete_compression(std::size_t c, std::size_t l, std::size_t input_bits = 6272);

std::vector<double> fit(ContinuousAutoencoder& ae, const Matrix& data, std::size_t epochs, std::size_t batch,
                        double lr, Rng& rng);

}  // namespace recollect
