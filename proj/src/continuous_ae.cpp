// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/continuous_ae.hpp"

#include <cmath>
#include <numeric>

namespace recollect {

ContinuousAutoencoder::ContinuousAutoencoder(const ImageShape& input, Architecture arch, std::size_t hidden,
                                             std::size_t bottleneck, Rng& init_rng)
    : input_(input), bottleneck_(bottleneck) {
  if (bottleneck < 1) throw std::invalid_argument("continuous autoencoder: bottleneck must be >= 1");
  if (hidden < 1) throw std::invalid_argument("continuous autoencoder: hidden width must be >= 1");
  encoder_ = Network(encoder_specs(input, arch, hidden, bottleneck, 0), init_rng);
  decoder_ = Network(decoder_specs(input, arch, hidden, bottleneck, 0), init_rng);
}

double ContinuousAutoencoder::loss(const Matrix& x, bool with_grad) {
  if (!with_grad) return bce_loss(reconstruct(x), x);
  const Matrix recon = decoder_.forward(encoder_.forward(x));
  const double value = bce_loss(recon, x);
  if (!std::isfinite(value)) throw NumericError("autoencoder loss is not finite");
  parameters().zero_grad();
  encoder_.backward(decoder_.backward_from_logits(bce_logit_grad(recon, x)));
  return value;
}

double ContinuousAutoencoder::train_batch(const Matrix& x, double lr) {
  const double value = loss(x, true);
  ParameterSet params = parameters();
  sgd_step(params, lr);
  return value;
}

ParameterSet ContinuousAutoencoder::parameters() {
  ParameterSet set = encoder_.parameters();
  set.append(decoder_.parameters());
  return set;
}

double continuous_compression(std::size_t bottleneck, std::size_t input_bits) {
  if (bottleneck == 0) throw std::invalid_argument("continuous_compression: bottleneck must be >= 1");
  return static_cast<double>(input_bits) / (128.0 * static_cast<double>(bottleneck));
}

double discrete_compression(std::size_t c, std::size_t l, std::size_t input_bits) {
  return static_cast<double>(input_bits) / static_cast<double>(c * bits_per_variable(l));
}

std::vector<double> fit(ContinuousAutoencoder& ae, const Matrix& data, std::size_t epochs, std::size_t batch,
                        double lr, Rng& rng) {
  if (batch == 0) throw std::invalid_argument("fit: batch must be positive");
  std::vector<std::size_t> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      Matrix x(static_cast<Eigen::Index>(n), data.cols());
      for (std::size_t r = 0; r < n; ++r) x.row(static_cast<Eigen::Index>(r)) = data.row(static_cast<Eigen::Index>(order[start + r]));
      total += ae.train_batch(x, lr);
      ++steps;
    }
    history.push_back(steps ? total / static_cast<double>(steps) : 0.0);
  }
  return history;
}

}  // namespace recollect
