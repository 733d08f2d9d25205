// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Categorical-latent autoencoder. The encoder emits c groups of l logits;
// storage draws one Gumbel-max sample per group and packs the c indices into
// k = c * ceil(log2 l) bits. Training runs the hard sample forward and routes
// the gradient through the Gumbel-softmax relaxation computed with the same
// noise (straight-through).

#pragma once

#include "recollect/layers.hpp"
#include "recollect/rng.hpp"
#include "recollect/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace recollect {

class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Architecture : std::uint32_t { conv = 0, mlp = 1 };

struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t size() const { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

struct VaeConfig {
  std::size_t c = 38;
  std::size_t l = 2;
  double tau = 1.0;
  ImageShape input;
  Architecture arch = Architecture::conv;
  /// conv: filters per layer; mlp: units per hidden layer. 0 picks the
  /// default, ceil(c*l/4) filters or c*l units.
  std::size_t hidden = 0;
  std::size_t conv_padding = 0;
  /// Weight of KL(q || uniform) added to the reconstruction loss.
  double kl_weight = 0.0;
  /// Store argmax codes instead of one Gumbel-max draw.
  bool deterministic_storage = false;

  void validate() const;
  std::size_t hidden_width() const;
  std::size_t latent_width() const { return c * l; }
  std::size_t code_bits() const;
};

std::size_t bits_per_variable(std::size_t l);

struct LatentCode {
  std::vector<std::uint32_t> indices;
  bool operator==(const LatentCode&) const = default;
};

struct PackedCode {
  std::vector<std::uint8_t> bytes;
  bool operator==(const PackedCode&) const = default;
};

/// Variable i occupies bits [i*b, (i+1)*b) of an MSB-first stream, b =
/// ceil(log2 l); the stream is zero-padded to a byte boundary.
PackedCode pack(const LatentCode& code, std::size_t c, std::size_t l);
/// Throws CorruptionError on a set pad bit or an index >= l.
LatentCode unpack(std::span<const std::uint8_t> bytes, std::size_t c, std::size_t l);
inline LatentCode unpack(const PackedCode& code, std::size_t c, std::size_t l) { return unpack(code.bytes, c, l); }

/// c x l matrix, one categorical distribution per row.
struct EncoderOutput {
  Matrix probs;
};

Matrix gumbel_noise(std::size_t c, std::size_t l, Rng& rng);
/// index_i = argmax_j (g_ij + log p_ij); log 0 counts as -inf.
LatentCode gumbel_max_sample(const EncoderOutput& p, const Matrix& noise);
LatentCode gumbel_max_sample(const EncoderOutput& p, Rng& rng);
/// y_ij = softmax_j((g_ij + log p_ij) / tau).
Matrix gumbel_softmax_relax(const EncoderOutput& p, double tau, const Matrix& noise);

/// Expands codes into a batch of concatenated one-hot rows.
Matrix one_hot(std::span<const LatentCode> codes, std::size_t c, std::size_t l);

/// Forward value fed to the decoder while training.
enum class LatentPath { straight_through, relaxed };

std::vector<LayerSpec> encoder_specs(const ImageShape& input, Architecture arch, std::size_t hidden,
                                     std::size_t latent, std::size_t conv_padding);
std::vector<LayerSpec> decoder_specs(const ImageShape& input, Architecture arch, std::size_t hidden,
                                     std::size_t latent, std::size_t conv_padding);

class DiscreteVae {
 public:
  DiscreteVae(const VaeConfig& config, Rng& init_rng);

  const VaeConfig& config() const { return config_; }

  /// Per-row probabilities, batch x (c*l).
  Matrix encode_batch(const Matrix& x) const;
  EncoderOutput encode(const Tensor& x) const;

  /// One code per row of x: Gumbel-max draw, or argmax when
  /// deterministic_storage is set.
  std::vector<LatentCode> encode_codes(const Matrix& x, Rng& rng) const;

  /// Decoder on a batch of (one-hot or relaxed) latent rows.
  Matrix decode_batch(const Matrix& latent) const;
  Matrix decode_codes(std::span<const LatentCode> codes) const;
  Tensor decode(const LatentCode& code) const;
  Tensor decode(const Matrix& relaxed) const;

  /// Reconstruction loss of x with fixed Gumbel noise (batch x (c*l)).
  /// With `with_grad`, zeroes then fills encoder and decoder gradients.
  double loss(const Matrix& x, const Matrix& noise, LatentPath path, bool with_grad);

  /// One straight-through SGD step on encoder and decoder; returns the loss.
  double train_batch(const Matrix& x, double lr, Rng& rng);

  /// Mean absolute pixel error of argmax-code reconstructions.
  double reconstruction_l1(const Matrix& x) const;

  ParameterSet parameters();
  ParameterSet encoder_parameters() { return encoder_.parameters(); }
  ParameterSet decoder_parameters() { return decoder_.parameters(); }

  void save(const std::filesystem::path& path);
  static DiscreteVae load(const std::filesystem::path& path);

 private:
  Matrix logits_to_probs(const Matrix& logits) const;

  VaeConfig config_;
  Network encoder_;
  Network decoder_;
};

/// Minibatch training over a fixed dataset; returns the mean loss per epoch.
std::vector<double> fit(DiscreteVae& vae, const Matrix& data, std::size_t epochs, std::size_t batch, double lr,
                        Rng& rng);

/// Mean over rows of the mean absolute difference between a and b.
double mean_l1(const Matrix& a, const Matrix& b);

}  // namespace recollect
