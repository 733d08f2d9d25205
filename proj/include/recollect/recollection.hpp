// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// What an experience becomes when written to the index buffer, and how it
// is turned back into an input. The discrete autoencoder is one codec; raw
// 8-bit pixel storage is the other, so "real storage" baselines run through
// exactly the same trainer code.

#pragma once

#include "recollect/discrete_vae.hpp"
#include "recollect/index_buffer.hpp"

#include <span>

namespace recollect {

class Recollector {
 public:
  virtual ~Recollector() = default;

  virtual CodeGeometry geometry() const = 0;
  /// Encodes and packs each row of x.
  virtual std::vector<PackedCode> store(const Matrix& x, Rng& rng) const = 0;
  /// Unpacks and decodes the items, one row each.
  virtual Matrix recall(std::span<const BufferItem> items) const = 0;

  /// Whether train_step changes anything.
  virtual bool trainable() const { return false; }
  virtual double train_step(const Matrix& /*x*/, double /*lr*/, Rng& /*rng*/) { return 0.0; }
  /// Identity of the current decoding function.
  virtual std::uint64_t decoder_fingerprint() { return 0; }
  /// Everything a checkpoint must persist.
  virtual ParameterSet parameters() { return {}; }
};

class VaeRecollector final : public Recollector {
 public:
  explicit VaeRecollector(DiscreteVae& vae) : vae_(&vae) {}

  CodeGeometry geometry() const override { return {vae_->config().c, vae_->config().l}; }
  std::vector<PackedCode> store(const Matrix& x, Rng& rng) const override;
  Matrix recall(std::span<const BufferItem> items) const override;
  bool trainable() const override { return true; }
  double train_step(const Matrix& x, double lr, Rng& rng) override { return vae_->train_batch(x, lr, rng); }
  std::uint64_t decoder_fingerprint() override { return vae_->decoder_parameters().fingerprint(); }
  ParameterSet parameters() override { return vae_->parameters(); }

  DiscreteVae& vae() { return *vae_; }

 private:
  DiscreteVae* vae_;
};

/// Stores pixels quantized to 8 bits: c = pixel count, l = 256.
class RawRecollector final : public Recollector {
 public:
  explicit RawRecollector(std::size_t pixels) : pixels_(pixels) {}

  CodeGeometry geometry() const override { return {pixels_, 256}; }
  std::vector<PackedCode> store(const Matrix& x, Rng& rng) const override;
  Matrix recall(std::span<const BufferItem> items) const override;

 private:
  std::size_t pixels_;
};

}  // namespace recollect
