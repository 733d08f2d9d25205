// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "recollect/discrete_vae.hpp"
#include "recollect/layers.hpp"

#include <span>
#include <utility>
#include <vector>

namespace recollect {

enum class ClassLoss { cross_entropy, bce };

/// Contiguous block of output classes a task is allowed to predict.
struct HeadGroup {
  std::size_t first = 0;
  std::size_t count = 0;
};

/// Classifier F(x, t). With no head groups every task shares all outputs;
/// otherwise task t's scores are restricted to its group.
class PredictiveModel {
 public:
  PredictiveModel(std::vector<LayerSpec> specs, std::size_t classes, Rng& init_rng);

  static PredictiveModel mlp(std::size_t inputs, std::vector<std::size_t> hidden, std::size_t classes, Rng& rng);
  /// Two 5x5 valid convolutions, one hidden dense layer.
  static PredictiveModel small_cnn(const ImageShape& input, std::size_t classes, Rng& rng);

  std::size_t classes() const { return classes_; }
  void set_head_groups(std::vector<HeadGroup> groups);
  const std::vector<HeadGroup>& head_groups() const { return heads_; }
  void set_loss(ClassLoss loss) { loss_ = loss; }
  ClassLoss loss_kind() const { return loss_; }

  Matrix logits(const Matrix& x) const { return net_.apply(x); }
  /// Softmax over each row's head group (zero outside it).
  Matrix probabilities(const Matrix& x, std::span<const int> tasks) const;
  Matrix probabilities(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x, std::span<const int> tasks) const;
  double accuracy(const Matrix& x, std::span<const int> labels, int task) const;

  /// Mean loss against per-row target distributions; fills gradients when
  /// `with_grad` (after zeroing them).
  double loss(const Matrix& x, const Matrix& targets, std::span<const int> tasks, bool with_grad);
  /// Per-row losses, no gradients.
  Vector row_losses(const Matrix& x, const Matrix& targets, std::span<const int> tasks) const;

  double train_step(const Matrix& x, const Matrix& targets, std::span<const int> tasks, double lr);
  double train_step(const Matrix& x, std::span<const int> labels, std::span<const int> tasks, double lr);

  Matrix one_hot_labels(std::span<const int> labels) const;

  ParameterSet parameters() { return net_.parameters(); }
  Network& network() { return net_; }

 private:
  HeadGroup head_for(int task) const;

  Network net_;
  std::size_t classes_;
  std::vector<HeadGroup> heads_;
  ClassLoss loss_ = ClassLoss::cross_entropy;
};

/// Tasks vector of `n` copies of `task`.
std::vector<int> same_task(std::size_t n, int task);

}  // namespace recollect
