// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Teacher to student transfer, one input per episode.

#pragma once

#include "recollect/sampling.hpp"
#include "recollect/tasks.hpp"

#include <vector>

namespace recollect {

enum class SourceKind { real_data, real_x_teacher_y, subset_sample, recollections };
enum class RecollectionStrategy { buffer, code, active, diverse };

struct DistillSource {
  SourceKind kind = SourceKind::real_data;
  /// Training inputs for the real variants.
  const Dataset* data = nullptr;
  /// subset_sample: fraction of `data` fixed up front.
  double fraction = 0.1;

  RecollectionStrategy strategy = RecollectionStrategy::buffer;
  const IndexBuffer* buffer = nullptr;
  const Recollector* recollector = nullptr;
  /// Needed for code sampling.
  const DiscreteVae* vae = nullptr;
  std::size_t k_active = 10;
  std::size_t n_diverse = 10;

  std::vector<std::size_t> checkpoints{10, 100, 1000, 10000};

  void validate() const;
};

struct CurvePoint {
  std::size_t episodes = 0;
  double accuracy = 0.0;
};

/// Trains `student` for checkpoints.back() episodes and records its test
/// accuracy at each checkpoint. Targets are ground truth for real_data and
/// the teacher's softmax otherwise.
std::vector<CurvePoint> distill(const PredictiveModel& teacher, PredictiveModel& student, const DistillSource& source,
                                const Dataset& test, double lr, Rng& rng);

/// Shuffled minibatch SGD; returns test accuracy after the last epoch.
double teacher_train(PredictiveModel& model, const Dataset& train, const Dataset& test, std::size_t epochs,
                     std::size_t batch, double lr, Rng& rng);

}  // namespace recollect
