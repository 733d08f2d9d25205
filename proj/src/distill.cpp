// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/distill.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace recollect {

void DistillSource::validate() const {
  if (checkpoints.empty()) throw std::invalid_argument("distill: no checkpoints");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      std::adjacent_find(checkpoints.begin(), checkpoints.end()) != checkpoints.end()) {
    throw std::invalid_argument("distill: checkpoints must be strictly ascending");
  }
  switch (kind) {
    case SourceKind::real_data:
    case SourceKind::real_x_teacher_y:
    case SourceKind::subset_sample:
      if (!data || data->size() == 0) throw std::invalid_argument("distill: empty source dataset");
      if (kind == SourceKind::subset_sample && !(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("distill: subset fraction must lie in (0, 1]");
      }
      break;
    case SourceKind::recollections:
      if (strategy == RecollectionStrategy::code) {
        if (!vae) throw std::invalid_argument("distill: code sampling needs the autoencoder");
      } else if (!buffer || !recollector || buffer->empty()) {
        throw std::invalid_argument("distill: empty recollection buffer");
      }
      if (k_active < 1 || n_diverse < 1) throw std::invalid_argument("distill: k and n must be positive");
      break;
  }
}

namespace {

struct Episode {
  Matrix x;
  int label = 0;  // ground truth, real variants only
};

}  // namespace

std::vector<CurvePoint> distill(const PredictiveModel& teacher, PredictiveModel& student, const DistillSource& src,
                                const Dataset& test, double lr, Rng& rng) {
  src.validate();
  std::vector<std::size_t> subset;
  if (src.kind == SourceKind::subset_sample) {
    subset.resize(src.data->size());
    std::iota(subset.begin(), subset.end(), 0);
    for (std::size_t i = subset.size(); i > 1; --i) std::swap(subset[i - 1], subset[rng.index(i)]);
    subset.resize(std::max<std::size_t>(
        1, static_cast<std::size_t>(src.fraction * static_cast<double>(src.data->size()))));
  }
  const int task0[1] = {0};

  auto draw = [&]() -> Episode {
    switch (src.kind) {
      case SourceKind::real_data:
      case SourceKind::real_x_teacher_y: {
        const std::size_t i = rng.index(src.data->size());
        return {src.data->x.row(static_cast<Eigen::Index>(i)), src.data->y[i]};
      }
      case SourceKind::subset_sample: {
        const std::size_t i = subset[rng.index(subset.size())];
        return {src.data->x.row(static_cast<Eigen::Index>(i)), src.data->y[i]};
      }
      case SourceKind::recollections:
        break;
    }
    switch (src.strategy) {
      case RecollectionStrategy::code:
        return {code_sample(*src.vae, rng, 1), 0};
      case RecollectionStrategy::buffer:
        return {recollect(*src.buffer, *src.recollector, rng, 1).x, 0};
      case RecollectionStrategy::active:
      case RecollectionStrategy::diverse: {
        Recollections pool = src.strategy == RecollectionStrategy::active
                                 ? recollect(*src.buffer, *src.recollector, rng, src.k_active)
                                 : active_diverse_select(*src.buffer, *src.recollector, nullptr, src.k_active,
                                                         src.n_diverse, rng);
        // Difficulty is judged against the teacher's answer, not the stored
        // label, since the student only ever sees teacher targets.
        const auto tasks = same_task(static_cast<std::size_t>(pool.x.rows()), 0);
        const auto teacher_labels = teacher.predict(pool.x, tasks);
        const std::size_t pick = active_select(pool.x, teacher_labels, tasks, student);
        return {pool.x.row(static_cast<Eigen::Index>(pick)), 0};
      }
    }
    throw std::logic_error("unhandled distillation source");
  };

  std::vector<CurvePoint> curve;
  std::size_t episode = 0;
  for (std::size_t stop : src.checkpoints) {
    for (; episode < stop; ++episode) {
      const Episode e = draw();
      const Matrix target = src.kind == SourceKind::real_data ? student.one_hot_labels(std::span<const int>(&e.label, 1))
                                                              : teacher.probabilities(e.x, task0);
      student.train_step(e.x, target, task0, lr);
    }
    curve.push_back({stop, student.accuracy(test.x, test.y, 0)});
  }
  return curve;
}

double teacher_train(PredictiveModel& model, const Dataset& train, const Dataset& test, std::size_t epochs,
                     std::size_t batch, double lr, Rng& rng) {
  if (train.size() == 0) throw std::invalid_argument("teacher_train: empty training set");
  if (batch < 1) throw std::invalid_argument("teacher_train: batch must be positive");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      const Dataset mb = train.subset(std::span<const std::size_t>(order).subspan(start, n));
      model.train_step(mb.x, std::span<const int>(mb.y), same_task(n, 0), lr);
    }
  }
  return model.accuracy(test.x, test.y, 0);
}

}  // namespace recollect
