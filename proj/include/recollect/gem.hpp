// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Gradient projection against past-task gradients. The projected gradient
// solves
//   min_z 1/2 |z - g|^2   s.t.  <z, g_k> >= margin for every row g_k of G,
// through its dual over v >= 0:
//   min_v 1/2 v'(GG')v + v'(Gg - margin),   z = g + G'v.

#pragma once

#include "recollect/replay_trainer.hpp"

#include <stdexcept>

namespace recollect {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QpOptions {
  std::size_t max_iter = 10000;
  double tol = 1e-10;
  /// Constraint counts up to this use the exact active-set method.
  std::size_t active_set_limit = 20;
};

/// Dual multipliers v >= 0. Throws SolverError when the iteration limit is
/// hit before the KKT residual drops below tol.
Vector qp_dual_solve(const Matrix& constraints, const Vector& g, double margin, const QpOptions& options = {});

/// max_i of the per-coordinate KKT violation of v for the dual problem.
double dual_kkt_residual(const Matrix& constraints, const Vector& g, double margin, const Vector& v);

struct Projection {
  Vector g;
  bool solver_invoked = false;
  /// The dual solve failed and the input gradient was returned unchanged.
  bool fell_back = false;
};

/// g itself (bit for bit) when already feasible.
Projection project(const Vector& g, const Matrix& constraints, double margin, const QpOptions& options = {});

struct GemConfig {
  ReplayConfig replay;
  double margin = 0.0;
  QpOptions qp;
};

/// Per example: stabilize the recollection module, write x into the current
/// task's memory, then take one projected SGD step whose constraints are the
/// gradients on each earlier task's decoded memory.
class GemTrainer final : public StreamTrainer {
 public:
  GemTrainer(PredictiveModel& model, Recollector* recollector, IndexBuffer* buffer, GemConfig config);
  void observe(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task) override;

  std::size_t projections() const { return projections_; }
  std::size_t fallbacks() const { return fallbacks_; }

 private:
  Vector gradient(const Matrix& x, std::span<const int> labels, std::span<const int> tasks);

  double margin_;
  QpOptions qp_;
  std::size_t projections_ = 0;
  std::size_t fallbacks_ = 0;
};

RetentionReport gem_train_stream(const TaskStream& stream, PredictiveModel& model, Recollector* recollector,
                                 IndexBuffer* buffer, const GemConfig& config);

}  // namespace recollect
