// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/gem.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <iostream>

namespace recollect {

namespace {

struct DualProblem {
  Matrix q;  // G G'
  Vector b;  // G g - margin
  double scale = 1.0;
};

DualProblem make_dual(const Matrix& constraints, const Vector& g, double margin) {
  if (constraints.cols() != g.size()) {
    throw ShapeError("projection: constraint width " + std::to_string(constraints.cols()) + " != gradient length " +
                     std::to_string(g.size()));
  }
  if (margin < 0.0) throw std::invalid_argument("projection: margin must be non-negative");
  DualProblem d;
  d.q = constraints * constraints.transpose();
  d.b = constraints * g - Vector::Constant(constraints.rows(), margin);
  d.scale = constraints.rows() == 0 ? 1.0 : std::max({1.0, d.b.cwiseAbs().maxCoeff(), d.q.cwiseAbs().maxCoeff()});
  return d;
}

double kkt(const DualProblem& d, const Vector& v) {
  const Vector grad = d.q * v + d.b;
  double r = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double vi = v(i) > 0.0 ? std::abs(grad(i)) : std::max(0.0, -grad(i));
    r = std::max({r, vi, std::max(0.0, -v(i))});
  }
  return r;
}

// Lawson-Hanson style active set: grow the free set by the most violated
// coordinate, solve the equality subproblem, and step back to the boundary
// whenever a free coordinate would turn non-positive.
Vector active_set(const DualProblem& d, const QpOptions& opt) {
  const Eigen::Index k = d.b.size();
  const double tol = opt.tol * d.scale;
  Vector v = Vector::Zero(k);
  std::vector<bool> free(static_cast<std::size_t>(k), false);
  std::size_t iters = 0;

  auto solve_free = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (free[static_cast<std::size_t>(i)]) idx.push_back(i);
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    if (n == 0) return Vector(Vector::Zero(k));
    Matrix qf(n, n);
    Vector bf(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      bf(a) = -d.b(idx[static_cast<std::size_t>(a)]);
      for (Eigen::Index c = 0; c < n; ++c) qf(a, c) = d.q(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
    }
    const Vector sf = qf.completeOrthogonalDecomposition().solve(bf);
    Vector s = Vector::Zero(k);
    for (Eigen::Index a = 0; a < n; ++a) s(idx[static_cast<std::size_t>(a)]) = sf(a);
    return s;
  };

  // Coordinates whose entry failed to move v; cleared whenever v changes.
  std::vector<bool> blocked(static_cast<std::size_t>(k), false);
  while (true) {
    const Vector w = -(d.q * v + d.b);
    Eigen::Index j = -1;
    double best = tol;
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto u = static_cast<std::size_t>(i);
      if (!free[u] && !blocked[u] && w(i) > best) {
        best = w(i);
        j = i;
      }
    }
    if (j < 0) break;
    free[static_cast<std::size_t>(j)] = true;
    bool moved = false;
    while (true) {
      if (++iters > opt.max_iter) throw SolverError("active-set solver exceeded its iteration limit");
      const Vector s = solve_free();
      bool positive = true;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (free[static_cast<std::size_t>(i)] && s(i) <= 0.0) positive = false;
      }
      if (positive) {
        v = s;
        moved = true;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (free[static_cast<std::size_t>(i)] && s(i) <= 0.0) alpha = std::min(alpha, v(i) / (v(i) - s(i)));
      }
      if (alpha > 0.0) moved = true;
      v += alpha * (s - v);
      for (Eigen::Index i = 0; i < k; ++i) {
        if (free[static_cast<std::size_t>(i)] && v(i) <= 0.0) {
          free[static_cast<std::size_t>(i)] = false;
          v(i) = 0.0;
        }
      }
      if (!moved) break;  // a dependent constraint cannot enter
    }
    if (moved) {
      std::fill(blocked.begin(), blocked.end(), false);
    } else {
      blocked[static_cast<std::size_t>(j)] = true;
    }
  }
  return v;
}

// Accelerated projected gradient on the dual.
Vector projected_gradient(const DualProblem& d, const QpOptions& opt) {
  const Eigen::Index k = d.b.size();
  const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(d.q, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double step = 1.0 / std::max(lmax, 1e-300);
  const double tol = opt.tol * d.scale;
  Vector v = Vector::Zero(k), y = v;
  double t = 1.0;
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const Vector next = (y - step * (d.q * y + d.b)).cwiseMax(0.0);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - v);
    v = next;
    t = t_next;
    if (kkt(d, v) < tol) return v;
  }
  throw SolverError("projected-gradient dual solver did not converge");
}

}  // namespace

double dual_kkt_residual(const Matrix& constraints, const Vector& g, double margin, const Vector& v) {
  return kkt(make_dual(constraints, g, margin), v);
}

Vector qp_dual_solve(const Matrix& constraints, const Vector& g, double margin, const QpOptions& options) {
  const DualProblem d = make_dual(constraints, g, margin);
  if (d.b.size() == 0) return Vector(0);
  const auto k = static_cast<std::size_t>(d.b.size());
  Vector v;
  if (k <= options.active_set_limit) {
    v = active_set(d, options);
    // Fall through to the iterative method if degeneracy left a residual.
    if (kkt(d, v) < options.tol * d.scale) return v;
  }
  return projected_gradient(d, options);
}

Projection project(const Vector& g, const Matrix& constraints, double margin, const QpOptions& options) {
  if (constraints.rows() == 0) return {g, false, false};
  if (constraints.cols() != g.size()) throw ShapeError("project: constraint width != gradient length");
  const Vector dots = constraints * g;
  if ((dots.array() >= margin).all()) return {g, false, false};
  try {
    const Vector v = qp_dual_solve(constraints, g, margin, options);
    return {g + constraints.transpose() * v, true, false};
  } catch (const SolverError& e) {
    std::cerr << "warning: " << e.what() << "; using the unprojected gradient\n";
    return {g, true, true};
  }
}

GemTrainer::GemTrainer(PredictiveModel& model, Recollector* recollector, IndexBuffer* buffer, GemConfig config)
    : StreamTrainer(model, recollector, buffer, config.replay), margin_(config.margin), qp_(config.qp) {
  if (margin_ < 0.0) throw std::invalid_argument("GEM margin must be non-negative");
  if (buffer_ && buffer_->policy() != EvictionPolicy::per_task_recent) {
    throw std::invalid_argument("GEM needs a per-task-recent buffer");
  }
}

Vector GemTrainer::gradient(const Matrix& x, std::span<const int> labels, std::span<const int> tasks) {
  model_.loss(x, model_.one_hot_labels(labels), tasks, true);
  return model_.parameters().flat_grad();
}

void GemTrainer::observe(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task) {
  stabilize(x, label, task);
  write_to_buffer(x, label, task);

  std::vector<Vector> past;
  if (buffer_) {
    for (int k = 0; k < task; ++k) {
      const auto items = buffer_->task_items(static_cast<std::size_t>(k));
      if (items.empty()) continue;
      std::vector<int> labels, tasks;
      for (const auto& it : items) {
        labels.push_back(it.label);
        tasks.push_back(it.task);
      }
      past.push_back(gradient(rec_->recall(items), labels, tasks));
    }
  }
  const int lab[1] = {label};
  const int tsk[1] = {task};
  const Vector g = gradient(Matrix(x), lab, tsk);
  Matrix constraints(static_cast<Eigen::Index>(past.size()), g.size());
  for (std::size_t i = 0; i < past.size(); ++i) constraints.row(static_cast<Eigen::Index>(i)) = past[i].transpose();

  const Projection p = project(g, constraints, margin_, qp_);
  projections_ += p.solver_invoked;
  fallbacks_ += p.fell_back;
  ParameterSet params = model_.parameters();
  params.set_flat_grad(p.g);
  sgd_step(params, cfg_.alpha);
}

RetentionReport gem_train_stream(const TaskStream& stream, PredictiveModel& model, Recollector* recollector,
                                 IndexBuffer* buffer, const GemConfig& config) {
  GemTrainer trainer(model, recollector, buffer, config);
  trainer.run(stream);
  return retention(model, stream);
}

}  // namespace recollect
