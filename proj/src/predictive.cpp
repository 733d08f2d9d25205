// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace recollect {

PredictiveModel::PredictiveModel(std::vector<LayerSpec> specs, std::size_t classes, Rng& init_rng)
    : net_(specs, init_rng), classes_(classes) {
  if (classes < 2) throw std::invalid_argument("PredictiveModel: need at least two classes");
  if (net_.out_features() != classes) throw ShapeError("PredictiveModel: network output width != class count");
}

PredictiveModel PredictiveModel::mlp(std::size_t inputs, std::vector<std::size_t> hidden, std::size_t classes,
                                     Rng& rng) {
  std::vector<LayerSpec> s;
  std::size_t width = inputs;
  for (std::size_t h : hidden) {
    s.push_back(LayerSpec::dense(width, h));
    s.push_back(LayerSpec::act(ActivationKind::relu, h));
    width = h;
  }
  s.push_back(LayerSpec::dense(width, classes));
  return PredictiveModel(std::move(s), classes, rng);
}

PredictiveModel PredictiveModel::small_cnn(const ImageShape& in, std::size_t classes, Rng& rng) {
  std::vector<LayerSpec> s;
  s.push_back(LayerSpec::conv(in.channels, in.height, in.width, 8, 0));
  const std::size_t h1 = in.height - 4, w1 = in.width - 4;
  s.push_back(LayerSpec::act(ActivationKind::relu, 8 * h1 * w1));
  s.push_back(LayerSpec::conv(8, h1, w1, 16, 0));
  const std::size_t h2 = h1 - 4, w2 = w1 - 4;
  s.push_back(LayerSpec::act(ActivationKind::relu, 16 * h2 * w2));
  s.push_back(LayerSpec::dense(16 * h2 * w2, 64));
  s.push_back(LayerSpec::act(ActivationKind::relu, 64));
  s.push_back(LayerSpec::dense(64, classes));
  return PredictiveModel(std::move(s), classes, rng);
}

void PredictiveModel::set_head_groups(std::vector<HeadGroup> groups) {
  for (const auto& g : groups) {
    if (g.count == 0 || g.first + g.count > classes_) throw std::invalid_argument("head group out of range");
  }
  heads_ = std::move(groups);
}

HeadGroup PredictiveModel::head_for(int task) const {
  if (heads_.empty()) return {0, classes_};
  if (task < 0 || static_cast<std::size_t>(task) >= heads_.size()) {
    throw std::invalid_argument("no head group for task " + std::to_string(task));
  }
  return heads_[static_cast<std::size_t>(task)];
}

std::vector<int> same_task(std::size_t n, int task) { return std::vector<int>(n, task); }

namespace {

void check_rows(const Matrix& x, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(x.rows()) != n) throw ShapeError(std::string(what) + ": row count mismatch");
}

}  // namespace

Matrix PredictiveModel::probabilities(const Matrix& x, std::span<const int> tasks) const {
  check_rows(x, tasks.size(), "probabilities");
  const Matrix z = logits(x);
  Matrix p = Matrix::Zero(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const HeadGroup h = head_for(tasks[static_cast<std::size_t>(r)]);
    auto seg = z.row(r).segment(static_cast<Eigen::Index>(h.first), static_cast<Eigen::Index>(h.count));
    auto e = (seg.array() - seg.maxCoeff()).exp();
    p.row(r).segment(static_cast<Eigen::Index>(h.first), static_cast<Eigen::Index>(h.count)) = (e / e.sum()).matrix();
  }
  return p;
}

Matrix PredictiveModel::probabilities(const Matrix& x) const {
  return probabilities(x, same_task(static_cast<std::size_t>(x.rows()), 0));
}

std::vector<int> PredictiveModel::predict(const Matrix& x, std::span<const int> tasks) const {
  check_rows(x, tasks.size(), "predict");
  const Matrix z = logits(x);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const HeadGroup h = head_for(tasks[static_cast<std::size_t>(r)]);
    Eigen::Index arg;
    z.row(r).segment(static_cast<Eigen::Index>(h.first), static_cast<Eigen::Index>(h.count)).maxCoeff(&arg);
    out[static_cast<std::size_t>(r)] = static_cast<int>(h.first) + static_cast<int>(arg);
  }
  return out;
}

double PredictiveModel::accuracy(const Matrix& x, std::span<const int> labels, int task) const {
  if (labels.empty()) return 0.0;
  const auto pred = predict(x, same_task(labels.size(), task));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

Matrix PredictiveModel::one_hot_labels(std::span<const int> labels) const {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes_));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes_) {
      throw std::invalid_argument("label " + std::to_string(labels[i]) + " out of range");
    }
    t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return t;
}

namespace {

/// Loss of one row and its gradient w.r.t. the logits in the head group.
double row_loss(ClassLoss kind, const Eigen::Ref<const Eigen::RowVectorXd>& z, const Eigen::Ref<const Eigen::RowVectorXd>& t,
                Eigen::RowVectorXd* grad) {
  const Eigen::Index k = z.size();
  if (kind == ClassLoss::cross_entropy) {
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    const Eigen::RowVectorXd logp = (z.array() - lse).matrix();
    if (grad) *grad = logp.array().exp().matrix() - t;
    return -t.dot(logp);
  }
  double total = 0.0;
  if (grad) grad->resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double p = std::clamp(1.0 / (1.0 + std::exp(-z(j))), kProbClamp, 1.0 - kProbClamp);
    total -= t(j) * std::log(p) + (1.0 - t(j)) * std::log1p(-p);
    if (grad) (*grad)(j) = (p - t(j)) / static_cast<double>(k);
  }
  return total / static_cast<double>(k);
}

}  // namespace

Vector PredictiveModel::row_losses(const Matrix& x, const Matrix& targets, std::span<const int> tasks) const {
  check_rows(x, tasks.size(), "row_losses");
  check_rows(targets, tasks.size(), "row_losses");
  const Matrix z = logits(x);
  Vector out(z.rows());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const HeadGroup h = head_for(tasks[static_cast<std::size_t>(r)]);
    const auto a = static_cast<Eigen::Index>(h.first), n = static_cast<Eigen::Index>(h.count);
    out(r) = row_loss(loss_, z.row(r).segment(a, n), targets.row(r).segment(a, n), nullptr);
  }
  return out;
}

double PredictiveModel::loss(const Matrix& x, const Matrix& targets, std::span<const int> tasks, bool with_grad) {
  if (x.rows() == 0) throw std::invalid_argument("loss: empty batch");
  check_rows(x, tasks.size(), "loss");
  check_rows(targets, tasks.size(), "loss");
  if (static_cast<std::size_t>(targets.cols()) != classes_) throw ShapeError("loss: target width != class count");
  const Matrix z = with_grad ? net_.forward(x) : net_.apply(x);
  Matrix dz = Matrix::Zero(z.rows(), z.cols());
  const double inv_b = 1.0 / static_cast<double>(z.rows());
  double total = 0.0;
  Eigen::RowVectorXd g;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const HeadGroup h = head_for(tasks[static_cast<std::size_t>(r)]);
    const auto a = static_cast<Eigen::Index>(h.first), n = static_cast<Eigen::Index>(h.count);
    total += row_loss(loss_, z.row(r).segment(a, n), targets.row(r).segment(a, n), with_grad ? &g : nullptr);
    if (with_grad) dz.row(r).segment(a, n) = g * inv_b;
  }
  const double value = total * inv_b;
  if (!std::isfinite(value)) throw NumericError("classifier loss is not finite");
  if (with_grad) {
    net_.parameters().zero_grad();
    net_.backward(dz);
  }
  return value;
}

double PredictiveModel::train_step(const Matrix& x, const Matrix& targets, std::span<const int> tasks, double lr) {
  const double value = loss(x, targets, tasks, true);
  ParameterSet params = parameters();
  sgd_step(params, lr);
  return value;
}

double PredictiveModel::train_step(const Matrix& x, std::span<const int> labels, std::span<const int> tasks, double lr) {
  return train_step(x, one_hot_labels(labels), tasks, lr);
}

}  // namespace recollect
