// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace recollect {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

void ParameterSet::append(const ParameterSet& other) {
  items_.insert(items_.end(), other.items_.begin(), other.items_.end());
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto* p : items_) n += p->size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto* p : items_) p->grad.setZero();
}

bool ParameterSet::grads_finite() const {
  return std::all_of(items_.begin(), items_.end(), [](const Parameter* p) { return p->grad.allFinite(); });
}

Vector ParameterSet::flat_values() const {
  Vector out(static_cast<Eigen::Index>(count()));
  Eigen::Index at = 0;
  for (const auto* p : items_) {
    out.segment(at, p->value.size()) = p->value.reshaped<Eigen::RowMajor>();
    at += p->value.size();
  }
  return out;
}

void ParameterSet::set_flat_values(const Vector& v) {
  if (static_cast<std::size_t>(v.size()) != count()) throw ShapeError("set_flat_values: length mismatch");
  Eigen::Index at = 0;
  for (auto* p : items_) {
    p->value.reshaped<Eigen::RowMajor>() = v.segment(at, p->value.size());
    at += p->value.size();
  }
}

Vector ParameterSet::flat_grad() const {
  Vector out(static_cast<Eigen::Index>(count()));
  Eigen::Index at = 0;
  for (const auto* p : items_) {
    out.segment(at, p->grad.size()) = p->grad.reshaped<Eigen::RowMajor>();
    at += p->grad.size();
  }
  return out;
}

void ParameterSet::set_flat_grad(const Vector& g) {
  if (static_cast<std::size_t>(g.size()) != count()) throw ShapeError("set_flat_grad: length mismatch");
  Eigen::Index at = 0;
  for (auto* p : items_) {
    p->grad.reshaped<Eigen::RowMajor>() = g.segment(at, p->grad.size());
    at += p->grad.size();
  }
}

std::uint64_t ParameterSet::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto* p : items_) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void ParameterSet::write(std::ostream& os) const {
  for (const auto* p : items_) {
    os.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->size() * sizeof(double)));
  }
}

void ParameterSet::read(std::istream& is) {
  for (auto* p : items_) {
    is.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->size() * sizeof(double)));
    if (!is) throw std::runtime_error("parameter stream truncated at '" + p->name + "'");
    p->grad.setZero();
  }
}

void sgd_step(ParameterSet& params, double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("sgd_step: learning rate must be non-negative");
  for (auto* p : params.items()) {
    if (lr > 0.0) p->value.noalias() -= lr * p->grad;
    p->grad.setZero();
  }
}

double grad_check(ParameterSet& params, const Objective& objective, double eps, std::size_t max_entries_per_param) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
  objective(true);
  std::vector<Matrix> analytic;
  for (const auto* p : params.items()) analytic.push_back(p->grad);

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.items().size(); ++pi) {
    Parameter& p = *params.items()[pi];
    const std::size_t n = p.size();
    const std::size_t stride = (max_entries_per_param == 0 || n <= max_entries_per_param) ? 1 : n / max_entries_per_param;
    double diff2 = 0.0, a2 = 0.0, fd2 = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
      double& v = p.value.data()[i];
      const double saved = v;
      v = saved + eps;
      const double up = objective(false);
      v = saved - eps;
      const double down = objective(false);
      v = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double a = analytic[pi].data()[i];
      diff2 += (a - fd) * (a - fd);
      a2 += a * a;
      fd2 += fd * fd;
    }
    worst = std::max(worst, std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(fd2), 1e-12}));
  }
  params.zero_grad();
  return worst;
}

}  // namespace recollect
