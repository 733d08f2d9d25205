// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "recollect/tensor.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace recollect {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

/// Non-owning view over parameters owned by layers, in declaration order.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::vector<Parameter*> items) : items_(std::move(items)) {}

  void add(Parameter& p) { items_.push_back(&p); }
  void append(const ParameterSet& other);

  const std::vector<Parameter*>& items() const { return items_; }
  std::size_t count() const;

  void zero_grad();
  bool grads_finite() const;

  Vector flat_values() const;
  void set_flat_values(const Vector& v);
  Vector flat_grad() const;
  void set_flat_grad(const Vector& g);

  /// FNV-1a over the raw value bytes; cheap identity check for snapshots.
  std::uint64_t fingerprint() const;

  void write(std::ostream& os) const;
  void read(std::istream& is);

 private:
  std::vector<Parameter*> items_;
};

/// theta <- theta - lr * grad, then clears gradients. lr = 0 only clears.
void sgd_step(ParameterSet& params, double lr);

/// Objective callback for grad_check: computes the scalar loss, and when
/// `with_grad` is set also zeroes and repopulates the parameter gradients.
using Objective = std::function<double(bool with_grad)>;

/// Max over parameter tensors of ||analytic - central difference|| /
/// max(||analytic||, ||fd||, 1e-12), Euclidean norms over the checked
/// entries. `max_entries_per_param` = 0 checks every entry; otherwise
/// entries are visited at an even stride.
double grad_check(ParameterSet& params, const Objective& objective, double eps,
                  std::size_t max_entries_per_param = 0);

}  // namespace recollect
