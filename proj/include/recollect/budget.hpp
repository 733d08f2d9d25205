// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Choosing the latent shape (c, l) under a storage budget.

#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace recollect {

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// c * log2(l): log2 of the number of distinct codes.
double capacity(std::size_t c, std::size_t l);
/// c * ceil(log2 l): bits actually written per stored item.
std::size_t code_bits(std::size_t c, std::size_t l);

using ParamModel = std::function<double(std::size_t c, std::size_t l)>;

/// a * (c*l)^2 bits.
ParamModel quadratic_param_model(double a);

struct BudgetSpec {
  double total_bits = 0.0;  // gamma
  double examples = 1.0;    // N
  double rho = 1.0;         // probability an example is stored
  ParamModel param_model;   // null means free parameters

  void validate() const;
  double per_example() const { return total_bits / examples; }
};

struct CodeGrid {
  std::size_t c_min = 1, c_max = 64;
  std::size_t l_min = 2, l_max = 32;
  std::size_t points() const { return (c_max - c_min + 1) * (l_max - l_min + 1); }
};

struct CodeChoice {
  std::size_t c = 0;
  std::size_t l = 0;
  std::size_t bits = 0;
  double capacity = 0.0;
};

/// Max capacity with rho * k <= gamma / N. Ties go to smaller c, then l.
CodeChoice optimize_incremental(const BudgetSpec& spec, const CodeGrid& grid);
/// Max capacity with rho * k + param_model(c, l) <= gamma / N.
CodeChoice optimize_total(const BudgetSpec& spec, const CodeGrid& grid);

/// l^c >= L, evaluated as c * log(l) >= log(L).
bool hypothesis1_holds(std::size_t l, std::size_t c, double buffer_size);

}  // namespace recollect
