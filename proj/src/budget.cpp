// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/budget.hpp"

#include "recollect/discrete_vae.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace recollect {

double capacity(std::size_t c, std::size_t l) {
  if (c < 1 || l < 2) throw std::invalid_argument("capacity needs c >= 1 and l >= 2");
  return static_cast<double>(c) * std::log2(static_cast<double>(l));
}

std::size_t code_bits(std::size_t c, std::size_t l) {
  if (c < 1 || l < 2) throw std::invalid_argument("code_bits needs c >= 1 and l >= 2");
  return c * bits_per_variable(l);
}

ParamModel quadratic_param_model(double a) {
  return [a](std::size_t c, std::size_t l) {
    const double cl = static_cast<double>(c) * static_cast<double>(l);
    return a * cl * cl;
  };
}

void BudgetSpec::validate() const {
  if (!(total_bits > 0.0) || !(examples > 0.0)) throw std::invalid_argument("budget and example count must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0, 1]");
}

namespace {

CodeChoice search(const BudgetSpec& spec, const CodeGrid& grid, bool with_params) {
  spec.validate();
  if (grid.c_min < 1 || grid.l_min < 2 || grid.c_max < grid.c_min || grid.l_max < grid.l_min) {
    throw std::invalid_argument("empty or invalid (c, l) grid");
  }
  const double limit = spec.per_example();
  CodeChoice best;
  bool found = false;
  // c then l ascending, strict improvement only, so the first optimum seen
  // has the smallest c, then the smallest l.
  for (std::size_t c = grid.c_min; c <= grid.c_max; ++c) {
    for (std::size_t l = grid.l_min; l <= grid.l_max; ++l) {
      const std::size_t k = code_bits(c, l);
      double cost = spec.rho * static_cast<double>(k);
      if (with_params && spec.param_model) cost += spec.param_model(c, l);
      if (cost > limit) continue;
      const double cap = capacity(c, l);
      // Equal capacities can differ in the last bits (2*log2 9 vs 4*log2 3).
      if (!found || cap > best.capacity + 1e-9 * best.capacity) {
        best = {c, l, k, cap};
        found = true;
      }
    }
  }
  if (!found) {
    throw InfeasibleError("no (c, l) in the grid fits " + std::to_string(limit) + " bits per example");
  }
  return best;
}

}  // namespace

CodeChoice optimize_incremental(const BudgetSpec& spec, const CodeGrid& grid) { return search(spec, grid, false); }

CodeChoice optimize_total(const BudgetSpec& spec, const CodeGrid& grid) { return search(spec, grid, true); }

bool hypothesis1_holds(std::size_t l, std::size_t c, double buffer_size) {
  if (l < 2 || c < 1 || !(buffer_size > 0.0)) throw std::invalid_argument("hypothesis1_holds: bad arguments");
  const double lhs = static_cast<double>(c) * std::log(static_cast<double>(l));
  const double rhs = std::log(buffer_size);
  // l^c and L are integers, so a relative slack absorbs rounding in the
  // logs at exact equality (e.g. 10^3 vs 1000).
  return lhs >= rhs - 1e-12 * std::max(1.0, std::abs(rhs));
}

}  // namespace recollect
