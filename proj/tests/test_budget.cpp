// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "recollect/budget.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace recollect;

using oracle::budget_by_enumeration;

TEST_CASE("capacity and code bits") {
  CHECK(capacity(1, 2) == 1.0);
  CHECK(capacity(6, 20) == doctest::Approx(25.93).epsilon(1e-4));
  CHECK(capacity(313, 4) == doctest::Approx(626.0));
  CHECK(code_bits(38, 2) == 38u);
  CHECK(code_bits(6, 20) == 30u);
  CHECK(code_bits(10, 20) == 50u);
  CHECK(6272.0 / code_bits(38, 2) == doctest::Approx(165.053).epsilon(1e-3 / 165.053));
  CHECK(6272.0 / code_bits(6, 20) == doctest::Approx(209.067).epsilon(1e-3 / 209.067));
  CHECK(6272.0 / code_bits(10, 20) == doctest::Approx(125.440).epsilon(1e-3 / 125.44));
  for (std::size_t c = 1; c < 20; ++c)
    for (std::size_t l = 2; l < 70; ++l) {
      CHECK(capacity(c, l) <= static_cast<double>(code_bits(c, l)) + 1e-12);
      const bool pow2 = (l & (l - 1)) == 0;
      CHECK((std::abs(capacity(c, l) - static_cast<double>(code_bits(c, l))) < 1e-12) == pow2);
    }
}

TEST_CASE("optimize_incremental examples") {
  BudgetSpec spec;
  spec.examples = 1000;
  spec.total_bits = 50.0 * 1000;
  CodeGrid grid;  // c <= 64, l <= 32
  CodeChoice pick = optimize_incremental(spec, grid);
  CHECK(pick.capacity == doctest::Approx(50.0));
  // Several power-of-two codes reach 50; min-c picks the widest variable.
  CHECK(pick.c == 10);
  CHECK(pick.l == 32);
  CHECK(pick.bits == 50);

  spec.total_bits = 417.0 * 1000;
  grid.c_max = 300;
  pick = optimize_incremental(spec, grid);
  CHECK(pick.c == 139);
  CHECK(pick.l == 8);
  CHECK(pick.capacity == doctest::Approx(417.0));

  spec.total_bits = 0.5 * 1000;
  CHECK_THROWS_AS(optimize_incremental(spec, grid), InfeasibleError);
}

TEST_CASE("optimizers agree with exhaustive enumeration") {
  for (double per_example : {1.0, 7.0, 33.0, 50.0, 99.5, 128.0, 417.0, 1000.0}) {
    for (double rho : {1.0, 0.5, 0.13}) {
      BudgetSpec spec;
      spec.examples = 10;
      spec.total_bits = per_example * 10;
      spec.rho = rho;
      CodeGrid grid;
      grid.c_max = 150;
      grid.l_max = 66;  // 150 * 65 < 10^4 points
      REQUIRE(grid.points() <= 10000);
      const auto expected = budget_by_enumeration(per_example, rho, grid, nullptr);
      REQUIRE(expected);
      const CodeChoice got = optimize_incremental(spec, grid);
      CHECK(got.c == expected->c);
      CHECK(got.l == expected->l);

      spec.param_model = [](std::size_t c, std::size_t l) { return 1e-3 * static_cast<double>(c * l * c * l); };
      const auto expected_total = budget_by_enumeration(per_example, rho, grid, spec.param_model);
      if (!expected_total) {
        CHECK_THROWS_AS(optimize_total(spec, grid), InfeasibleError);
        continue;
      }
      const CodeChoice total = optimize_total(spec, grid);
      CHECK(total.c == expected_total->c);
      CHECK(total.l == expected_total->l);
    }
  }
}

TEST_CASE("optimize_total") {
  BudgetSpec spec;
  spec.examples = 1;
  spec.total_bits = 417;
  CodeGrid grid;
  grid.c_max = 300;
  const CodeChoice inc = optimize_incremental(spec, grid);
  spec.param_model = [](std::size_t, std::size_t) { return 0.0; };
  const CodeChoice tot = optimize_total(spec, grid);
  CHECK(tot.c == inc.c);
  CHECK(tot.l == inc.l);

  spec.total_bits = 1e4;
  spec.param_model = quadratic_param_model(1.0);
  CHECK(spec.param_model(3, 4) == doctest::Approx(144.0));
  grid.c_max = 100;
  const auto expected = budget_by_enumeration(1e4, 1.0, grid, spec.param_model);
  REQUIRE(expected);
  const CodeChoice pick = optimize_total(spec, grid);
  CHECK(pick.c == expected->c);
  CHECK(pick.l == expected->l);

  spec.total_bits = 3.0;  // (1,2) alone costs 1 + 4 bits
  CHECK_THROWS_AS(optimize_total(spec, grid), InfeasibleError);
}

TEST_CASE("budget validation") {
  BudgetSpec spec;
  spec.total_bits = 100;
  spec.rho = 0.0;
  CHECK_THROWS_AS(optimize_incremental(spec, CodeGrid{}), std::invalid_argument);
  spec.rho = 1.5;
  CHECK_THROWS_AS(optimize_incremental(spec, CodeGrid{}), std::invalid_argument);
  spec.rho = 1.0;
  spec.examples = 0;
  CHECK_THROWS_AS(optimize_incremental(spec, CodeGrid{}), std::invalid_argument);
}

TEST_CASE("hypothesis1_holds") {
  CHECK(hypothesis1_holds(2, 38, 50000));
  CHECK_FALSE(hypothesis1_holds(2, 10, 2000));
  CHECK(hypothesis1_holds(10, 3, 1000));
  CHECK(hypothesis1_holds(2, 5000, 1e300));
  CHECK(hypothesis1_holds(2, 10, 1024));
  CHECK_FALSE(hypothesis1_holds(2, 10, 1025));
  // Monotone in each argument.
  for (std::size_t l = 2; l < 8; ++l)
    for (std::size_t c = 1; c < 8; ++c)
      for (double L : {10.0, 100.0, 5000.0}) {
        if (hypothesis1_holds(l, c, L)) {
          CHECK(hypothesis1_holds(l + 1, c, L));
          CHECK(hypothesis1_holds(l, c + 1, L));
          CHECK(hypothesis1_holds(l, c, L / 2));
        }
      }
}
