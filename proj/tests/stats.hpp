// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-side statistics shared by unit tests and the acceptance binary.

#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace recollect::stats {

/// Upper-tail p-value of Pearson's statistic for observed counts against
/// expected probabilities.
inline double chi_squared_p(const std::vector<double>& observed, const std::vector<double>& probs) {
  const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = n * probs[i];
    stat += (observed[i] - e) * (observed[i] - e) / e;
  }
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// One-sided Wilcoxon signed-rank test of H1: the differences are shifted
/// above zero. Zero differences are dropped; ties share average ranks and
/// the variance carries the tie correction. Normal approximation with
/// continuity correction.
inline double wilcoxon_greater_p(std::vector<double> diffs) {
  diffs.erase(std::remove(diffs.begin(), diffs.end(), 0.0), diffs.end());
  const std::size_t n = diffs.size();
  if (n == 0) return 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
  std::vector<double> rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (diffs[i] > 0) w_plus += rank[i];
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1) / 4.0;
  const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
  const double z = (w_plus - mean - 0.5) / std::sqrt(var);
  return boost::math::cdf(boost::math::complement(boost::math::normal(), z));
}

}  // namespace recollect::stats
