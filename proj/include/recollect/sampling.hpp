// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Ways of drawing recollections: from stored codes, from uniformly random
// codes, the hardest of k candidates for a student, and a diverse subset
// chosen by greedy minimum sum of squared dot products (MSSS).

#pragma once

#include "recollect/index_buffer.hpp"
#include "recollect/predictive.hpp"
#include "recollect/recollection.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace recollect {

struct SamplingConfig {
  std::size_t k_active = 10;
  std::size_t n_diverse = 10;
  double msss_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Recollections {
  Matrix x;
  std::vector<int> labels;
  std::vector<int> tasks;
};

/// Decodes `count` codes whose variables are each uniform on [0, l).
Matrix code_sample(const DiscreteVae& vae, Rng& rng, std::size_t count);

/// Decodes `count` codes drawn with replacement from the buffer.
Recollections recollect(const IndexBuffer& buffer, const Recollector& recollector, Rng& rng, std::size_t count);

/// Mean over samples of the smallest mean-absolute-pixel distance to any
/// reference row.
double nn_distortion(const Matrix& samples, const Matrix& references);

/// Index of the candidate with the largest student loss; ties go to the
/// lowest index.
std::size_t active_select(const Matrix& candidates, std::span<const int> labels, std::span<const int> tasks,
                          const PredictiveModel& student);

/// m landmark rows: two distinct random seeds, then repeatedly the point of
/// a random `fraction` of the remaining points whose summed squared dot
/// product with the chosen points is smallest.
std::vector<std::size_t> msss_select(const Matrix& x, std::size_t m, double fraction, Rng& rng);
/// Same with the two seeds given.
std::vector<std::size_t> msss_select(const Matrix& x, std::size_t m, double fraction,
                                     std::pair<std::size_t, std::size_t> seeds, Rng& rng);

/// Sum over chosen pairs i < j of (x_i . x_j)^2.
double sum_squared_similarity(const Matrix& x, std::span<const std::size_t> chosen);

/// Draws k*n buffer items and keeps k of them: the MSSS subset when k >= 2,
/// the hardest candidate for `student` when k = 1, the plain draw when n = 1.
Recollections active_diverse_select(const IndexBuffer& buffer, const Recollector& recollector,
                                    const PredictiveModel* student, std::size_t k, std::size_t n, Rng& rng);

}  // namespace recollect
