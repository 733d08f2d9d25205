// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace recollect {

void SamplingConfig::validate() const {
  if (k_active < 1) throw std::invalid_argument("k_active must be at least 1");
  if (n_diverse < 1) throw std::invalid_argument("n_diverse must be at least 1");
  if (!(msss_fraction > 0.0 && msss_fraction <= 1.0)) throw std::invalid_argument("msss_fraction must lie in (0, 1]");
}

Matrix code_sample(const DiscreteVae& vae, Rng& rng, std::size_t count) {
  const auto& cfg = vae.config();
  std::vector<LatentCode> codes(count);
  for (auto& code : codes) {
    code.indices.resize(cfg.c);
    for (auto& v : code.indices) v = static_cast<std::uint32_t>(rng.index(cfg.l));
  }
  return vae.decode_codes(codes);
}

Recollections recollect(const IndexBuffer& buffer, const Recollector& recollector, Rng& rng, std::size_t count) {
  const SampleBatch batch = buffer.sample(count, rng);
  if (batch.buffer_empty) throw std::invalid_argument("cannot recollect from an empty buffer");
  Recollections r;
  r.x = recollector.recall(batch.items);
  for (const auto& it : batch.items) {
    r.labels.push_back(it.label);
    r.tasks.push_back(it.task);
  }
  return r;
}

double nn_distortion(const Matrix& samples, const Matrix& references) {
  if (references.rows() == 0) throw std::invalid_argument("nn_distortion: empty reference set");
  if (samples.cols() != references.cols()) throw ShapeError("nn_distortion: pixel counts differ");
  if (samples.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < references.rows(); ++j) {
      best = std::min(best, (samples.row(i) - references.row(j)).cwiseAbs().sum());
    }
    total += best / static_cast<double>(samples.cols());
  }
  return total / static_cast<double>(samples.rows());
}

std::size_t active_select(const Matrix& candidates, std::span<const int> labels, std::span<const int> tasks,
                          const PredictiveModel& student) {
  if (candidates.rows() == 0) throw std::invalid_argument("active_select: no candidates");
  const Vector losses = student.row_losses(candidates, student.one_hot_labels(labels), tasks);
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < losses.size(); ++i) {
    if (losses(i) > losses(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

std::vector<std::size_t> msss_select(const Matrix& x, std::size_t m, double fraction, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (m < 2) throw std::invalid_argument("msss_select: m must be at least 2");
  if (m > n) throw std::invalid_argument("msss_select: m = " + std::to_string(m) + " exceeds " + std::to_string(n));
  const std::size_t a = rng.index(n);
  std::size_t b = rng.index(n - 1);
  if (b >= a) ++b;
  return msss_select(x, m, fraction, {a, b}, rng);
}

std::vector<std::size_t> msss_select(const Matrix& x, std::size_t m, double fraction,
                                     std::pair<std::size_t, std::size_t> seeds, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (m < 2) throw std::invalid_argument("msss_select: m must be at least 2");
  if (m > n) throw std::invalid_argument("msss_select: m = " + std::to_string(m) + " exceeds " + std::to_string(n));
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("msss_select: fraction must lie in (0, 1]");
  if (seeds.first >= n || seeds.second >= n || seeds.first == seeds.second) {
    throw std::invalid_argument("msss_select: seeds must be two distinct valid rows");
  }
  std::vector<std::size_t> chosen{seeds.first, seeds.second};
  std::vector<bool> taken(n, false);
  taken[seeds.first] = taken[seeds.second] = true;
  Vector score = Vector::Zero(static_cast<Eigen::Index>(n));
  auto absorb = [&](std::size_t j) {
    const Vector sim = x * x.row(static_cast<Eigen::Index>(j)).transpose();
    score += sim.cwiseAbs2();
  };
  absorb(seeds.first);
  absorb(seeds.second);

  std::vector<std::size_t> remaining;
  while (chosen.size() < m) {
    remaining.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) remaining.push_back(i);
    }
    const auto want = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(remaining.size()) - 1e-9)));
    if (want < remaining.size()) {
      // Partial Fisher-Yates, then restore index order so ties resolve to
      // the lowest row.
      for (std::size_t i = 0; i < want; ++i) std::swap(remaining[i], remaining[i + rng.index(remaining.size() - i)]);
      remaining.resize(want);
      std::sort(remaining.begin(), remaining.end());
    }
    std::size_t best = remaining.front();
    for (std::size_t i : remaining) {
      if (score(static_cast<Eigen::Index>(i)) < score(static_cast<Eigen::Index>(best))) best = i;
    }
    chosen.push_back(best);
    taken[best] = true;
    absorb(best);
  }
  return chosen;
}

double sum_squared_similarity(const Matrix& x, std::span<const std::size_t> chosen) {
  double total = 0.0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    for (std::size_t j = i + 1; j < chosen.size(); ++j) {
      const double s = x.row(static_cast<Eigen::Index>(chosen[i])).dot(x.row(static_cast<Eigen::Index>(chosen[j])));
      total += s * s;
    }
  }
  return total;
}

Recollections active_diverse_select(const IndexBuffer& buffer, const Recollector& recollector,
                                    const PredictiveModel* student, std::size_t k, std::size_t n, Rng& rng) {
  if (k < 1 || n < 1) throw std::invalid_argument("active_diverse_select: k and n must be positive");
  Recollections pool = recollect(buffer, recollector, rng, k * n);
  if (n == 1) return pool;
  std::vector<std::size_t> keep;
  if (k == 1) {
    if (!student) throw std::invalid_argument("active_diverse_select: k = 1 ranks by difficulty and needs a student");
    keep.push_back(active_select(pool.x, pool.labels, pool.tasks, *student));
  } else {
    keep = msss_select(pool.x, k, 1.0, rng);
  }
  Recollections out;
  out.x.resize(static_cast<Eigen::Index>(keep.size()), pool.x.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = pool.x.row(static_cast<Eigen::Index>(keep[i]));
    out.labels.push_back(pool.labels[keep[i]]);
    out.tasks.push_back(pool.tasks[keep[i]]);
  }
  return out;
}

}  // namespace recollect
