// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small synthetic streams shared by the trainer tests.

#pragma once

#include "recollect/tasks.hpp"

#include <numeric>
#include <vector>

namespace recollect::fixture {

/// Blob images: the first n/2 rows train, the rest test. Labels cycle
/// with the row index, so both halves hold every class.
inline std::pair<Dataset, Dataset> blob_split(std::size_t classes, std::size_t side, std::size_t n,
                                              std::uint64_t seed) {
  const Dataset all = synth_blobs(classes, side, n, seed);
  std::vector<std::size_t> first(n / 2), second(n - n / 2);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), n / 2);
  return {all.subset(first), all.subset(second)};
}

/// Class-incremental blob stream with one shared output head, so a model
/// trained online forgets earlier classes outright.
inline TaskStream blob_stream(std::uint64_t seed, std::size_t tasks = 2, std::size_t classes = 4,
                              std::size_t n = 400) {
  const auto [train, test] = blob_split(classes, 8, n, seed);
  TaskStream s = make_class_incremental(train, test, tasks);
  s.heads.clear();
  return s;
}

}  // namespace recollect::fixture
