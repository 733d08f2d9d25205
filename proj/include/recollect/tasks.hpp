// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "recollect/discrete_vae.hpp"
#include "recollect/predictive.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace recollect {

/// Raw IDX payload: dimension sizes and unsigned bytes.
struct IdxArray {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> data;
};

/// Reads an IDX file of unsigned bytes (magic 0x00000803 images or
/// 0x00000801 labels, big-endian header).
IdxArray load_idx(const std::filesystem::path& path);

struct Dataset {
  Matrix x;  // one image per row, pixels in [0, 1]
  std::vector<int> y;
  ImageShape shape;
  std::size_t classes = 0;

  std::size_t size() const { return y.size(); }
  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset head(std::size_t n) const;
};

/// Pairs an image file with a label file; pixels divided by 255.
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Standard MNIST file names under `dir` (train or t10k).
Dataset load_mnist(const std::filesystem::path& dir, bool train);

struct Task {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
  double angle = 0.0;
};

struct TaskStream {
  std::vector<Task> tasks;
  ImageShape shape;
  std::size_t classes = 0;
  /// Class range per task when tasks own disjoint labels; empty if shared.
  std::vector<HeadGroup> heads;

  std::size_t task_count() const { return tasks.size(); }
  std::size_t total_examples() const;
};

/// Rotates an H x W single-channel image about its centre by `degrees`
/// (bilinear interpolation, zeros outside the source).
Matrix rotate_image(const Eigen::Ref<const Eigen::RowVectorXd>& image, std::size_t height, std::size_t width,
                    double degrees);

enum class AngleMode { random, evenly_spaced };

/// T tasks, each a fixed rotation of a disjoint `per_task` subset of `train`;
/// every task's test set is all of `test` under the same rotation.
TaskStream make_rotations(const Dataset& train, const Dataset& test, std::size_t tasks, std::size_t per_task,
                          std::uint64_t seed, AngleMode mode = AngleMode::random);

/// Contiguous class blocks; the first (classes mod T) tasks get one extra.
TaskStream make_class_incremental(const Dataset& train, const Dataset& test, std::size_t tasks);

/// Gaussian blobs around a random binary prototype per class, rendered as
/// side x side images clipped to [0, 1].
Dataset synth_blobs(std::size_t classes, std::size_t side, std::size_t n, std::uint64_t seed, double sigma = 0.1);

}  // namespace recollect
