// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bounded store of packed latent codes. Storage accounting counts exactly k
// bits per item; labels and task ids are bookkeeping and are not counted.

#pragma once

#include "recollect/discrete_vae.hpp"
#include "recollect/rng.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <vector>

namespace recollect {

struct CodeGeometry {
  std::size_t c = 1;
  std::size_t l = 2;

  std::size_t bits() const { return c * bits_per_variable(l); }
  std::size_t bytes() const { return (bits() + 7) / 8; }
  bool operator==(const CodeGeometry&) const = default;
};

struct BufferItem {
  PackedCode code;
  std::uint16_t label = 0;
  std::uint16_t task = 0;
  bool operator==(const BufferItem&) const = default;
};

enum class EvictionPolicy : std::uint8_t { reservoir = 0, per_task_recent = 1 };

struct SampleBatch {
  std::vector<BufferItem> items;
  /// Set when a non-zero batch was requested from an empty buffer.
  bool buffer_empty = false;
};

struct StorageReport {
  std::uint64_t bits_used = 0;
  std::size_t items = 0;
  double effective_examples = 0.0;
};

class IndexBuffer {
 public:
  /// Keeps a uniform sample of everything inserted (Algorithm R).
  static IndexBuffer reservoir(CodeGeometry geometry, std::size_t capacity);
  /// Each task t owns floor(L/T) slots (the first L mod T tasks one more)
  /// and keeps its newest items.
  static IndexBuffer per_task_recent(CodeGeometry geometry, std::size_t capacity, std::size_t tasks);

  void insert(BufferItem item, Rng& rng);
  /// Uniform draws with replacement over the current contents.
  SampleBatch sample(std::size_t batch_size, Rng& rng) const;

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::size_t capacity() const { return capacity_; }
  std::size_t task_count() const { return tasks_; }
  std::uint64_t seen() const { return seen_; }
  void set_seen(std::uint64_t n) { seen_ = n; }
  EvictionPolicy policy() const { return policy_; }
  const CodeGeometry& geometry() const { return geometry_; }
  std::size_t task_quota(std::size_t task) const;

  /// Items in storage order: slot order for reservoir, task then age for
  /// per-task-recent.
  std::vector<BufferItem> items() const;
  const BufferItem& at(std::size_t i) const;
  /// Stored items of one task, oldest first.
  std::vector<BufferItem> task_items(std::size_t task) const;

  StorageReport storage_report(std::uint64_t input_bits_per_example) const;

  void save(const std::filesystem::path& path) const;
  static IndexBuffer load(const std::filesystem::path& path);

 private:
  IndexBuffer(CodeGeometry geometry, std::size_t capacity, EvictionPolicy policy, std::size_t tasks);
  void check_item(const BufferItem& item) const;

  CodeGeometry geometry_;
  std::size_t capacity_ = 0;
  EvictionPolicy policy_ = EvictionPolicy::reservoir;
  std::size_t tasks_ = 0;
  std::uint64_t seen_ = 0;
  std::vector<BufferItem> slots_;                // reservoir
  std::vector<std::deque<BufferItem>> by_task_;  // per-task-recent
};

}  // namespace recollect
