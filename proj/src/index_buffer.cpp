// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/index_buffer.hpp"

#include <algorithm>
#include <fstream>

namespace recollect {

IndexBuffer::IndexBuffer(CodeGeometry geometry, std::size_t capacity, EvictionPolicy policy, std::size_t tasks)
    : geometry_(geometry), capacity_(capacity), policy_(policy), tasks_(tasks) {
  if (geometry.c < 1 || geometry.l < 2) throw std::invalid_argument("IndexBuffer: invalid code geometry");
  if (policy == EvictionPolicy::per_task_recent) {
    if (tasks < 1) throw std::invalid_argument("IndexBuffer: per-task policy needs at least one task");
    by_task_.resize(tasks);
  }
}

IndexBuffer IndexBuffer::reservoir(CodeGeometry geometry, std::size_t capacity) {
  return IndexBuffer(geometry, capacity, EvictionPolicy::reservoir, 0);
}

IndexBuffer IndexBuffer::per_task_recent(CodeGeometry geometry, std::size_t capacity, std::size_t tasks) {
  return IndexBuffer(geometry, capacity, EvictionPolicy::per_task_recent, tasks);
}

std::size_t IndexBuffer::task_quota(std::size_t task) const {
  if (policy_ != EvictionPolicy::per_task_recent) return capacity_;
  return capacity_ / tasks_ + (task < capacity_ % tasks_ ? 1 : 0);
}

void IndexBuffer::check_item(const BufferItem& item) const {
  if (item.code.bytes.size() != geometry_.bytes()) {
    throw std::invalid_argument("IndexBuffer: code of " + std::to_string(item.code.bytes.size()) +
                                " bytes does not match geometry (" + std::to_string(geometry_.bytes()) + " bytes)");
  }
  if (policy_ == EvictionPolicy::per_task_recent && item.task >= tasks_) {
    throw std::invalid_argument("IndexBuffer: task id " + std::to_string(item.task) + " out of range");
  }
}

void IndexBuffer::insert(BufferItem item, Rng& rng) {
  check_item(item);
  if (policy_ == EvictionPolicy::reservoir) {
    if (slots_.size() < capacity_) {
      slots_.push_back(std::move(item));
    } else if (capacity_ > 0) {
      // Slot j < L is hit with probability L / (n + 1).
      const std::size_t j = rng.index(static_cast<std::size_t>(seen_) + 1);
      if (j < capacity_) slots_[j] = std::move(item);
    }
  } else {
    auto& q = by_task_[item.task];
    const std::size_t quota = task_quota(item.task);
    if (quota > 0) {
      if (q.size() == quota) q.pop_front();
      q.push_back(std::move(item));
    }
  }
  ++seen_;
}

std::size_t IndexBuffer::size() const {
  if (policy_ == EvictionPolicy::reservoir) return slots_.size();
  std::size_t n = 0;
  for (const auto& q : by_task_) n += q.size();
  return n;
}

const BufferItem& IndexBuffer::at(std::size_t i) const {
  if (policy_ == EvictionPolicy::reservoir) return slots_.at(i);
  for (const auto& q : by_task_) {
    if (i < q.size()) return q[i];
    i -= q.size();
  }
  throw std::out_of_range("IndexBuffer::at");
}

SampleBatch IndexBuffer::sample(std::size_t batch_size, Rng& rng) const {
  SampleBatch out;
  const std::size_t n = size();
  if (n == 0) {
    out.buffer_empty = batch_size > 0;
    return out;
  }
  out.items.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) out.items.push_back(at(rng.index(n)));
  return out;
}

std::vector<BufferItem> IndexBuffer::items() const {
  if (policy_ == EvictionPolicy::reservoir) return slots_;
  std::vector<BufferItem> out;
  for (const auto& q : by_task_) out.insert(out.end(), q.begin(), q.end());
  return out;
}

std::vector<BufferItem> IndexBuffer::task_items(std::size_t task) const {
  if (policy_ == EvictionPolicy::per_task_recent) {
    if (task >= tasks_) return {};
    return {by_task_[task].begin(), by_task_[task].end()};
  }
  std::vector<BufferItem> out;
  std::copy_if(slots_.begin(), slots_.end(), std::back_inserter(out),
               [task](const BufferItem& it) { return it.task == task; });
  return out;
}

StorageReport IndexBuffer::storage_report(std::uint64_t input_bits_per_example) const {
  if (input_bits_per_example == 0) throw std::invalid_argument("storage_report: input bits must be positive");
  StorageReport r;
  r.items = size();
  r.bits_used = static_cast<std::uint64_t>(r.items) * geometry_.bits();
  r.effective_examples = static_cast<double>(r.bits_used) / static_cast<double>(input_bits_per_example);
  return r;
}

namespace {

constexpr char kBufferMagic[4] = {'S', 'R', 'M', 'B'};
constexpr std::uint16_t kBufferVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("buffer file truncated");
  return v;
}

}  // namespace

void IndexBuffer::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto all = items();
  os.write(kBufferMagic, 4);
  put<std::uint16_t>(os, kBufferVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(geometry_.c));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(geometry_.l));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(geometry_.bits()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(capacity_));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(all.size()));
  // Low byte: policy kind. Upper 24 bits: task count (per-task policy).
  put<std::uint32_t>(os, static_cast<std::uint32_t>(policy_) | static_cast<std::uint32_t>(tasks_ << 8));
  for (const auto& it : all) {
    os.write(reinterpret_cast<const char*>(it.code.bytes.data()), static_cast<std::streamsize>(it.code.bytes.size()));
    put<std::uint16_t>(os, it.label);
    put<std::uint16_t>(os, it.task);
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

IndexBuffer IndexBuffer::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kBufferMagic)) throw FormatError("not a buffer file (bad magic): " + path.string());
  if (get<std::uint16_t>(is) != kBufferVersion) throw FormatError("unsupported buffer file version");
  CodeGeometry g;
  g.c = get<std::uint32_t>(is);
  g.l = get<std::uint32_t>(is);
  const std::uint32_t k = get<std::uint32_t>(is);
  if (g.c < 1 || g.l < 2 || k != g.bits()) throw FormatError("buffer header has inconsistent code geometry");
  const std::uint32_t capacity = get<std::uint32_t>(is);
  const std::uint32_t count = get<std::uint32_t>(is);
  const std::uint32_t policy_word = get<std::uint32_t>(is);
  const auto kind = policy_word & 0xffu;
  const std::size_t tasks = policy_word >> 8;
  if (kind > 1) throw FormatError("unknown eviction policy");
  if (count > capacity) throw FormatError("buffer holds more items than its capacity");
  IndexBuffer buf = kind == 0 ? reservoir(g, capacity) : per_task_recent(g, capacity, tasks);
  for (std::uint32_t i = 0; i < count; ++i) {
    BufferItem it;
    it.code.bytes.resize(g.bytes());
    is.read(reinterpret_cast<char*>(it.code.bytes.data()), static_cast<std::streamsize>(it.code.bytes.size()));
    if (!is) throw FormatError("buffer file truncated");
    unpack(it.code, g.c, g.l);  // rejects set pad bits
    it.label = get<std::uint16_t>(is);
    it.task = get<std::uint16_t>(is);
    if (kind == 0) {
      buf.slots_.push_back(std::move(it));
    } else {
      if (it.task >= tasks) throw FormatError("buffer record has out-of-range task id");
      auto& q = buf.by_task_[it.task];
      if (q.size() >= buf.task_quota(it.task)) throw FormatError("buffer records exceed a task quota");
      q.push_back(std::move(it));
    }
  }
  buf.seen_ = count;
  return buf;
}

}  // namespace recollect
