// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-pass continual training over a task stream. Each incoming example
// first stabilizes the recollection module on N batches of decoded past
// codes (all decoded before any update), then trains the classifier on the
// first batch, then is encoded into the buffer.

#pragma once

#include "recollect/index_buffer.hpp"
#include "recollect/predictive.hpp"
#include "recollect/recollection.hpp"
#include "recollect/tasks.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

namespace recollect {

struct ReplayConfig {
  double alpha = 0.1;  // classifier learning rate
  double beta = 0.1;   // recollection module learning rate
  std::size_t n_sets = 3;
  std::size_t batch = 25;
  std::uint64_t seed = 0;
  /// Hash the decoder before every decode; used by tests of the
  /// decode-before-update ordering.
  bool audit_decodes = false;

  void validate() const;
};

/// Decoded past examples plus the incoming one as the last row.
struct RecollectionSet {
  Matrix x;
  std::vector<int> labels;
  std::vector<int> tasks;
  std::uint64_t decoder_fingerprint = 0;
};

/// Draws `n_sets` recollection sets of up to `batch` decoded buffer items
/// each. `buffer` and `recollector` may be null (no replay).
std::vector<RecollectionSet> draw_recollections(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task,
                                                const IndexBuffer* buffer, Recollector* recollector,
                                                std::size_t n_sets, std::size_t batch, bool audit, Rng& rng);

/// One reconstruction step per set, in order.
void srm_stabilize(std::span<const RecollectionSet> sets, Recollector& recollector, double beta, Rng& rng);

struct RetentionReport {
  std::vector<double> accuracies;
  double mean = 0.0;
};

RetentionReport retention(const PredictiveModel& model, const TaskStream& stream);

struct StreamPosition {
  std::size_t task = 0;
  std::size_t index = 0;
  bool operator==(const StreamPosition&) const = default;
};

/// Shared driver: iteration, position tracking and checkpoints. Subclasses
/// define what happens to one example.
class StreamTrainer {
 public:
  StreamTrainer(PredictiveModel& model, Recollector* recollector, IndexBuffer* buffer, ReplayConfig config);
  virtual ~StreamTrainer() = default;

  virtual void observe(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task) = 0;

  /// Continues from position() for at most `max_examples` examples.
  void run(const TaskStream& stream, std::size_t max_examples = std::numeric_limits<std::size_t>::max());
  bool finished(const TaskStream& stream) const;
  const StreamPosition& position() const { return pos_; }

  /// Writes classifier, recollection module, buffer, RNG state and stream
  /// position under `dir`.
  void save_checkpoint(const std::filesystem::path& dir);
  /// Restores state into already-constructed components of the same shape.
  void load_checkpoint(const std::filesystem::path& dir);

  const ReplayConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }
  /// Fingerprints recorded for the most recent example (audit mode).
  const std::vector<std::uint64_t>& last_decode_fingerprints() const { return last_fps_; }

 protected:
  PredictiveModel& model_;
  Recollector* rec_;
  IndexBuffer* buffer_;
  ReplayConfig cfg_;
  Rng rng_;
  StreamPosition pos_;
  std::vector<std::uint64_t> last_fps_;

  /// Steps 1-2 shared by both trainers; returns the sets.
  std::vector<RecollectionSet> stabilize(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task);
  void write_to_buffer(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task);
};

class ReplayTrainer final : public StreamTrainer {
 public:
  using StreamTrainer::StreamTrainer;
  void observe(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task) override;
};

/// Convenience wrapper: fresh trainer, whole stream, retention.
RetentionReport train_stream(const TaskStream& stream, PredictiveModel& model, Recollector* recollector,
                             IndexBuffer* buffer, const ReplayConfig& config);

}  // namespace recollect
