// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/replay_trainer.hpp"

#include <fstream>
#include <stdexcept>

namespace recollect {

void ReplayConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (n_sets < 1) throw std::invalid_argument("need at least one recollection set");
  if (batch < 1) throw std::invalid_argument("replay batch must be at least 1");
}

std::vector<RecollectionSet> draw_recollections(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task,
                                                const IndexBuffer* buffer, Recollector* recollector,
                                                std::size_t n_sets, std::size_t batch, bool audit, Rng& rng) {
  std::vector<RecollectionSet> sets(n_sets);
  for (auto& set : sets) {
    std::vector<BufferItem> items;
    if (buffer && recollector && !buffer->empty()) items = buffer->sample(batch, rng).items;
    if (audit && recollector) set.decoder_fingerprint = recollector->decoder_fingerprint();
    const Matrix past = items.empty() ? Matrix(0, x.size()) : recollector->recall(items);
    set.x.resize(past.rows() + 1, x.size());
    set.x.topRows(past.rows()) = past;
    set.x.row(past.rows()) = x;
    for (const auto& it : items) {
      set.labels.push_back(it.label);
      set.tasks.push_back(it.task);
    }
    set.labels.push_back(label);
    set.tasks.push_back(task);
  }
  return sets;
}

void srm_stabilize(std::span<const RecollectionSet> sets, Recollector& recollector, double beta, Rng& rng) {
  if (!recollector.trainable()) return;
  for (const auto& set : sets) recollector.train_step(set.x, beta, rng);
}

RetentionReport retention(const PredictiveModel& model, const TaskStream& stream) {
  RetentionReport r;
  for (std::size_t t = 0; t < stream.task_count(); ++t) {
    const Task& task = stream.tasks[t];
    if (task.test_y.empty()) throw std::invalid_argument("task " + std::to_string(t) + " has an empty test set");
    r.accuracies.push_back(model.accuracy(task.test_x, task.test_y, static_cast<int>(t)));
    r.mean += r.accuracies.back();
  }
  if (!r.accuracies.empty()) r.mean /= static_cast<double>(r.accuracies.size());
  return r;
}

StreamTrainer::StreamTrainer(PredictiveModel& model, Recollector* recollector, IndexBuffer* buffer,
                             ReplayConfig config)
    : model_(model), rec_(recollector), buffer_(buffer), cfg_(config), rng_(config.seed) {
  cfg_.validate();
  if (buffer_ && !rec_) throw std::invalid_argument("a buffer needs a recollector to encode into it");
  if (buffer_ && !(buffer_->geometry() == rec_->geometry())) {
    throw std::invalid_argument("buffer code geometry does not match the recollector");
  }
}

std::vector<RecollectionSet> StreamTrainer::stabilize(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label,
                                                      int task) {
  auto sets = draw_recollections(x, label, task, buffer_, rec_, cfg_.n_sets, cfg_.batch, cfg_.audit_decodes, rng_);
  last_fps_.clear();
  if (cfg_.audit_decodes) {
    for (const auto& s : sets) last_fps_.push_back(s.decoder_fingerprint);
  }
  if (rec_) srm_stabilize(sets, *rec_, cfg_.beta, rng_);
  return sets;
}

void StreamTrainer::write_to_buffer(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task) {
  if (!buffer_) return;
  auto codes = rec_->store(Matrix(x), rng_);
  buffer_->insert({std::move(codes.front()), static_cast<std::uint16_t>(label), static_cast<std::uint16_t>(task)},
                  rng_);
}

void ReplayTrainer::observe(const Eigen::Ref<const Eigen::RowVectorXd>& x, int label, int task) {
  const auto sets = stabilize(x, label, task);
  model_.train_step(sets.front().x, std::span<const int>(sets.front().labels), sets.front().tasks, cfg_.alpha);
  write_to_buffer(x, label, task);
}

void StreamTrainer::run(const TaskStream& stream, std::size_t max_examples) {
  if (stream.task_count() == 0 || stream.total_examples() == 0) throw std::invalid_argument("empty task stream");
  std::size_t done = 0;
  while (done < max_examples && !finished(stream)) {
    const Task& task = stream.tasks[pos_.task];
    if (pos_.index < task.train_y.size()) {
      observe(task.train_x.row(static_cast<Eigen::Index>(pos_.index)), task.train_y[pos_.index],
              static_cast<int>(pos_.task));
      ++pos_.index;
      ++done;
    }
    if (pos_.index >= task.train_y.size()) {
      ++pos_.task;
      pos_.index = 0;
    }
  }
}

bool StreamTrainer::finished(const TaskStream& stream) const { return pos_.task >= stream.task_count(); }

void StreamTrainer::save_checkpoint(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "classifier.bin", std::ios::binary);
    model_.parameters().write(os);
    if (!os) throw std::runtime_error("failed to write classifier checkpoint");
  }
  if (rec_) {
    std::ofstream os(dir / "recollector.bin", std::ios::binary);
    rec_->parameters().write(os);
    if (!os) throw std::runtime_error("failed to write recollector checkpoint");
  }
  if (buffer_) buffer_->save(dir / "buffer.bin");
  std::ofstream rs(dir / "rng.txt");
  rs << rng_.state();
  std::ofstream ms(dir / "manifest.txt");
  ms << "task=" << pos_.task << "\nindex=" << pos_.index << "\nseen=" << (buffer_ ? buffer_->seen() : 0)
     << "\nalpha=" << cfg_.alpha << "\nbeta=" << cfg_.beta << "\nn_sets=" << cfg_.n_sets
     << "\nbatch=" << cfg_.batch << "\nseed=" << cfg_.seed << "\n";
  if (!ms || !rs) throw std::runtime_error("failed to write checkpoint manifest");
}

void StreamTrainer::load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "manifest.txt");
  if (!ms) throw std::runtime_error("missing checkpoint manifest in " + dir.string());
  std::uint64_t seen = 0;
  std::string line;
  while (std::getline(ms, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "task") pos_.task = std::stoull(value);
    if (key == "index") pos_.index = std::stoull(value);
    if (key == "seen") seen = std::stoull(value);
  }
  {
    std::ifstream is(dir / "classifier.bin", std::ios::binary);
    if (!is) throw std::runtime_error("missing classifier checkpoint");
    ParameterSet p = model_.parameters();
    p.read(is);
  }
  if (rec_) {
    std::ifstream is(dir / "recollector.bin", std::ios::binary);
    if (!is) throw std::runtime_error("missing recollector checkpoint");
    ParameterSet p = rec_->parameters();
    p.read(is);
  }
  if (buffer_) {
    *buffer_ = IndexBuffer::load(dir / "buffer.bin");
    buffer_->set_seen(seen);
  }
  std::ifstream rs(dir / "rng.txt");
  std::string state((std::istreambuf_iterator<char>(rs)), std::istreambuf_iterator<char>());
  rng_.set_state(state);
}

RetentionReport train_stream(const TaskStream& stream, PredictiveModel& model, Recollector* recollector,
                             IndexBuffer* buffer, const ReplayConfig& config) {
  ReplayTrainer trainer(model, recollector, buffer, config);
  trainer.run(stream);
  return retention(model, stream);
}

}  // namespace recollect
