// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "fixtures.hpp"
#include "recollect/replay_trainer.hpp"

#include <filesystem>

using namespace recollect;

namespace {

VaeConfig toy_vae_config(const TaskStream& stream) {
  VaeConfig vc;
  vc.c = 8;
  vc.l = 4;
  vc.arch = Architecture::mlp;
  vc.hidden = 32;
  vc.input = stream.shape;
  return vc;
}

std::filesystem::path temp_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "recollect_replay_test" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("configuration checks") {
  ReplayConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ReplayConfig{};
  cfg.beta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ReplayConfig{};
  cfg.n_sets = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ReplayConfig{};
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  Rng rng(1);
  auto model = PredictiveModel::mlp(64, {8}, 4, rng);
  RawRecollector raw(64);
  auto buf = IndexBuffer::reservoir(raw.geometry(), 5);
  CHECK_THROWS_AS(ReplayTrainer(model, nullptr, &buf, ReplayConfig{}), std::invalid_argument);
  RawRecollector other(32);
  CHECK_THROWS_AS(ReplayTrainer(model, &other, &buf, ReplayConfig{}), std::invalid_argument);
  ReplayTrainer trainer(model, &raw, &buf, ReplayConfig{});
  CHECK_THROWS_AS(trainer.run(TaskStream{}), std::invalid_argument);
}

TEST_CASE("empty buffer sets hold only the incoming example") {
  const TaskStream stream = fixture::blob_stream(1);
  Rng rng(2);
  DiscreteVae vae(toy_vae_config(stream), rng);
  VaeRecollector rec(vae);
  auto buf = IndexBuffer::reservoir(rec.geometry(), 10);
  const auto x = stream.tasks[0].train_x.row(0);
  const auto sets = draw_recollections(x, 3, 0, &buf, &rec, 4, 5, false, rng);
  REQUIRE(sets.size() == 4);
  for (const auto& s : sets) {
    REQUIRE(s.x.rows() == 1);
    CHECK(s.x.row(0) == x);
    CHECK(s.labels == std::vector<int>{3});
    CHECK(s.tasks == std::vector<int>{0});
  }
  const auto none = draw_recollections(x, 3, 0, nullptr, nullptr, 2, 5, false, rng);
  CHECK(none.size() == 2);
  CHECK(none[0].x.rows() == 1);
}

TEST_CASE("recollection sets append the incoming example last") {
  const TaskStream stream = fixture::blob_stream(3);
  RawRecollector raw(64);
  auto buf = IndexBuffer::reservoir(raw.geometry(), 10);
  Rng rng(4);
  const Task& t = stream.tasks[0];
  for (Eigen::Index i = 0; i < 10; ++i) {
    auto codes = raw.store(Matrix(t.train_x.row(i)), rng);
    buf.insert({codes.front(), static_cast<std::uint16_t>(t.train_y[static_cast<std::size_t>(i)]), 0}, rng);
  }
  const auto x = stream.tasks[1].train_x.row(0);
  const auto sets = draw_recollections(x, 2, 1, &buf, &raw, 3, 6, false, rng);
  for (const auto& s : sets) {
    REQUIRE(s.x.rows() == 7);
    CHECK(s.x.row(6) == x);
    CHECK(s.labels.back() == 2);
    CHECK(s.tasks.back() == 1);
    for (std::size_t i = 0; i < 6; ++i) CHECK(s.tasks[i] == 0);
  }
}

TEST_CASE("stabilization with no sets leaves the module unchanged") {
  const TaskStream stream = fixture::blob_stream(5);
  Rng rng(6);
  DiscreteVae vae(toy_vae_config(stream), rng);
  VaeRecollector rec(vae);
  const auto before = vae.parameters().fingerprint();
  srm_stabilize({}, rec, 1.0, rng);
  CHECK(vae.parameters().fingerprint() == before);
}

TEST_CASE("all sets are decoded before the first module update") {
  const TaskStream stream = fixture::blob_stream(7);
  Rng init(8);
  auto model = PredictiveModel::mlp(64, {16}, 4, init);
  DiscreteVae vae(toy_vae_config(stream), init);
  VaeRecollector rec(vae);
  auto buf = IndexBuffer::reservoir(rec.geometry(), 30);
  ReplayConfig cfg;
  cfg.n_sets = 4;
  cfg.batch = 5;
  cfg.beta = 0.5;
  cfg.audit_decodes = true;
  ReplayTrainer trainer(model, &rec, &buf, cfg);
  trainer.run(stream, 40);
  const auto before = vae.decoder_parameters().fingerprint();
  trainer.run(stream, 1);
  const auto& fps = trainer.last_decode_fingerprints();
  REQUIRE(fps.size() == 4);
  for (auto fp : fps) CHECK(fp == before);
  CHECK(vae.decoder_parameters().fingerprint() != before);
}

TEST_CASE("the buffer is written once per example") {
  const TaskStream stream = fixture::blob_stream(9);
  Rng init(10);
  auto model = PredictiveModel::mlp(64, {16}, 4, init);
  RawRecollector raw(64);
  auto buf = IndexBuffer::reservoir(raw.geometry(), 1000);
  ReplayConfig cfg;
  cfg.batch = 3;
  train_stream(stream, model, &raw, &buf, cfg);
  CHECK(buf.seen() == stream.total_examples());
  CHECK(buf.size() == stream.total_examples());
  std::size_t index = 0;
  for (std::size_t t = 0; t < stream.task_count(); ++t)
    for (int y : stream.tasks[t].train_y) {
      CHECK(buf.at(index).label == y);
      CHECK(buf.at(index).task == t);
      ++index;
    }
}

TEST_CASE("a zero-capacity buffer is exactly online SGD") {
  const TaskStream stream = fixture::blob_stream(11);
  Rng ia(12), ib(12);
  auto replay_model = PredictiveModel::mlp(64, {16}, 4, ia);
  auto sgd_model = PredictiveModel::mlp(64, {16}, 4, ib);
  RawRecollector raw(64);
  auto buf = IndexBuffer::reservoir(raw.geometry(), 0);
  ReplayConfig cfg;
  cfg.alpha = 0.2;
  cfg.seed = 13;
  train_stream(stream, replay_model, &raw, &buf, cfg);
  CHECK(buf.empty());

  for (std::size_t t = 0; t < stream.task_count(); ++t) {
    const Task& task = stream.tasks[t];
    const int tid[1] = {static_cast<int>(t)};
    for (Eigen::Index i = 0; i < task.train_x.rows(); ++i) {
      const int label[1] = {task.train_y[static_cast<std::size_t>(i)]};
      sgd_model.train_step(Matrix(task.train_x.row(i)), std::span<const int>(label), tid, cfg.alpha);
    }
  }
  CHECK(replay_model.parameters().fingerprint() == sgd_model.parameters().fingerprint());
}

TEST_CASE("runs are deterministic given the seed") {
  const TaskStream stream = fixture::blob_stream(14);
  auto run = [&]() {
    Rng init(15);
    auto model = PredictiveModel::mlp(64, {16}, 4, init);
    DiscreteVae vae(toy_vae_config(stream), init);
    VaeRecollector rec(vae);
    auto buf = IndexBuffer::reservoir(rec.geometry(), 20);
    ReplayConfig cfg;
    cfg.batch = 5;
    cfg.seed = 16;
    const RetentionReport r = train_stream(stream, model, &rec, &buf, cfg);
    return std::make_tuple(r.accuracies, model.parameters().fingerprint(), vae.parameters().fingerprint(),
                           buf.items());
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoint and resume match an uninterrupted run") {
  const TaskStream stream = fixture::blob_stream(17);
  ReplayConfig cfg;
  cfg.batch = 4;
  cfg.n_sets = 2;
  cfg.seed = 18;

  Rng ia(19);
  auto full_model = PredictiveModel::mlp(64, {16}, 4, ia);
  DiscreteVae full_vae(toy_vae_config(stream), ia);
  VaeRecollector full_rec(full_vae);
  auto full_buf = IndexBuffer::reservoir(full_rec.geometry(), 25);
  ReplayTrainer full(full_model, &full_rec, &full_buf, cfg);
  full.run(stream);

  const auto dir = temp_dir("resume");
  {
    Rng ib(19);
    auto model = PredictiveModel::mlp(64, {16}, 4, ib);
    DiscreteVae vae(toy_vae_config(stream), ib);
    VaeRecollector rec(vae);
    auto buf = IndexBuffer::reservoir(rec.geometry(), 25);
    ReplayTrainer first(model, &rec, &buf, cfg);
    first.run(stream, 150);  // crosses into the second task
    CHECK(first.position() == StreamPosition{1, 50});
    first.save_checkpoint(dir);
  }
  Rng ic(99);  // different init: everything must come from the checkpoint
  auto model = PredictiveModel::mlp(64, {16}, 4, ic);
  DiscreteVae vae(toy_vae_config(stream), ic);
  VaeRecollector rec(vae);
  auto buf = IndexBuffer::reservoir(rec.geometry(), 25);
  ReplayTrainer second(model, &rec, &buf, cfg);
  second.load_checkpoint(dir);
  CHECK(second.position() == StreamPosition{1, 50});
  second.run(stream);
  CHECK(second.finished(stream));
  CHECK(model.parameters().fingerprint() == full_model.parameters().fingerprint());
  CHECK(vae.parameters().fingerprint() == full_vae.parameters().fingerprint());
  CHECK(buf.items() == full_buf.items());
  CHECK(buf.seen() == full_buf.seen());
  std::filesystem::remove_all(dir);
}

TEST_CASE("a small buffer beats online learning on the toy stream") {
  double replay_total = 0.0, online_total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TaskStream stream = fixture::blob_stream(200 + seed);
    Rng ia(seed), ib(seed);
    auto replay_model = PredictiveModel::mlp(64, {32}, 4, ia);
    auto online_model = PredictiveModel::mlp(64, {32}, 4, ib);
    DiscreteVae vae(toy_vae_config(stream), ia);
    VaeRecollector rec(vae);
    auto buf = IndexBuffer::reservoir(rec.geometry(), 20);
    ReplayConfig cfg;
    cfg.alpha = 0.1;
    cfg.beta = 1.0;
    cfg.batch = 5;
    cfg.seed = seed;
    replay_total += train_stream(stream, replay_model, &rec, &buf, cfg).mean;
    online_total += train_stream(stream, online_model, nullptr, nullptr, cfg).mean;
  }
  MESSAGE("replay " << replay_total / 5 << " online " << online_total / 5);
  CHECK(replay_total / 5 > online_total / 5 + 0.10);
}

TEST_CASE("more stabilization sets lower the final distortion") {
  double l1[2] = {0.0, 0.0};
  const std::size_t sets[2] = {1, 3};
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto [train, test] = fixture::blob_split(4, 8, 800, 300 + seed);
    const TaskStream stream = make_class_incremental(train, test, 2);
    for (int k = 0; k < 2; ++k) {
      Rng init(seed);
      auto model = PredictiveModel::mlp(64, {16}, 4, init);
      DiscreteVae vae(toy_vae_config(stream), init);
      VaeRecollector rec(vae);
      auto buf = IndexBuffer::reservoir(rec.geometry(), 50);
      ReplayConfig cfg;
      cfg.beta = 1.0;
      cfg.batch = 5;
      cfg.n_sets = sets[k];
      cfg.seed = seed;
      train_stream(stream, model, &rec, &buf, cfg);
      l1[k] += vae.reconstruction_l1(train.x);
    }
  }
  MESSAGE("N=1 " << l1[0] / 3 << " N=3 " << l1[1] / 3);
  CHECK(l1[1] < l1[0]);
}

TEST_CASE("retention examples") {
  // Well separated blobs: a trained classifier is perfect on every task.
  const auto [train, test] = fixture::blob_split(4, 8, 400, 20);
  Rng rng(21);
  auto model = PredictiveModel::mlp(64, {16}, 4, rng);
  const auto tasks = same_task(train.size(), 0);
  for (int epoch = 0; epoch < 300; ++epoch) model.train_step(train.x, train.y, tasks, 0.5);
  const double single = model.accuracy(test.x, test.y, 0);
  REQUIRE(single == 1.0);

  TaskStream same;
  for (int t = 0; t < 3; ++t) same.tasks.push_back({train.x, train.y, test.x, test.y, 0.0});
  const RetentionReport r = retention(model, same);
  CHECK(r.accuracies == std::vector<double>(3, 1.0));
  CHECK(r.mean == 1.0);

  // Identical tasks under a weaker model: every entry equals the single-task
  // accuracy.
  Rng weak_rng(22);
  auto weak = PredictiveModel::mlp(64, {4}, 4, weak_rng);
  const double weak_single = weak.accuracy(test.x, test.y, 0);
  const RetentionReport w = retention(weak, same);
  for (double a : w.accuracies) CHECK(a == weak_single);
  CHECK(w.mean == doctest::Approx(weak_single));

  TaskStream empty_test;
  empty_test.tasks.push_back({train.x, train.y, Matrix(0, 64), {}, 0.0});
  CHECK_THROWS_AS(retention(model, empty_test), std::invalid_argument);
}
