// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "recollect/index_buffer.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

using namespace recollect;

namespace {

// Item whose code encodes `id` so it can be identified after eviction.
BufferItem make_item(const CodeGeometry& g, std::uint32_t id, std::uint16_t task = 0) {
  LatentCode code;
  code.indices.assign(g.c, 0);
  for (std::size_t i = 0; i < g.c && id > 0; ++i, id /= static_cast<std::uint32_t>(g.l)) {
    code.indices[i] = id % static_cast<std::uint32_t>(g.l);
  }
  return {pack(code, g.c, g.l), static_cast<std::uint16_t>(id % 10), task};
}

std::uint32_t item_id(const CodeGeometry& g, const BufferItem& it) {
  const LatentCode code = unpack(it.code, g.c, g.l);
  std::uint32_t id = 0;
  for (std::size_t i = g.c; i-- > 0;) id = id * static_cast<std::uint32_t>(g.l) + code.indices[i];
  return id;
}

std::filesystem::path temp_file(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "recollect_buffer_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("reservoir keeps everything until full") {
  const CodeGeometry g{4, 16};
  auto buf = IndexBuffer::reservoir(g, 10);
  Rng rng(1);
  for (std::uint32_t i = 0; i < 10; ++i) buf.insert(make_item(g, i), rng);
  REQUIRE(buf.size() == 10);
  for (std::uint32_t i = 0; i < 10; ++i) CHECK(item_id(g, buf.at(i)) == i);
  for (std::uint32_t i = 10; i < 1000; ++i) {
    buf.insert(make_item(g, i), rng);
    CHECK(buf.size() == std::min<std::size_t>(i + 1, 10));
  }
  CHECK(buf.seen() == 1000u);
}

TEST_CASE("reservoir inclusion is uniform") {
  // L=1 over a 50-item stream: each item should be the survivor with
  // probability 1/50.
  const CodeGeometry g{8, 2};
  const std::size_t n = 50, trials = 20000;
  std::vector<std::size_t> hits(n, 0);
  Rng rng(2);
  for (std::size_t t = 0; t < trials; ++t) {
    auto buf = IndexBuffer::reservoir(g, 1);
    for (std::uint32_t i = 0; i < n; ++i) buf.insert(make_item(g, i), rng);
    ++hits[item_id(g, buf.at(0))];
  }
  const double p = 1.0 / n;
  const double sigma = std::sqrt(p * (1 - p) / trials);
  for (std::size_t h : hits) CHECK(std::abs(static_cast<double>(h) / trials - p) < 4 * sigma);
}

TEST_CASE("per-task-recent quotas") {
  const CodeGeometry g{8, 4};
  Rng rng(3);
  auto buf = IndexBuffer::per_task_recent(g, 20, 20);
  for (std::uint16_t t = 0; t < 20; ++t)
    for (std::uint32_t i = 0; i < 5; ++i) buf.insert(make_item(g, 100u * t + i, t), rng);
  CHECK(buf.size() == 20);
  for (std::uint16_t t = 0; t < 20; ++t) {
    const auto items = buf.task_items(t);
    REQUIRE(items.size() == 1);
    CHECK(item_id(g, items[0]) == 100u * t + 4u);
  }

  // Remainder slots go to the earliest tasks.
  auto uneven = IndexBuffer::per_task_recent(g, 11, 3);
  CHECK(uneven.task_quota(0) == 4);
  CHECK(uneven.task_quota(1) == 4);
  CHECK(uneven.task_quota(2) == 3);

  // Filling a later task never evicts an earlier one.
  auto iso = IndexBuffer::per_task_recent(g, 6, 2);
  for (std::uint32_t i = 0; i < 3; ++i) iso.insert(make_item(g, i, 0), rng);
  for (std::uint32_t i = 0; i < 50; ++i) iso.insert(make_item(g, 1000 + i, 1), rng);
  const auto t0 = iso.task_items(0);
  REQUIRE(t0.size() == 3);
  for (std::uint32_t i = 0; i < 3; ++i) CHECK(item_id(g, t0[i]) == i);
  const auto t1 = iso.task_items(1);
  REQUIRE(t1.size() == 3);
  CHECK(item_id(g, t1.back()) == 1049u);
  CHECK(item_id(g, t1.front()) == 1047u);
  CHECK_THROWS_AS(iso.insert(make_item(g, 0, 2), rng), std::invalid_argument);
}

TEST_CASE("insert rejects a geometry mismatch") {
  auto buf = IndexBuffer::reservoir({4, 16}, 5);
  Rng rng(4);
  CHECK_THROWS_AS(buf.insert(make_item({20, 16}, 1), rng), std::invalid_argument);
}

TEST_CASE("sample") {
  const CodeGeometry g{8, 4};
  Rng rng(5);
  auto buf = IndexBuffer::reservoir(g, 10);

  const SampleBatch none = buf.sample(4, rng);
  CHECK(none.items.empty());
  CHECK(none.buffer_empty);
  CHECK_FALSE(buf.sample(0, rng).buffer_empty);

  buf.insert(make_item(g, 7), rng);
  const SampleBatch single = buf.sample(5, rng);
  REQUIRE(single.items.size() == 5);
  for (const auto& it : single.items) CHECK(item_id(g, it) == 7u);

  for (std::uint32_t i = 1; i < 10; ++i) buf.insert(make_item(g, 100 + i), rng);
  CHECK(buf.sample(0, rng).items.empty());
  std::map<std::uint32_t, std::size_t> counts;
  const std::size_t draws = 100000;
  for (const auto& it : buf.sample(draws, rng).items) ++counts[item_id(g, it)];
  REQUIRE(counts.size() == 10);
  double stat = 0.0;
  for (const auto& [id, c] : counts) {
    const double e = draws / 10.0;
    stat += (c - e) * (c - e) / e;
  }
  boost::math::chi_squared dist(9);
  CHECK(boost::math::cdf(boost::math::complement(dist, stat)) > 0.01);
}

TEST_CASE("storage_report") {
  Rng rng(6);
  auto big = IndexBuffer::reservoir({139, 8}, 3000);
  for (std::uint32_t i = 0; i < 3000; ++i) big.insert(make_item({139, 8}, i), rng);
  StorageReport r = big.storage_report(6272);
  CHECK(r.items == 3000);
  CHECK(r.bits_used == 1251000u);
  CHECK(r.effective_examples == doctest::Approx(1251000.0 / 6272.0));
  CHECK(r.effective_examples == doctest::Approx(199.5).epsilon(1e-3));

  auto mid = IndexBuffer::reservoir({104, 4}, 3000);
  for (std::uint32_t i = 0; i < 3000; ++i) mid.insert(make_item({104, 4}, i), rng);
  r = mid.storage_report(6272);
  CHECK(r.bits_used == 624000u);
  CHECK(r.effective_examples == doctest::Approx(99.5).epsilon(1e-3));

  r = IndexBuffer::reservoir({104, 4}, 3000).storage_report(6272);
  CHECK(r.bits_used == 0u);
  CHECK(r.effective_examples == 0.0);
  CHECK_THROWS_AS(mid.storage_report(0), std::invalid_argument);
}

TEST_CASE("save and load") {
  const CodeGeometry g{5, 4};  // 10 bits, 6 pad bits in the second byte
  Rng rng(7);
  const auto path = temp_file("buffer.bin");

  SUBCASE("reservoir roundtrip") {
    auto buf = IndexBuffer::reservoir(g, 8);
    for (std::uint32_t i = 0; i < 30; ++i) buf.insert(make_item(g, i, static_cast<std::uint16_t>(i % 3)), rng);
    buf.save(path);
    const IndexBuffer back = IndexBuffer::load(path);
    CHECK(back.items() == buf.items());
    CHECK(back.capacity() == 8);
    CHECK(back.geometry() == g);
    CHECK(back.policy() == EvictionPolicy::reservoir);
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "SRMB");
  }
  SUBCASE("per-task roundtrip") {
    auto buf = IndexBuffer::per_task_recent(g, 9, 4);
    for (std::uint32_t i = 0; i < 40; ++i) buf.insert(make_item(g, i, static_cast<std::uint16_t>(i % 4)), rng);
    buf.save(path);
    const IndexBuffer back = IndexBuffer::load(path);
    CHECK(back.items() == buf.items());
    CHECK(back.task_count() == 4);
    for (std::size_t t = 0; t < 4; ++t) CHECK(back.task_items(t) == buf.task_items(t));
  }
  SUBCASE("empty roundtrip") {
    IndexBuffer::reservoir(g, 3).save(path);
    const IndexBuffer back = IndexBuffer::load(path);
    CHECK(back.empty());
    CHECK(back.capacity() == 3);
  }
  SUBCASE("corruption") {
    auto buf = IndexBuffer::reservoir(g, 2);
    buf.insert(make_item(g, 3), rng);
    buf.save(path);
    // Header: 4 magic + 2 version + 6 * 4; the record's second code byte
    // holds 2 data bits and 6 pad bits.
    {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(4 + 2 + 24 + 1);
      const char bad = 0x01;
      f.write(&bad, 1);
    }
    CHECK_THROWS_AS(IndexBuffer::load(path), CorruptionError);

    buf.save(path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 1);
    CHECK_THROWS_AS(IndexBuffer::load(path), FormatError);

    {
      std::ofstream f(path, std::ios::binary);
      f << "SRMX";
    }
    CHECK_THROWS_AS(IndexBuffer::load(path), FormatError);

    buf.save(path);
    {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(4);
      const char v = 9;
      f.write(&v, 1);
    }
    CHECK_THROWS_AS(IndexBuffer::load(path), FormatError);
  }
  std::filesystem::remove(path);
}
