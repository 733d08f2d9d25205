// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace recollect {

namespace {

std::uint32_t read_be32(std::istream& is, const std::filesystem::path& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("IDX file truncated in header: " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

IdxArray load_idx(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::uint32_t magic = read_be32(is, path);
  if (magic != 0x00000803 && magic != 0x00000801) {
    throw FormatError("bad IDX magic in " + path.string());
  }
  IdxArray out;
  const std::size_t rank = magic & 0xff;
  std::size_t total = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    out.dims.push_back(read_be32(is, path));
    total *= out.dims.back();
  }
  out.data.resize(total);
  is.read(reinterpret_cast<char*>(out.data.data()), static_cast<std::streamsize>(total));
  if (static_cast<std::size_t>(is.gcount()) != total) throw FormatError("IDX file truncated: " + path.string());
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  d.shape = shape;
  d.classes = classes;
  d.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    d.y.push_back(y.at(rows[i]));
  }
  return d;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> rows(std::min(n, size()));
  std::iota(rows.begin(), rows.end(), 0);
  return subset(rows);
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const IdxArray img = load_idx(images);
  const IdxArray lab = load_idx(labels);
  if (img.dims.size() != 3) throw FormatError("image file must have three dimensions: " + images.string());
  if (lab.dims.size() != 1) throw FormatError("label file must have one dimension: " + labels.string());
  if (img.dims[0] != lab.dims[0]) {
    throw FormatError("image/label count mismatch: " + std::to_string(img.dims[0]) + " vs " +
                      std::to_string(lab.dims[0]));
  }
  Dataset d;
  d.shape = {1, img.dims[1], img.dims[2]};
  const std::size_t n = img.dims[0], px = d.shape.size();
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(px));
  for (std::size_t i = 0; i < n * px; ++i) d.x.data()[i] = img.data[i] / 255.0;
  d.y.assign(lab.data.begin(), lab.data.end());
  d.classes = lab.data.empty() ? 0 : static_cast<std::size_t>(*std::max_element(lab.data.begin(), lab.data.end())) + 1;
  return d;
}

Dataset load_mnist(const std::filesystem::path& dir, bool train) {
  const std::string prefix = train ? "train" : "t10k";
  Dataset d = load_idx_dataset(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"));
  d.classes = 10;
  return d;
}

std::size_t TaskStream::total_examples() const {
  std::size_t n = 0;
  for (const auto& t : tasks) n += t.train_y.size();
  return n;
}

Matrix rotate_image(const Eigen::Ref<const Eigen::RowVectorXd>& image, std::size_t height, std::size_t width,
                    double degrees) {
  if (static_cast<std::size_t>(image.size()) != height * width) throw ShapeError("rotate_image: size mismatch");
  double cs, sn;
  const double quarter = degrees / 90.0;
  if (quarter == std::round(quarter)) {
    // Exact trig on quarter turns keeps 90/180/270 degree rotations lossless.
    const long q = ((std::lround(quarter) % 4) + 4) % 4;
    constexpr double kCos[4] = {1, 0, -1, 0};
    constexpr double kSin[4] = {0, 1, 0, -1};
    cs = kCos[q];
    sn = kSin[q];
  } else {
    const double rad = degrees * std::numbers::pi / 180.0;
    cs = std::cos(rad);
    sn = std::sin(rad);
  }
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  Matrix out = Matrix::Zero(1, image.size());
  auto src = [&](long r, long c) -> double {
    if (r < 0 || c < 0 || r >= static_cast<long>(height) || c >= static_cast<long>(width)) return 0.0;
    return image(r * static_cast<long>(width) + c);
  };
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      // Inverse map: source = R(-theta) * (dest - centre) + centre.
      const double dy = static_cast<double>(i) - cy, dx = static_cast<double>(j) - cx;
      const double sy = cs * dy - sn * dx + cy;
      const double sx = sn * dy + cs * dx + cx;
      const double fy = std::floor(sy), fx = std::floor(sx);
      const double wy = sy - fy, wx = sx - fx;
      const long r0 = static_cast<long>(fy), c0 = static_cast<long>(fx);
      double v = (1 - wy) * (1 - wx) * src(r0, c0);
      if (wx > 0) v += (1 - wy) * wx * src(r0, c0 + 1);
      if (wy > 0) v += wy * (1 - wx) * src(r0 + 1, c0);
      if (wx > 0 && wy > 0) v += wy * wx * src(r0 + 1, c0 + 1);
      out(0, static_cast<Eigen::Index>(i * width + j)) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

namespace {

Matrix rotate_all(const Matrix& x, const ImageShape& shape, double degrees) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r) = rotate_image(x.row(r), shape.height, shape.width, degrees);
  return out;
}

}  // namespace

TaskStream make_rotations(const Dataset& train, const Dataset& test, std::size_t tasks, std::size_t per_task,
                          std::uint64_t seed, AngleMode mode) {
  if (tasks < 1) throw std::invalid_argument("make_rotations: need at least one task");
  if (train.shape.channels != 1) throw std::invalid_argument("make_rotations: single-channel images only");
  if (tasks * per_task > train.size()) {
    throw std::invalid_argument("make_rotations: " + std::to_string(tasks * per_task) + " examples requested but only " +
                                std::to_string(train.size()) + " available");
  }
  Rng rng(seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

  TaskStream s;
  s.shape = train.shape;
  s.classes = train.classes;
  for (std::size_t t = 0; t < tasks; ++t) {
    Task task;
    task.angle = mode == AngleMode::random
                     ? rng.uniform(0.0, 180.0)
                     : (tasks == 1 ? 0.0 : 180.0 * static_cast<double>(t) / static_cast<double>(tasks - 1));
    const Dataset part = train.subset(std::span<const std::size_t>(order).subspan(t * per_task, per_task));
    task.train_x = rotate_all(part.x, train.shape, task.angle);
    task.train_y = part.y;
    task.test_x = rotate_all(test.x, test.shape, task.angle);
    task.test_y = test.y;
    s.tasks.push_back(std::move(task));
  }
  return s;
}

TaskStream make_class_incremental(const Dataset& train, const Dataset& test, std::size_t tasks) {
  if (tasks < 1 || tasks > train.classes) throw std::invalid_argument("make_class_incremental: bad task count");
  TaskStream s;
  s.shape = train.shape;
  s.classes = train.classes;
  std::size_t first = 0;
  for (std::size_t t = 0; t < tasks; ++t) {
    const std::size_t count = train.classes / tasks + (t < train.classes % tasks ? 1 : 0);
    s.heads.push_back({first, count});
    auto pick = [&](const Dataset& d) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const auto y = static_cast<std::size_t>(d.y[i]);
        if (y >= first && y < first + count) rows.push_back(i);
      }
      return d.subset(rows);
    };
    const Dataset tr = pick(train), te = pick(test);
    s.tasks.push_back({tr.x, tr.y, te.x, te.y, 0.0});
    first += count;
  }
  if (tasks == 1) s.heads.clear();
  return s;
}

Dataset synth_blobs(std::size_t classes, std::size_t side, std::size_t n, std::uint64_t seed, double sigma) {
  if (classes < 2 || side < 1) throw std::invalid_argument("synth_blobs: need >= 2 classes and a positive side");
  Rng rng(seed);
  const std::size_t px = side * side;
  Matrix proto(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(px));
  for (Eigen::Index i = 0; i < proto.size(); ++i) proto.data()[i] = rng.uniform() < 0.5 ? 0.2 : 0.8;
  Dataset d;
  d.shape = {1, side, side};
  d.classes = classes;
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(px));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    d.y.push_back(static_cast<int>(c));
    for (std::size_t j = 0; j < px; ++j) {
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::clamp(proto(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) + sigma * rng.normal(), 0.0, 1.0);
    }
  }
  return d;
}

}  // namespace recollect
