// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/recollection.hpp"

#include <algorithm>
#include <cmath>

namespace recollect {

std::vector<PackedCode> VaeRecollector::store(const Matrix& x, Rng& rng) const {
  const auto& cfg = vae_->config();
  std::vector<PackedCode> out;
  for (const auto& code : vae_->encode_codes(x, rng)) out.push_back(pack(code, cfg.c, cfg.l));
  return out;
}

Matrix VaeRecollector::recall(std::span<const BufferItem> items) const {
  const auto& cfg = vae_->config();
  std::vector<LatentCode> codes;
  codes.reserve(items.size());
  for (const auto& it : items) codes.push_back(unpack(it.code, cfg.c, cfg.l));
  return vae_->decode_codes(codes);
}

std::vector<PackedCode> RawRecollector::store(const Matrix& x, Rng& /*rng*/) const {
  if (static_cast<std::size_t>(x.cols()) != pixels_) throw ShapeError("raw storage: pixel count mismatch");
  std::vector<PackedCode> out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    PackedCode code;
    code.bytes.resize(pixels_);
    for (std::size_t i = 0; i < pixels_; ++i) {
      const double v = std::clamp(x(r, static_cast<Eigen::Index>(i)), 0.0, 1.0);
      code.bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    out.push_back(std::move(code));
  }
  return out;
}

Matrix RawRecollector::recall(std::span<const BufferItem> items) const {
  Matrix out(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(pixels_));
  for (std::size_t r = 0; r < items.size(); ++r) {
    if (items[r].code.bytes.size() != pixels_) throw CorruptionError("raw storage: record size mismatch");
    for (std::size_t i = 0; i < pixels_; ++i) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = items[r].code.bytes[i] / 255.0;
    }
  }
  return out;
}

}  // namespace recollect
