// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "recollect/discrete_vae.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace recollect {

void VaeConfig::validate() const {
  if (c < 1) throw std::invalid_argument("VaeConfig: c must be >= 1");
  if (l < 2) throw std::invalid_argument("VaeConfig: l must be >= 2");
  if (!(tau > 0.0)) throw std::invalid_argument("VaeConfig: tau must be positive");
  if (input.size() == 0) throw std::invalid_argument("VaeConfig: empty input shape");
  if (kl_weight < 0.0) throw std::invalid_argument("VaeConfig: kl_weight must be non-negative");
}

std::size_t VaeConfig::hidden_width() const {
  if (hidden) return hidden;
  return arch == Architecture::conv ? (c * l + 3) / 4 : c * l;
}

std::size_t bits_per_variable(std::size_t l) {
  if (l < 2) throw std::invalid_argument("bits_per_variable: l must be >= 2");
  return static_cast<std::size_t>(std::bit_width(l - 1));
}

std::size_t VaeConfig::code_bits() const { return c * bits_per_variable(l); }

PackedCode pack(const LatentCode& code, std::size_t c, std::size_t l) {
  if (code.indices.size() != c) {
    throw std::invalid_argument("pack: code has " + std::to_string(code.indices.size()) + " variables, expected " +
                                std::to_string(c));
  }
  const std::size_t b = bits_per_variable(l);
  PackedCode out;
  out.bytes.resize((c * b + 7) / 8);
  std::uint64_t acc = 0;
  std::size_t held = 0, o = 0;
  for (const std::uint32_t v : code.indices) {
    if (v >= l) throw std::invalid_argument("pack: index " + std::to_string(v) + " >= l=" + std::to_string(l));
    acc = (acc << b) | v;
    held += b;
    while (held >= 8) {
      held -= 8;
      out.bytes[o++] = static_cast<std::uint8_t>(acc >> held);
    }
    acc &= (std::uint64_t{1} << held) - 1;
  }
  if (held > 0) out.bytes[o] = static_cast<std::uint8_t>(acc << (8 - held));
  return out;
}

LatentCode unpack(std::span<const std::uint8_t> bytes, std::size_t c, std::size_t l) {
  const std::size_t b = bits_per_variable(l);
  const std::size_t k = c * b;
  if (bytes.size() != (k + 7) / 8) {
    throw CorruptionError("unpack: expected " + std::to_string((k + 7) / 8) + " bytes, got " +
                          std::to_string(bytes.size()));
  }
  LatentCode code;
  code.indices.resize(c);
  const std::uint64_t mask = (std::uint64_t{1} << b) - 1;
  std::uint64_t acc = 0;
  std::size_t held = 0, in = 0;
  for (std::size_t i = 0; i < c; ++i) {
    while (held < b) {
      acc = (acc << 8) | bytes[in++];
      held += 8;
    }
    held -= b;
    const auto v = static_cast<std::uint32_t>((acc >> held) & mask);
    acc &= (std::uint64_t{1} << held) - 1;
    if (v >= l) throw CorruptionError("unpack: index " + std::to_string(v) + " out of range for l=" + std::to_string(l));
    code.indices[i] = v;
  }
  // Whatever is left (held bits plus unread bytes) is padding.
  bool pad_set = acc != 0;
  for (; in < bytes.size(); ++in) pad_set = pad_set || bytes[in] != 0;
  if (pad_set) throw CorruptionError("unpack: pad bit set");
  return code;
}

Matrix gumbel_noise(std::size_t c, std::size_t l, Rng& rng) {
  Matrix g(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(l));
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.gumbel();
  return g;
}

namespace {

double safe_log(double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

void check_noise(const EncoderOutput& p, const Matrix& noise) {
  if (p.probs.rows() != noise.rows() || p.probs.cols() != noise.cols()) {
    throw ShapeError("gumbel: noise shape does not match probabilities");
  }
}

}  // namespace

LatentCode gumbel_max_sample(const EncoderOutput& p, const Matrix& noise) {
  check_noise(p, noise);
  LatentCode code;
  code.indices.resize(static_cast<std::size_t>(p.probs.rows()));
  for (Eigen::Index i = 0; i < p.probs.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index j = 0; j < p.probs.cols(); ++j) {
      const double s = noise(i, j) + safe_log(p.probs(i, j));
      if (s > best) {
        best = s;
        arg = j;
      }
    }
    code.indices[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(arg);
  }
  return code;
}

LatentCode gumbel_max_sample(const EncoderOutput& p, Rng& rng) {
  return gumbel_max_sample(p, gumbel_noise(static_cast<std::size_t>(p.probs.rows()),
                                           static_cast<std::size_t>(p.probs.cols()), rng));
}

Matrix gumbel_softmax_relax(const EncoderOutput& p, double tau, const Matrix& noise) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax_relax: tau must be positive");
  check_noise(p, noise);
  Matrix y(p.probs.rows(), p.probs.cols());
  for (Eigen::Index i = 0; i < p.probs.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < p.probs.cols(); ++j) {
      y(i, j) = (noise(i, j) + safe_log(p.probs(i, j))) / tau;
      m = std::max(m, y(i, j));
    }
    double z = 0.0;
    for (Eigen::Index j = 0; j < p.probs.cols(); ++j) {
      y(i, j) = std::exp(y(i, j) - m);
      z += y(i, j);
    }
    y.row(i) /= z;
  }
  return y;
}

Matrix one_hot(std::span<const LatentCode> codes, std::size_t c, std::size_t l) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(codes.size()), static_cast<Eigen::Index>(c * l));
  for (std::size_t r = 0; r < codes.size(); ++r) {
    if (codes[r].indices.size() != c) throw ShapeError("one_hot: code length mismatch");
    for (std::size_t i = 0; i < c; ++i) {
      if (codes[r].indices[i] >= l) throw ShapeError("one_hot: index out of range");
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i * l + codes[r].indices[i])) = 1.0;
    }
  }
  return out;
}

namespace {

/// Spatial size after the three encoder convolutions.
std::pair<std::size_t, std::size_t> conv_trunk_size(const ImageShape& in, std::size_t padding) {
  std::size_t h = in.height, w = in.width;
  for (int i = 0; i < 3; ++i) {
    if (h + 2 * padding < 5 || w + 2 * padding < 5) {
      throw ShapeError("conv architecture: input too small for three 5x5 convolutions");
    }
    h = h + 2 * padding - 4;
    w = w + 2 * padding - 4;
  }
  return {h, w};
}

}  // namespace

std::vector<LayerSpec> encoder_specs(const ImageShape& input, Architecture arch, std::size_t hidden,
                                     std::size_t latent, std::size_t conv_padding) {
  std::vector<LayerSpec> s;
  if (arch == Architecture::mlp) {
    s.push_back(LayerSpec::dense(input.size(), hidden));
    s.push_back(LayerSpec::act(ActivationKind::relu, hidden));
    s.push_back(LayerSpec::dense(hidden, hidden));
    s.push_back(LayerSpec::act(ActivationKind::relu, hidden));
    s.push_back(LayerSpec::dense(hidden, latent));
    return s;
  }
  conv_trunk_size(input, conv_padding);
  std::size_t ch = input.channels, h = input.height, w = input.width;
  for (int i = 0; i < 3; ++i) {
    s.push_back(LayerSpec::conv(ch, h, w, hidden, conv_padding));
    ch = hidden;
    h = h + 2 * conv_padding - 4;
    w = w + 2 * conv_padding - 4;
    s.push_back(LayerSpec::act(ActivationKind::relu, ch * h * w));
  }
  s.push_back(LayerSpec::dense(ch * h * w, latent));
  return s;
}

std::vector<LayerSpec> decoder_specs(const ImageShape& input, Architecture arch, std::size_t hidden,
                                     std::size_t latent, std::size_t conv_padding) {
  std::vector<LayerSpec> s;
  if (arch == Architecture::mlp) {
    s.push_back(LayerSpec::dense(latent, hidden));
    s.push_back(LayerSpec::act(ActivationKind::relu, hidden));
    s.push_back(LayerSpec::dense(hidden, hidden));
    s.push_back(LayerSpec::act(ActivationKind::relu, hidden));
    s.push_back(LayerSpec::dense(hidden, input.size()));
    s.push_back(LayerSpec::act(ActivationKind::sigmoid, input.size()));
    return s;
  }
  auto [h, w] = conv_trunk_size(input, conv_padding);
  s.push_back(LayerSpec::dense(latent, hidden * h * w));
  s.push_back(LayerSpec::act(ActivationKind::relu, hidden * h * w));
  for (int i = 0; i < 3; ++i) {
    const std::size_t out_ch = i == 2 ? input.channels : hidden;
    s.push_back(LayerSpec::deconv(hidden, h, w, out_ch, conv_padding));
    h = h + 4 - 2 * conv_padding;
    w = w + 4 - 2 * conv_padding;
    if (i < 2) s.push_back(LayerSpec::act(ActivationKind::relu, out_ch * h * w));
  }
  s.push_back(LayerSpec::act(ActivationKind::sigmoid, input.size()));
  return s;
}

DiscreteVae::DiscreteVae(const VaeConfig& config, Rng& init_rng) : config_(config) {
  config_.validate();
  const std::size_t hidden = config_.hidden_width();
  encoder_ = Network(encoder_specs(config_.input, config_.arch, hidden, config_.latent_width(), config_.conv_padding),
                     init_rng);
  decoder_ = Network(decoder_specs(config_.input, config_.arch, hidden, config_.latent_width(), config_.conv_padding),
                     init_rng);
}

Matrix DiscreteVae::logits_to_probs(const Matrix& logits) const {
  Matrix p(logits.rows(), logits.cols());
  const auto l = static_cast<Eigen::Index>(config_.l);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index s = 0; s < logits.cols(); s += l) {
      auto x = logits.row(r).segment(s, l);
      auto e = (x.array() - x.maxCoeff()).exp();
      p.row(r).segment(s, l) = (e / e.sum()).matrix();
    }
  }
  return p;
}

Matrix DiscreteVae::encode_batch(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != config_.input.size()) {
    throw ShapeError("encode: expected " + std::to_string(config_.input.size()) + " inputs, got " +
                     std::to_string(x.cols()));
  }
  return logits_to_probs(encoder_.apply(x));
}

EncoderOutput DiscreteVae::encode(const Tensor& x) const {
  if (x.size() != config_.input.size()) {
    throw ShapeError("encode: input " + shape_string(x.shape()) + " does not match the configured image size");
  }
  const Matrix row = Eigen::Map<const Matrix>(x.data().data(), 1, static_cast<Eigen::Index>(x.size()));
  const Matrix p = encode_batch(row);
  return {Eigen::Map<const Matrix>(p.data(), static_cast<Eigen::Index>(config_.c), static_cast<Eigen::Index>(config_.l))};
}

std::vector<LatentCode> DiscreteVae::encode_codes(const Matrix& x, Rng& rng) const {
  const Matrix p = encode_batch(x);
  std::vector<LatentCode> codes;
  codes.reserve(static_cast<std::size_t>(x.rows()));
  const auto c = static_cast<Eigen::Index>(config_.c), l = static_cast<Eigen::Index>(config_.l);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EncoderOutput out{Eigen::Map<const Matrix>(p.row(r).data(), c, l)};
    if (config_.deterministic_storage) {
      LatentCode code;
      code.indices.resize(config_.c);
      for (Eigen::Index i = 0; i < c; ++i) {
        Eigen::Index arg;
        out.probs.row(i).maxCoeff(&arg);
        code.indices[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(arg);
      }
      codes.push_back(std::move(code));
    } else {
      codes.push_back(gumbel_max_sample(out, rng));
    }
  }
  return codes;
}

Matrix DiscreteVae::decode_batch(const Matrix& latent) const {
  if (static_cast<std::size_t>(latent.cols()) != config_.latent_width()) {
    throw ShapeError("decode: expected " + std::to_string(config_.latent_width()) + " latent units, got " +
                     std::to_string(latent.cols()));
  }
  return decoder_.apply(latent);
}

Matrix DiscreteVae::decode_codes(std::span<const LatentCode> codes) const {
  return decode_batch(one_hot(codes, config_.c, config_.l));
}

Tensor DiscreteVae::decode(const LatentCode& code) const {
  const Matrix out = decode_codes(std::span<const LatentCode>(&code, 1));
  return Tensor({config_.input.channels, config_.input.height, config_.input.width},
                std::vector<double>(out.data(), out.data() + out.size()));
}

Tensor DiscreteVae::decode(const Matrix& relaxed) const {
  if (static_cast<std::size_t>(relaxed.rows()) != config_.c || static_cast<std::size_t>(relaxed.cols()) != config_.l) {
    throw ShapeError("decode: relaxed code must be c x l");
  }
  const Matrix row = Eigen::Map<const Matrix>(relaxed.data(), 1, relaxed.size());
  const Matrix out = decode_batch(row);
  return Tensor({config_.input.channels, config_.input.height, config_.input.width},
                std::vector<double>(out.data(), out.data() + out.size()));
}

double DiscreteVae::loss(const Matrix& x, const Matrix& noise, LatentPath path, bool with_grad) {
  if (x.rows() == 0) throw std::invalid_argument("vae loss: empty batch");
  if (noise.rows() != x.rows() || static_cast<std::size_t>(noise.cols()) != config_.latent_width()) {
    throw ShapeError("vae loss: noise must be batch x (c*l)");
  }
  if (static_cast<std::size_t>(x.cols()) != config_.input.size()) {
    throw ShapeError("vae loss: expected " + std::to_string(config_.input.size()) + " inputs, got " +
                     std::to_string(x.cols()));
  }
  const auto l = static_cast<Eigen::Index>(config_.l);
  const double inv_tau = 1.0 / config_.tau;

  const Matrix logits = with_grad ? encoder_.forward(x) : encoder_.apply(x);
  // Softmax is shift-invariant, so (g + log p)/tau has the same softmax and
  // argmax as (g + logits)/tau.
  Matrix relaxed(logits.rows(), logits.cols());
  Matrix hard = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index s = 0; s < logits.cols(); s += l) {
      const Eigen::RowVectorXd score = logits.row(r).segment(s, l) + noise.row(r).segment(s, l);
      Eigen::Index arg;
      const double m = score.maxCoeff(&arg);
      const Eigen::RowVectorXd e = ((score.array() - m) * inv_tau).exp().matrix();
      relaxed.row(r).segment(s, l) = e / e.sum();
      hard(r, s + arg) = 1.0;
    }
  }
  const Matrix& latent = path == LatentPath::straight_through ? hard : relaxed;
  const Matrix recon = with_grad ? decoder_.forward(latent) : decoder_.apply(latent);
  double value = bce_loss(recon, x);

  Matrix probs;
  if (config_.kl_weight > 0.0) {
    probs = logits_to_probs(logits);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      const double p = probs.data()[i];
      if (p > 0.0) kl += p * std::log(p);
    }
    kl = kl / static_cast<double>(x.rows()) + static_cast<double>(config_.c) * std::log(static_cast<double>(config_.l));
    value += config_.kl_weight * kl;
  }
  if (!std::isfinite(value)) throw NumericError("vae loss is not finite");
  if (!with_grad) return value;

  encoder_.parameters().zero_grad();
  decoder_.parameters().zero_grad();
  const Matrix d_latent = decoder_.backward_from_logits(bce_logit_grad(recon, x));
  Matrix d_logits(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index s = 0; s < logits.cols(); s += l) {
      auto y = relaxed.row(r).segment(s, l);
      auto dy = d_latent.row(r).segment(s, l);
      d_logits.row(r).segment(s, l) = inv_tau * y.cwiseProduct((dy.array() - y.dot(dy)).matrix());
    }
  }
  if (config_.kl_weight > 0.0) {
    const double scale = config_.kl_weight / static_cast<double>(x.rows());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      for (Eigen::Index s = 0; s < probs.cols(); s += l) {
        auto p = probs.row(r).segment(s, l);
        const Eigen::RowVectorXd logp = p.array().max(1e-300).log().matrix();
        const double ent = p.dot(logp);
        d_logits.row(r).segment(s, l) += scale * p.cwiseProduct((logp.array() - ent).matrix());
      }
    }
  }
  encoder_.backward(d_logits);
  return value;
}

double DiscreteVae::train_batch(const Matrix& x, double lr, Rng& rng) {
  if (lr < 0.0) throw std::invalid_argument("train_batch: learning rate must be non-negative");
  Matrix noise(x.rows(), static_cast<Eigen::Index>(config_.latent_width()));
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = rng.gumbel();
  const double value = loss(x, noise, LatentPath::straight_through, true);
  ParameterSet params = parameters();
  if (!params.grads_finite()) throw NumericError("train_batch: non-finite gradient");
  sgd_step(params, lr);
  return value;
}

double mean_l1(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("mean_l1: shape mismatch");
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().sum() / static_cast<double>(a.size());
}

double DiscreteVae::reconstruction_l1(const Matrix& x) const {
  const Matrix p = encode_batch(x);
  const auto l = static_cast<Eigen::Index>(config_.l);
  Matrix hard = Matrix::Zero(p.rows(), p.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index s = 0; s < p.cols(); s += l) {
      Eigen::Index arg;
      p.row(r).segment(s, l).maxCoeff(&arg);
      hard(r, s + arg) = 1.0;
    }
  }
  return mean_l1(decoder_.apply(hard), x);
}

ParameterSet DiscreteVae::parameters() {
  ParameterSet set = encoder_.parameters();
  set.append(decoder_.parameters());
  return set;
}

namespace {

constexpr char kVaeMagic[4] = {'S', 'R', 'M', 'V'};
constexpr std::uint16_t kVaeVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("model file truncated");
  return v;
}

}  // namespace

void DiscreteVae::save(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kVaeMagic, 4);
  put<std::uint16_t>(os, kVaeVersion);
  for (std::size_t v : {config_.c, config_.l, config_.input.channels, config_.input.height, config_.input.width,
                        static_cast<std::size_t>(config_.arch), config_.hidden, config_.conv_padding}) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  }
  put<double>(os, config_.tau);
  put<double>(os, config_.kl_weight);
  put<std::uint8_t>(os, config_.deterministic_storage ? 1 : 0);
  parameters().write(os);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

DiscreteVae DiscreteVae::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kVaeMagic)) throw FormatError("not a model file (bad magic): " + path.string());
  if (get<std::uint16_t>(is) != kVaeVersion) throw FormatError("unsupported model file version");
  VaeConfig cfg;
  cfg.c = get<std::uint32_t>(is);
  cfg.l = get<std::uint32_t>(is);
  cfg.input.channels = get<std::uint32_t>(is);
  cfg.input.height = get<std::uint32_t>(is);
  cfg.input.width = get<std::uint32_t>(is);
  const auto arch = get<std::uint32_t>(is);
  if (arch > 1) throw FormatError("unknown architecture tag");
  cfg.arch = static_cast<Architecture>(arch);
  cfg.hidden = get<std::uint32_t>(is);
  cfg.conv_padding = get<std::uint32_t>(is);
  cfg.tau = get<double>(is);
  cfg.kl_weight = get<double>(is);
  cfg.deterministic_storage = get<std::uint8_t>(is) != 0;
  Rng unused(0);
  DiscreteVae vae(cfg, unused);
  try {
    vae.parameters().read(is);
  } catch (const std::runtime_error& e) {
    throw FormatError(e.what());
  }
  return vae;
}

std::vector<double> fit(DiscreteVae& vae, const Matrix& data, std::size_t epochs, std::size_t batch, double lr,
                        Rng& rng) {
  if (batch == 0) throw std::invalid_argument("fit: batch must be positive");
  std::vector<std::size_t> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      Matrix x(static_cast<Eigen::Index>(n), data.cols());
      for (std::size_t r = 0; r < n; ++r) x.row(static_cast<Eigen::Index>(r)) = data.row(static_cast<Eigen::Index>(order[start + r]));
      total += vae.train_batch(x, lr, rng);
      ++steps;
    }
    history.push_back(steps ? total / static_cast<double>(steps) : 0.0);
  }
  return history;
}

}  // namespace recollect
