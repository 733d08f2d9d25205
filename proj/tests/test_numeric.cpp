// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "recollect/layers.hpp"
#include "recollect/params.hpp"
#include "recollect/tensor.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace recollect;

using oracle::input_grad_error;
using oracle::param_grad_error;
using oracle::random_matrix;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Direct quadruple loop; shares no code with the im2col path.
Tensor naive_conv(const Tensor& in, const Tensor& k, std::size_t pad) {
  const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
  const std::size_t F = k.dim(0), K = k.dim(2);
  const std::size_t Ho = H + 2 * pad + 1 - K, Wo = W + 2 * pad + 1 - K;
  Tensor out({F, Ho, Wo});
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t x = 0; x < Wo; ++x) {
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) {
              const long yy = static_cast<long>(y + i) - static_cast<long>(pad);
              const long xx = static_cast<long>(x + j) - static_cast<long>(pad);
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
              s += in[(c * H + yy) * W + xx] * k[((f * C + c) * K + i) * K + j];
            }
        out[(f * Ho + y) * Wo + x] = s;
      }
  return out;
}

}  // namespace

TEST_CASE("matmul") {
  Rng rng(1);
  const Tensor b = random_tensor({3, 4}, rng);
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  const Tensor ib = matmul(eye, b);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(ib[i] == b[i]);

  const Tensor r = matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 1}, {1, 1}));
  CHECK(r.shape() == Shape{2, 1});
  CHECK(r[0] == 3.0);
  CHECK(r[1] == 7.0);

  try {
    matmul(Tensor({2, 3}), Tensor({4, 5}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2") != std::string::npos);
    CHECK(msg.find("5") != std::string::npos);
  }
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t({2});
  t[1] = std::nan("");
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(t.require_finite("t"), NumericError);
}

TEST_CASE("conv2d matches a direct loop") {
  Rng rng(2);
  for (std::size_t pad : {0, 1, 2}) {
    const Tensor in = random_tensor({3, 9, 8}, rng);
    const Tensor k = random_tensor({4, 3, 5, 5}, rng);
    const Tensor fast = conv2d(in, k, pad);
    const Tensor slow = naive_conv(in, k, pad);
    REQUIRE(fast.shape() == slow.shape());
    for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d examples") {
  Rng rng(3);
  const Tensor in = random_tensor({1, 7, 7}, rng);
  Tensor delta({1, 1, 5, 5});
  delta[12] = 1.0;
  const Tensor same = conv2d(in, delta, 2);
  REQUIRE(same.shape() == in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(same[i] == in[i]);

  const Tensor ones = conv2d(Tensor({1, 9, 9}, 1.0), Tensor({1, 1, 5, 5}, 1.0), 0);
  CHECK(ones.shape() == Shape{1, 5, 5});
  for (double v : ones.data()) CHECK(v == 25.0);

  CHECK(conv2d(Tensor({1, 28, 28}), Tensor({8, 1, 5, 5}), 2).shape() == Shape{8, 28, 28});
  CHECK_THROWS_AS(conv2d(Tensor({2, 9, 9}), Tensor({1, 3, 5, 5}), 0), ShapeError);
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
  Rng rng(4);
  for (std::size_t pad : {0, 2}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor a = random_tensor({2, 6, 6}, rng);
      const Tensor k = random_tensor({3, 2, 5, 5}, rng);
      const Tensor ca = conv2d(a, k, pad);
      const Tensor b = random_tensor(ca.shape(), rng);
      const Tensor db = deconv2d(b, k, pad);
      REQUIRE(db.shape() == a.shape());
      CHECK(std::abs(inner(ca, b) - inner(a, db)) < 1e-10);
    }
  }
  Tensor delta({1, 1, 5, 5});
  delta[12] = 1.0;
  const Tensor in = random_tensor({1, 6, 6}, rng);
  const Tensor out = deconv2d(in, delta, 2);
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i] == in[i]);
  CHECK(deconv2d(Tensor({8, 24, 24}), Tensor({8, 1, 5, 5}), 0).shape() == Shape{1, 28, 28});
  CHECK_THROWS_AS(deconv2d(Tensor({2, 6, 6}), Tensor({3, 1, 5, 5}), 0), ShapeError);
}

TEST_CASE("bce_loss") {
  CHECK(bce_loss(Tensor({4}, 0.0), Tensor({4}, 0.0)) < 1e-6);
  CHECK(bce_loss(Tensor({4}, 1.0), Tensor({4}, 1.0)) < 1e-6);
  Rng rng(5);
  Tensor t({10});
  for (auto& v : t.data()) v = rng.uniform();
  CHECK(bce_loss(Tensor({10}, 0.5), t) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(Tensor({1}, 0.8), Tensor({1}, 1.0)) == doctest::Approx(0.2231).epsilon(1e-4));
  CHECK_THROWS_AS(bce_loss(Tensor({2}), Tensor({3})), ShapeError);

  const Matrix p = random_matrix(3, 4, rng, 0.05, 0.95);
  const Matrix y = random_matrix(3, 4, rng, 0.0, 1.0);
  const Matrix g = bce_grad(p, y);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Matrix up = p, down = p;
    up.data()[i] += 1e-6;
    down.data()[i] -= 1e-6;
    CHECK(g.data()[i] == doctest::Approx((bce_loss(up, y) - bce_loss(down, y)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("bce_logit_grad is the chain rule through a sigmoid") {
  Rng rng(6);
  const Matrix z = random_matrix(2, 5, rng, -3, 3);
  const Matrix y = random_matrix(2, 5, rng, 0, 1);
  const Matrix p = (1.0 + (-z.array()).exp()).inverse().matrix();
  const Matrix fused = bce_logit_grad(p, y);
  const Matrix chained = bce_grad(p, y).cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix()));
  for (Eigen::Index i = 0; i < z.size(); ++i) CHECK(fused.data()[i] == doctest::Approx(chained.data()[i]).epsilon(1e-12));
}

TEST_CASE("layer gradients match finite differences") {
  Rng rng(7);
  const double eps = 1e-5;
  SUBCASE("dense") {
    Network net({LayerSpec::dense(6, 4)}, rng);
    const Matrix x = random_matrix(3, 6, rng), w = random_matrix(3, 4, rng);
    CHECK(param_grad_error(net, x, w, eps) < 1e-4);
    CHECK(input_grad_error(net, x, w, eps) < 1e-4);
  }
  SUBCASE("conv2d") {
    Network net({LayerSpec::conv(2, 7, 6, 3, 1)}, rng);
    const Matrix x = random_matrix(2, 84, rng), w = random_matrix(2, net.out_features(), rng);
    CHECK(param_grad_error(net, x, w, eps) < 1e-4);
    CHECK(input_grad_error(net, x, w, eps) < 1e-4);
  }
  SUBCASE("deconv2d") {
    Network net({LayerSpec::deconv(3, 4, 4, 2, 0)}, rng);
    const Matrix x = random_matrix(2, 48, rng), w = random_matrix(2, net.out_features(), rng);
    CHECK(net.out_features() == 2u * 8u * 8u);
    CHECK(param_grad_error(net, x, w, eps) < 1e-4);
    CHECK(input_grad_error(net, x, w, eps) < 1e-4);
  }
  SUBCASE("activations") {
    for (auto kind : {ActivationKind::relu, ActivationKind::sigmoid, ActivationKind::identity}) {
      Network net({LayerSpec::act(kind, 8)}, rng);
      Matrix x = random_matrix(3, 8, rng);
      for (Eigen::Index i = 0; i < x.size(); ++i)
        if (std::abs(x.data()[i]) < 0.05) x.data()[i] = 0.5;  // keep clear of the relu kink
      CHECK(input_grad_error(net, x, random_matrix(3, 8, rng), eps) < 1e-4);
    }
    Network softmax({LayerSpec::act(ActivationKind::softmax_group, 12, 4)}, rng);
    const Matrix x = random_matrix(2, 12, rng);
    const Matrix y = softmax.apply(x);
    for (Eigen::Index r = 0; r < 2; ++r)
      for (Eigen::Index g = 0; g < 3; ++g) CHECK(y.row(r).segment(4 * g, 4).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(input_grad_error(softmax, x, random_matrix(2, 12, rng), eps) < 1e-4);
  }
  SUBCASE("dense + sigmoid under bce") {
    Network net({LayerSpec::dense(5, 7), LayerSpec::act(ActivationKind::sigmoid, 7), LayerSpec::dense(7, 3),
                 LayerSpec::act(ActivationKind::sigmoid, 3)},
                rng);
    const Matrix x = random_matrix(4, 5, rng), t = random_matrix(4, 3, rng, 0, 1);
    ParameterSet params = net.parameters();
    const double err = grad_check(params, [&](bool with_grad) {
      if (!with_grad) return bce_loss(net.apply(x), t);
      params.zero_grad();
      const Matrix p = net.forward(x);
      net.backward(bce_grad(p, t));
      return bce_loss(p, t);
    }, eps);
    CHECK(err < 1e-6);
  }
  SUBCASE("conv encoder") {
    Network net({LayerSpec::conv(1, 12, 12, 3, 0), LayerSpec::act(ActivationKind::sigmoid, 3 * 8 * 8),
                 LayerSpec::conv(3, 8, 8, 3, 0), LayerSpec::act(ActivationKind::sigmoid, 3 * 4 * 4),
                 LayerSpec::dense(48, 6), LayerSpec::act(ActivationKind::softmax_group, 6, 3)},
                rng);
    const Matrix x = random_matrix(2, 144, rng, 0, 1), w = random_matrix(2, 6, rng);
    CHECK(param_grad_error(net, x, w, eps) < 1e-4);
  }
}

TEST_CASE("backward bookkeeping") {
  Rng rng(8);
  Network net({LayerSpec::dense(3, 2)}, rng);
  const Matrix x = random_matrix(1, 3, rng);
  net.forward(x);
  net.backward(Matrix::Ones(1, 2));
  CHECK_THROWS_AS(net.backward(Matrix::Ones(1, 2)), std::logic_error);

  // loss = sum(out) of a dense layer: bias gradient is all ones.
  ParameterSet params = net.parameters();
  params.zero_grad();
  net.forward(x);
  net.backward(Matrix::Ones(1, 2));
  const Parameter& bias = *params.items()[1];
  CHECK(bias.grad.isApprox(Matrix::Ones(bias.grad.rows(), bias.grad.cols())));

  // A parameter outside the graph keeps a zero gradient.
  Network other({LayerSpec::dense(3, 2)}, rng);
  ParameterSet both = net.parameters();
  both.append(other.parameters());
  both.zero_grad();
  net.forward(x);
  net.backward(Matrix::Ones(1, 2));
  const ParameterSet unreachable = other.parameters();
  for (const Parameter* p : unreachable.items()) CHECK(p->grad.isZero(0.0));
}

TEST_CASE("sgd_step") {
  Parameter p("theta", Matrix::Constant(1, 1, 1.0));
  ParameterSet set({&p});
  p.grad(0, 0) = 2.0;
  sgd_step(set, 0.1);
  CHECK(p.value(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(p.grad(0, 0) == 0.0);

  p.grad(0, 0) = 3.0;
  sgd_step(set, 0.0);
  CHECK(p.value(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(sgd_step(set, -0.1), std::invalid_argument);

  // Two steps with the same gradient equal one step with the summed rate.
  Rng rng(9);
  Parameter a("a", random_matrix(3, 3, rng)), b("b", a.value);
  const Matrix g = random_matrix(3, 3, rng);
  ParameterSet sa({&a}), sb({&b});
  a.grad = g;
  sgd_step(sa, 0.25);
  a.grad = g;
  sgd_step(sa, 0.5);
  b.grad = g;
  sgd_step(sb, 0.75);
  CHECK((a.value - b.value).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("grad_check contract") {
  Rng rng(10);
  Network linear({LayerSpec::dense(4, 3)}, rng);
  const Matrix x = random_matrix(2, 4, rng), w = random_matrix(2, 3, rng);
  CHECK(param_grad_error(linear, x, w, 1e-5) < 1e-8);
  ParameterSet params = linear.parameters();
  CHECK_THROWS_AS(grad_check(params, [](bool) { return 0.0; }, 0.0), std::invalid_argument);
}

TEST_CASE("initialization and determinism") {
  Rng a(11), b(11);
  Network na({LayerSpec::dense(20, 30), LayerSpec::act(ActivationKind::sigmoid, 30)}, a);
  Network nb({LayerSpec::dense(20, 30), LayerSpec::act(ActivationKind::sigmoid, 30)}, b);
  const ParameterSet pa = na.parameters();
  CHECK(pa.count() == 20u * 30u + 30u);
  CHECK(pa.fingerprint() == nb.parameters().fingerprint());
  const double limit = std::sqrt(6.0 / 50.0);
  CHECK(pa.items()[0]->value.cwiseAbs().maxCoeff() <= limit);
  CHECK(pa.items()[1]->value.isZero(0.0));
  Rng rx(12);
  const Matrix x = random_matrix(4, 20, rx);
  CHECK(na.apply(x) == nb.apply(x));
}
