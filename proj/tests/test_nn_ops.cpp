#include <catch2/catch_amalgamated.hpp>

#include "femseg/nn/activations.hpp"
#include "femseg/nn/adam.hpp"
#include "femseg/nn/batchnorm.hpp"
#include "femseg/nn/conv3d.hpp"
#include "femseg/nn/convtranspose.hpp"
#include "femseg/nn/dice_loss.hpp"
#include "femseg/nn/pooling.hpp"
#include "support/oracles.hpp"

using namespace femseg;

namespace {

double dot_all(const Tensor& a, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * r.v[i];
  return s;
}

}  // namespace

TEST_CASE("a delta kernel reproduces the input", "[nn]") {
  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor(TensorShape{1, 1, 4, 5, 6}, rng);
  Tensor k(TensorShape{1, 1, 3, 3, 3});
  k.at(0, 0, 1, 1, 1) = 1.0;
  const Tensor y = conv3d_forward(x, k, std::vector<double>{0.0}, 1, 1);
  CHECK(y.v == x.v);
}

TEST_CASE("an all-ones kernel turns an interior impulse into a 3x3x3 block", "[nn]") {
  Tensor x(TensorShape{1, 1, 5, 5, 5});
  x.at(0, 0, 2, 2, 2) = 1.0;
  const Tensor k(TensorShape{1, 1, 3, 3, 3}, 1.0);
  const Tensor y = conv3d_forward(x, k, std::vector<double>{0.0}, 1, 1);
  const Tensor want = oracle::conv3d_naive(x, k, {0.0}, 1, 1);
  CHECK(y.v == want.v);
  for (std::int64_t z = 0; z < 5; ++z)
    for (std::int64_t yy = 0; yy < 5; ++yy)
      for (std::int64_t xx = 0; xx < 5; ++xx) {
        const bool in_block = std::abs(z - 2) <= 1 && std::abs(yy - 2) <= 1 && std::abs(xx - 2) <= 1;
        CHECK(y.at(0, 0, z, yy, xx) == (in_block ? 1.0 : 0.0));
      }
}

TEST_CASE("the fast 3x3x3 path agrees with the nested-loop oracle", "[nn]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const std::int64_t ci = 1 + static_cast<std::int64_t>(rng() % 4);
    const std::int64_t co = 1 + static_cast<std::int64_t>(rng() % 5);
    const Tensor x = oracle::random_tensor(TensorShape{2, ci, 4, 5, 6}, rng);
    const Tensor k = oracle::random_tensor(TensorShape{co, ci, 3, 3, 3}, rng);
    std::vector<double> bias(static_cast<std::size_t>(co));
    for (auto& b : bias) b = static_cast<double>(rng() % 7) * 0.1;
    const Tensor y = conv3d_forward(x, k, bias, 1, 1);
    const Tensor want = oracle::conv3d_naive(x, k, bias, 1, 1);
    REQUIRE(y.shape == want.shape);
    for (std::size_t i = 0; i < y.v.size(); ++i)
      REQUIRE(y.v[i] == Catch::Approx(want.v[i]).margin(1e-12));
  }
}

TEST_CASE("a 1x1x1 kernel mixes channels pointwise", "[nn]") {
  std::mt19937_64 rng(11);
  const Tensor x = oracle::random_tensor(TensorShape{1, 32, 4, 4, 4}, rng);
  const Tensor k = oracle::random_tensor(TensorShape{2, 32, 1, 1, 1}, rng);
  const Tensor y = conv3d_forward(x, k, std::vector<double>{0.1, -0.2}, 1, 0);
  CHECK(y.shape == TensorShape{1, 2, 4, 4, 4});
  const Tensor want = oracle::conv3d_naive(x, k, {0.1, -0.2}, 1, 0);
  for (std::size_t i = 0; i < y.v.size(); ++i)
    REQUIRE(y.v[i] == Catch::Approx(want.v[i]).margin(1e-12));
}

TEST_CASE("conv3d backward: zero upstream gradient gives zero gradients", "[nn]") {
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_tensor(TensorShape{1, 2, 4, 4, 4}, rng);
  const Tensor k = oracle::random_tensor(TensorShape{3, 2, 3, 3, 3}, rng);
  const Tensor gz(TensorShape{1, 3, 4, 4, 4});
  const auto g = conv3d_backward(gz, x, k, 1, 1, true);
  for (double v : g.x.v) CHECK(v == 0.0);
  for (double v : g.kernel.v) CHECK(v == 0.0);
  for (double v : g.bias) CHECK(v == 0.0);
}

TEST_CASE("conv3d gradients match central finite differences", "[nn]") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = oracle::random_tensor(TensorShape{1, 1, 4, 4, 4}, rng);
    const Tensor k = oracle::random_tensor(TensorShape{2, 1, 3, 3, 3}, rng);
    const std::vector<double> bias{0.05, -0.1};
    const Tensor r = oracle::random_tensor(TensorShape{1, 2, 4, 4, 4}, rng);

    const auto g = conv3d_backward(r, x, k, 1, 1, true);

    const auto fd_x = oracle::fd_gradient(
        [&](const std::vector<double>& flat) {
          Tensor xx = x;
          xx.v = flat;
          return dot_all(conv3d_forward(xx, k, bias, 1, 1), r);
        },
        x.v);
    CHECK(oracle::rel_error(g.x.v, fd_x) < 1e-3);

    const auto fd_k = oracle::fd_gradient(
        [&](const std::vector<double>& flat) {
          Tensor kk = k;
          kk.v = flat;
          return dot_all(conv3d_forward(x, kk, bias, 1, 1), r);
        },
        k.v);
    CHECK(oracle::rel_error(g.kernel.v, fd_k) < 1e-3);

    const auto fd_b = oracle::fd_gradient(
        [&](const std::vector<double>& b) { return dot_all(conv3d_forward(x, k, b, 1, 1), r); },
        bias);
    CHECK(oracle::rel_error(g.bias, fd_b) < 1e-3);
  }
}

TEST_CASE("conv3d grad_bias is the reduction of the upstream gradient", "[nn]") {
  std::mt19937_64 rng(17);
  const Tensor x = oracle::random_tensor(TensorShape{2, 2, 4, 4, 4}, rng);
  const Tensor k = oracle::random_tensor(TensorShape{3, 2, 3, 3, 3}, rng);
  const Tensor gz = oracle::random_tensor(TensorShape{2, 3, 4, 4, 4}, rng);
  const auto g = conv3d_backward(gz, x, k, 1, 1, false);
  for (std::int64_t co = 0; co < 3; ++co) {
    double want = 0.0;
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t i = 0; i < gz.shape.spatial(); ++i) want += gz.channel(n, co)[i];
    CHECK(g.bias[static_cast<std::size_t>(co)] == Catch::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("batchnorm leaves standardized input nearly unchanged", "[nn]") {
  // a +/-1 alternating channel has mean 0 and variance 1
  Tensor x(TensorShape{1, 1, 2, 2, 2});
  for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] = i % 2 ? 1.0 : -1.0;
  BatchNorm3d bn(1);
  const Tensor y = bn.forward(x, true);
  for (std::size_t i = 0; i < y.v.size(); ++i)
    CHECK(y.v[i] == Catch::Approx(x.v[i]).margin(1e-4));
}

TEST_CASE("train-mode batchnorm standardizes each channel", "[nn]") {
  std::mt19937_64 rng(23);
  const Tensor x = oracle::random_tensor(TensorShape{2, 3, 4, 4, 4}, rng, -5.0, 3.0);
  BatchNorm3d bn(3);
  const Tensor y = bn.forward(x, true);
  for (std::int64_t c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    const std::int64_t count = 2 * y.shape.spatial();
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t i = 0; i < y.shape.spatial(); ++i) mean += y.channel(n, c)[i];
    mean /= static_cast<double>(count);
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t i = 0; i < y.shape.spatial(); ++i)
        var += (y.channel(n, c)[i] - mean) * (y.channel(n, c)[i] - mean);
    var /= static_cast<double>(count);
    CHECK(mean == Catch::Approx(0.0).margin(1e-10));
    CHECK(var == Catch::Approx(1.0).margin(1e-3));
  }
}

TEST_CASE("batchnorm backward matches finite differences", "[nn]") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = oracle::random_tensor(TensorShape{2, 2, 3, 3, 3}, rng);
    std::vector<double> gain{1.3, 0.7}, bias{0.1, -0.4};
    const Tensor r = oracle::random_tensor(TensorShape{2, 2, 3, 3, 3}, rng);

    auto run = [&](const Tensor& input, const std::vector<double>& g,
                   const std::vector<double>& b) {
      BatchNorm3d bn(2);
      bn.gain.value = g;
      bn.bias.value = b;
      return bn.forward(input, true);
    };

    BatchNorm3d bn(2);
    bn.gain.value = gain;
    bn.bias.value = bias;
    (void)bn.forward(x, true);
    const Tensor gx = bn.backward(r);

    const auto fd_x = oracle::fd_gradient(
        [&](const std::vector<double>& flat) {
          Tensor xx = x;
          xx.v = flat;
          return dot_all(run(xx, gain, bias), r);
        },
        x.v);
    CHECK(oracle::rel_error(gx.v, fd_x) < 1e-3);

    const auto fd_gain = oracle::fd_gradient(
        [&](const std::vector<double>& g) { return dot_all(run(x, g, bias), r); }, gain);
    CHECK(oracle::rel_error(bn.gain.grad, fd_gain) < 1e-3);

    const auto fd_bias = oracle::fd_gradient(
        [&](const std::vector<double>& b) { return dot_all(run(x, gain, b), r); }, bias);
    CHECK(oracle::rel_error(bn.bias.grad, fd_bias) < 1e-3);
  }
}

TEST_CASE("eval-mode batchnorm before any training step is an error", "[nn]") {
  BatchNorm3d bn(1);
  Tensor x(TensorShape{1, 1, 2, 2, 2});
  try {
    bn.forward(x, false);
    FAIL("expected uninitialized-stats error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
}

TEST_CASE("maxpool halves resolution and keeps constants constant", "[nn]") {
  const Tensor x(TensorShape{1, 2, 4, 6, 8}, 3.25);
  const auto r = maxpool3d(x);
  CHECK(r.out.shape == TensorShape{1, 2, 2, 3, 4});
  for (double v : r.out.v) CHECK(v == 3.25);
}

TEST_CASE("a 128-cube input pools to a 64-cube", "[nn]") {
  const Tensor x(TensorShape{1, 1, 128, 128, 128});
  const auto r = maxpool3d(x);
  CHECK(r.out.shape == TensorShape{1, 1, 64, 64, 64});
}

TEST_CASE("odd spatial dims cannot be pooled", "[nn]") {
  const Tensor x(TensorShape{1, 1, 3, 4, 4});
  CHECK_THROWS_AS(maxpool3d(x), Error);
}

TEST_CASE("maxpool backward matches finite differences away from ties", "[nn]") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = oracle::random_tensor(TensorShape{1, 2, 4, 4, 4}, rng);
    // keep every pooling window's top two values well separated
    for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += static_cast<double>(i) * 1e-2;
    const Tensor r = oracle::random_tensor(TensorShape{1, 2, 2, 2, 2}, rng);

    const auto pooled = maxpool3d(x);
    const Tensor gx = maxpool3d_backward(r, pooled.argmax, x.shape);
    const auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& flat) {
          Tensor xx = x;
          xx.v = flat;
          return dot_all(maxpool3d(xx).out, r);
        },
        x.v);
    CHECK(oracle::rel_error(gx.v, fd) < 1e-3);
  }
}

TEST_CASE("transposed convolution doubles resolution", "[nn]") {
  std::mt19937_64 rng(37);
  const Tensor x = oracle::random_tensor(TensorShape{1, 2, 64, 32, 16}, rng);
  const Tensor k = oracle::random_tensor(TensorShape{2, 3, 2, 2, 2}, rng);
  const Tensor y = convtranspose3d_forward(x, k);
  CHECK(y.shape == TensorShape{1, 3, 128, 64, 32});
}

TEST_CASE("transposed convolution is the adjoint of the strided convolution", "[nn]") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t ci = 1 + static_cast<std::int64_t>(rng() % 3);
    const std::int64_t co = 1 + static_cast<std::int64_t>(rng() % 3);
    const std::int64_t d = 2 * (1 + static_cast<std::int64_t>(rng() % 3));
    const std::int64_t h = 2 * (1 + static_cast<std::int64_t>(rng() % 3));
    const std::int64_t w = 2 * (1 + static_cast<std::int64_t>(rng() % 3));
    // conv: (1,ci,d,h,w) -> (1,co,d/2,h/2,w/2) with kernel (co,ci,2,2,2)
    const Tensor x = oracle::random_tensor(TensorShape{1, ci, d, h, w}, rng);
    const Tensor y = oracle::random_tensor(TensorShape{1, co, d / 2, h / 2, w / 2}, rng);
    const Tensor k = oracle::random_tensor(TensorShape{co, ci, 2, 2, 2}, rng);

    const Tensor cx = conv3d_forward(x, k, {}, 2, 0);
    REQUIRE(cx.shape == y.shape);
    // convT kernel layout (ci_of_convT = co, co_of_convT = ci): same weights
    Tensor kt(TensorShape{co, ci, 2, 2, 2});
    kt.v = k.v;
    const Tensor cty = convtranspose3d_forward(y, kt);
    REQUIRE(cty.shape == x.shape);

    const double lhs = dot_all(cx, y);
    const double rhs = dot_all(x, cty);
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::max({std::abs(lhs), std::abs(rhs), 1e-30}));
  }
}

TEST_CASE("transposed convolution gradients match finite differences", "[nn]") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = oracle::random_tensor(TensorShape{1, 2, 3, 3, 3}, rng);
    const Tensor k = oracle::random_tensor(TensorShape{2, 2, 2, 2, 2}, rng);
    const Tensor r = oracle::random_tensor(TensorShape{1, 2, 6, 6, 6}, rng);

    const auto g = convtranspose3d_backward(r, x, k, true);
    const auto fd_x = oracle::fd_gradient(
        [&](const std::vector<double>& flat) {
          Tensor xx = x;
          xx.v = flat;
          return dot_all(convtranspose3d_forward(xx, k), r);
        },
        x.v);
    CHECK(oracle::rel_error(g.x.v, fd_x) < 1e-3);

    const auto fd_k = oracle::fd_gradient(
        [&](const std::vector<double>& flat) {
          Tensor kk = k;
          kk.v = flat;
          return dot_all(convtranspose3d_forward(x, kk), r);
        },
        k.v);
    CHECK(oracle::rel_error(g.kernel.v, fd_k) < 1e-3);
  }
}

TEST_CASE("softmax is symmetric, stable, and normalized", "[nn]") {
  Tensor logits(TensorShape{1, 2, 1, 1, 2});
  logits.at(0, 0, 0, 0, 0) = 3.0;
  logits.at(0, 1, 0, 0, 0) = 3.0;
  logits.at(0, 0, 0, 0, 1) = 20.0;
  logits.at(0, 1, 0, 0, 1) = -20.0;
  const Tensor p = softmax_voxelwise(logits);
  CHECK(p.at(0, 0, 0, 0, 0) == 0.5);
  CHECK(p.at(0, 1, 0, 0, 0) == 0.5);
  CHECK(p.at(0, 0, 0, 0, 1) > 1.0 - 1e-12);
  CHECK(std::isfinite(p.at(0, 0, 0, 0, 1)));

  std::mt19937_64 rng(47);
  const Tensor z = oracle::random_tensor(TensorShape{2, 2, 3, 3, 3}, rng, -30.0, 30.0);
  const Tensor q = softmax_voxelwise(z);
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t i = 0; i < q.shape.spatial(); ++i)
      CHECK(std::abs(q.channel(n, 0)[i] + q.channel(n, 1)[i] - 1.0) <= 1e-12);
}

TEST_CASE("dice loss hits 0 on perfect overlap and 1 on disjoint masks", "[nn]") {
  const std::vector<double> g{1, 0, 1, 0};
  CHECK(dice_loss(g, g).loss == 0.0);
  const std::vector<double> p{0, 1, 0, 1};
  CHECK(dice_loss(p, g).loss == 1.0);
}

TEST_CASE("dice loss gradient matches finite differences", "[nn]") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 5; ++trial) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::vector<double> p(64), g(64);
    for (auto& v : p) v = u(rng);
    for (auto& v : g) v = rng() % 2;
    if (std::count(g.begin(), g.end(), 1.0) == 0) g[0] = 1.0;

    const auto r = dice_loss(p, g);
    const auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& pp) { return dice_loss(pp, g).loss; }, p);
    CHECK(oracle::rel_error(r.grad, fd) < 1e-4);
  }
}

TEST_CASE("softmax plus dice composite gradient matches finite differences", "[nn]") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor logits = oracle::random_tensor(TensorShape{1, 2, 3, 3, 3}, rng, -2.0, 2.0);
    std::vector<double> g(static_cast<std::size_t>(logits.shape.spatial()));
    for (auto& v : g) v = rng() % 2;
    if (std::count(g.begin(), g.end(), 1.0) == 0) g[0] = 1.0;

    auto loss_of = [&](const std::vector<double>& flat) {
      Tensor z = logits;
      z.v = flat;
      const Tensor p = softmax_voxelwise(z);
      return dice_loss({p.channel(0, 1), g.size()}, g).loss;
    };

    const Tensor probs = softmax_voxelwise(logits);
    const auto dl = dice_loss({probs.channel(0, 1), g.size()}, g);
    Tensor grad_probs(probs.shape);
    std::copy(dl.grad.begin(), dl.grad.end(), grad_probs.channel(0, 1));
    const Tensor grad_logits = softmax_backward(grad_probs, probs);

    const auto fd = oracle::fd_gradient(loss_of, logits.v);
    CHECK(oracle::rel_error(grad_logits.v, fd) < 1e-3);
  }
}

TEST_CASE("dice loss stays within [0,1] and rejects empty denominators", "[nn]") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(32), g(32);
    for (auto& v : p) v = u(rng);
    for (auto& v : g) v = rng() % 2;
    if (std::count(g.begin(), g.end(), 1.0) == 0) g[5] = 1.0;
    const double loss = dice_loss(p, g).loss;
    CHECK(loss >= 0.0);
    CHECK(loss <= 1.0);
  }
  const std::vector<double> zeros(8, 0.0);
  try {
    dice_loss(zeros, zeros);
    FAIL("expected degenerate-input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
}

TEST_CASE("adam leaves parameters unchanged under zero gradient", "[nn]") {
  ParamTensor p;
  p.init("p", {4}, 4, 1.5);
  std::vector<ParamTensor*> ps{&p};
  adam_step(ps, 1, AdamConfig{});
  for (double v : p.value) CHECK(v == 1.5);
}

TEST_CASE("the first adam step moves a unit-gradient scalar by about lr", "[nn]") {
  ParamTensor p;
  p.init("p", {1}, 1, 0.0);
  p.grad[0] = 1.0;
  std::vector<ParamTensor*> ps{&p};
  AdamConfig cfg;
  cfg.learning_rate = 1e-4;
  adam_step(ps, 1, cfg);
  // bias-corrected first step: lr * g / (|g| + eps)
  CHECK(std::abs(-p.value[0] - 1e-4) < 1e-9);
}

TEST_CASE("adam is deterministic across runs", "[nn]") {
  auto run = [] {
    std::mt19937_64 rng(71);
    ParamTensor p;
    p.init("p", {8}, 8, 0.5);
    std::vector<ParamTensor*> ps{&p};
    for (std::uint64_t t = 1; t <= 10; ++t) {
      for (auto& g : p.grad) g = std::uniform_real_distribution<double>(-1, 1)(rng);
      adam_step(ps, t, AdamConfig{});
    }
    return p.value;
  };
  CHECK(run() == run());
}
