#pragma once

#include <random>
#include <vector>

#include "femseg/core/rng.hpp"
#include "femseg/nn/activations.hpp"
#include "femseg/nn/batchnorm.hpp"
#include "femseg/nn/conv3d.hpp"
#include "femseg/nn/convtranspose.hpp"
#include "femseg/nn/param.hpp"
#include "femseg/nn/pooling.hpp"

// 4-level encoder/decoder for volumetric two-class segmentation. Encoder
// levels run [conv3-BN-ReLU]x2 then 2x2x2 max pooling; decoder levels run a
// 2x2x2 transposed convolution, concatenate the matching encoder output,
// then [conv3-BN-ReLU]x2; a final 1x1x1 convolution maps to class logits.
// Channel widths double per level from base_features.

namespace femseg {

struct UNetConfig {
  std::int64_t levels = 4;
  std::int64_t base_features = 32;
  std::int64_t in_channels = 1;
  std::int64_t out_classes = 2;

  std::int64_t features_at(std::int64_t level) const { return base_features << level; }
  std::int64_t spatial_divisor() const { return std::int64_t{1} << (levels - 1); }

  void validate() const {
    if (levels < 2 || levels > 8) raise(ErrorKind::Config, "levels must be in [2, 8]");
    if (base_features < 1 || in_channels < 1 || out_classes < 2)
      raise(ErrorKind::Config, "invalid channel configuration");
  }

  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

namespace unet_detail {

inline Tensor to_tensor(const ParamTensor& p, TensorShape s) {
  Tensor t(s);
  if (t.v.size() != p.value.size()) raise(ErrorKind::Shape, "parameter shape mismatch");
  t.v = p.value;
  return t;
}

inline void accumulate(ParamTensor& p, const std::vector<double>& g) {
  for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g[i];
}

inline void he_init(ParamTensor& p, std::int64_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : p.value) v = dist(rng);
}

}  // namespace unet_detail

/// conv3(pad 1) -> batch norm -> ReLU.
struct ConvBnRelu {
  std::int64_t in_ch = 0, out_ch = 0;
  ParamTensor weight, bias;
  BatchNorm3d bn;
  Tensor saved_input;
  std::vector<std::uint8_t> relu_mask;

  void build(std::int64_t in, std::int64_t out, const std::string& prefix,
             std::mt19937_64& rng) {
    in_ch = in;
    out_ch = out;
    weight.init(prefix + ".weight", {out, in, 3, 3, 3},
                static_cast<std::size_t>(out * in * 27));
    bias.init(prefix + ".bias", {out}, static_cast<std::size_t>(out));
    unet_detail::he_init(weight, in * 27, rng);
    bn = BatchNorm3d(out);
    bn.gain.name = prefix + ".bn.gain";
    bn.bias.name = prefix + ".bn.bias";
  }

  TensorShape kshape() const { return TensorShape{out_ch, in_ch, 3, 3, 3}; }

  Tensor forward(Tensor x, bool train) {
    Tensor y = conv3d_forward(x, unet_detail::to_tensor(weight, kshape()), bias.value, 1, 1);
    if (train)
      saved_input = std::move(x);
    else
      x.release();
    y = bn.forward(y, train);
    if (train) {
      auto r = relu(y, true);
      relu_mask = std::move(r.mask);
      return std::move(r.out);
    }
    relu_inplace(y);
    return y;
  }

  Tensor backward(const Tensor& grad_out, bool need_input_grad = true) {
    Tensor g = relu_backward(grad_out, relu_mask);
    g = bn.backward(g);
    auto cg = conv3d_backward(g, saved_input, unet_detail::to_tensor(weight, kshape()), 1, 1,
                              need_input_grad);
    unet_detail::accumulate(weight, cg.kernel.v);
    unet_detail::accumulate(bias, cg.bias);
    return std::move(cg.x);
  }

  void drop_saved() {
    saved_input = Tensor();
    relu_mask.clear();
    bn.drop_saved();
  }
};

struct DoubleConv {
  ConvBnRelu c1, c2;

  void build(std::int64_t in, std::int64_t out, const std::string& prefix,
             std::mt19937_64& rng) {
    c1.build(in, out, prefix + ".conv1", rng);
    c2.build(out, out, prefix + ".conv2", rng);
  }
  Tensor forward(Tensor x, bool train) { return c2.forward(c1.forward(std::move(x), train), train); }
  Tensor backward(const Tensor& g, bool need_input_grad = true) {
    return c1.backward(c2.backward(g), need_input_grad);
  }
  void drop_saved() {
    c1.drop_saved();
    c2.drop_saved();
  }
};

/// 2x2x2 stride-2 transposed convolution (no bias).
struct UpConv {
  std::int64_t in_ch = 0, out_ch = 0;
  ParamTensor weight;
  Tensor saved_input;

  void build(std::int64_t in, std::int64_t out, const std::string& prefix,
             std::mt19937_64& rng) {
    in_ch = in;
    out_ch = out;
    weight.init(prefix + ".weight", {in, out, 2, 2, 2}, static_cast<std::size_t>(in * out * 8));
    unet_detail::he_init(weight, in * 8, rng);
  }

  TensorShape kshape() const { return TensorShape{in_ch, out_ch, 2, 2, 2}; }

  Tensor forward(Tensor x, bool train) {
    Tensor y = convtranspose3d_forward(x, unet_detail::to_tensor(weight, kshape()));
    if (train)
      saved_input = std::move(x);
    else
      x.release();
    return y;
  }

  Tensor backward(const Tensor& grad_out) {
    auto g = convtranspose3d_backward(grad_out, saved_input,
                                      unet_detail::to_tensor(weight, kshape()), true);
    unet_detail::accumulate(weight, g.kernel.v);
    return std::move(g.x);
  }

  void drop_saved() { saved_input = Tensor(); }
};

struct PoolState {
  std::vector<std::int64_t> argmax;
  TensorShape in_shape;
};

struct UNetModel {
  UNetConfig config;
  std::vector<DoubleConv> enc;  // levels-1 blocks
  DoubleConv bottom;
  std::vector<UpConv> up;       // up[l]: features(l+1) -> features(l)
  std::vector<DoubleConv> dec;  // dec[l]: 2*features(l) -> features(l)
  ParamTensor final_w, final_b;
  std::uint64_t adam_t = 0;

  // transient train-mode state
  std::vector<PoolState> pools;
  Tensor final_saved;

  std::vector<ParamTensor*> parameters() {
    std::vector<ParamTensor*> ps;
    auto add_block = [&](DoubleConv& b) {
      for (ConvBnRelu* u : {&b.c1, &b.c2}) {
        ps.push_back(&u->weight);
        ps.push_back(&u->bias);
        ps.push_back(&u->bn.gain);
        ps.push_back(&u->bn.bias);
      }
    };
    for (auto& b : enc) add_block(b);
    add_block(bottom);
    for (auto& u : up) ps.push_back(&u.weight);
    for (auto& b : dec) add_block(b);
    ps.push_back(&final_w);
    ps.push_back(&final_b);
    return ps;
  }

  std::vector<BatchNorm3d*> batchnorms() {
    std::vector<BatchNorm3d*> bns;
    for (auto& b : enc) {
      bns.push_back(&b.c1.bn);
      bns.push_back(&b.c2.bn);
    }
    bns.push_back(&bottom.c1.bn);
    bns.push_back(&bottom.c2.bn);
    for (auto& b : dec) {
      bns.push_back(&b.c1.bn);
      bns.push_back(&b.c2.bn);
    }
    return bns;
  }

  void zero_grad() {
    for (ParamTensor* p : parameters()) p->zero_grad();
  }

  void drop_saved() {
    for (auto& b : enc) b.drop_saved();
    bottom.drop_saved();
    for (auto& u : up) u.drop_saved();
    for (auto& b : dec) b.drop_saved();
    pools.clear();
    final_saved = Tensor();
  }
};

inline UNetModel make_unet(const UNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  UNetModel m;
  m.config = cfg;
  auto rng = make_rng(derive_seed(seed, 0x756e6574));  // parameter stream
  const std::int64_t L = cfg.levels;
  m.enc.resize(static_cast<std::size_t>(L - 1));
  m.up.resize(static_cast<std::size_t>(L - 1));
  m.dec.resize(static_cast<std::size_t>(L - 1));
  std::int64_t in = cfg.in_channels;
  for (std::int64_t l = 0; l < L - 1; ++l) {
    m.enc[static_cast<std::size_t>(l)].build(in, cfg.features_at(l),
                                             "enc" + std::to_string(l), rng);
    in = cfg.features_at(l);
  }
  m.bottom.build(cfg.features_at(L - 2), cfg.features_at(L - 1), "bottom", rng);
  for (std::int64_t l = L - 2; l >= 0; --l) {
    m.up[static_cast<std::size_t>(l)].build(cfg.features_at(l + 1), cfg.features_at(l),
                                            "up" + std::to_string(l), rng);
    m.dec[static_cast<std::size_t>(l)].build(2 * cfg.features_at(l), cfg.features_at(l),
                                             "dec" + std::to_string(l), rng);
  }
  m.final_w.init("final.weight", {cfg.out_classes, cfg.base_features, 1, 1, 1},
                 static_cast<std::size_t>(cfg.out_classes * cfg.base_features));
  m.final_b.init("final.bias", {cfg.out_classes}, static_cast<std::size_t>(cfg.out_classes));
  unet_detail::he_init(m.final_w, cfg.base_features, rng);
  return m;
}

/// Full forward pass; input (N, in_channels, D, H, W) with spatial dims
/// divisible by 2^(levels-1). Returns (N, out_classes, D, H, W) logits.
inline Tensor unet_forward(UNetModel& m, Tensor x, bool train) {
  if (x.shape.c != m.config.in_channels)
    raise(ErrorKind::Shape, "expected " + std::to_string(m.config.in_channels) +
                                " input channels, got " + std::to_string(x.shape.c));
  const std::int64_t div = m.config.spatial_divisor();
  if (x.shape.d % div != 0 || x.shape.h % div != 0 || x.shape.w % div != 0)
    raise(ErrorKind::Shape,
          "spatial dims must be divisible by " + std::to_string(div) + ", got " + x.shape.str());

  const std::int64_t L = m.config.levels;
  if (train) m.pools.assign(static_cast<std::size_t>(L - 1), {});
  std::vector<Tensor> skips(static_cast<std::size_t>(L - 1));

  Tensor t = std::move(x);
  for (std::int64_t l = 0; l < L - 1; ++l) {
    t = m.enc[static_cast<std::size_t>(l)].forward(std::move(t), train);
    auto pooled = maxpool3d(t);
    skips[static_cast<std::size_t>(l)] = std::move(t);
    if (train)
      m.pools[static_cast<std::size_t>(l)] = {std::move(pooled.argmax),
                                              skips[static_cast<std::size_t>(l)].shape};
    t = std::move(pooled.out);
  }
  t = m.bottom.forward(std::move(t), train);
  for (std::int64_t l = L - 2; l >= 0; --l) {
    t = m.up[static_cast<std::size_t>(l)].forward(std::move(t), train);
    Tensor cat = concat_channels(t, skips[static_cast<std::size_t>(l)]);
    t.release();
    skips[static_cast<std::size_t>(l)].release();
    t = m.dec[static_cast<std::size_t>(l)].forward(std::move(cat), train);
  }

  Tensor logits =
      conv3d_forward(t, unet_detail::to_tensor(m.final_w, TensorShape{m.config.out_classes,
                                                                      m.config.base_features, 1,
                                                                      1, 1}),
                     m.final_b.value, 1, 0);
  if (train)
    m.final_saved = std::move(t);
  else
    t.release();
  return logits;
}

/// Backpropagates d(loss)/d(logits), accumulating every parameter gradient.
inline void unet_backward(UNetModel& m, const Tensor& grad_logits) {
  if (m.final_saved.numel() == 0)
    raise(ErrorKind::Degenerate, "unet backward without a saved train-mode forward");
  const std::int64_t L = m.config.levels;

  auto fg = conv3d_backward(grad_logits, m.final_saved,
                            unet_detail::to_tensor(m.final_w,
                                                   TensorShape{m.config.out_classes,
                                                               m.config.base_features, 1, 1, 1}),
                            1, 0, true);
  unet_detail::accumulate(m.final_w, fg.kernel.v);
  unet_detail::accumulate(m.final_b, fg.bias);
  Tensor g = std::move(fg.x);

  std::vector<Tensor> skip_grads(static_cast<std::size_t>(L - 1));
  for (std::int64_t l = 0; l < L - 1; ++l) {
    g = m.dec[static_cast<std::size_t>(l)].backward(g);
    auto [g_up, g_skip] = split_channels(g, m.config.features_at(l));
    skip_grads[static_cast<std::size_t>(l)] = std::move(g_skip);
    g = m.up[static_cast<std::size_t>(l)].backward(g_up);
  }
  g = m.bottom.backward(g);
  for (std::int64_t l = L - 2; l >= 0; --l) {
    auto& pool = m.pools[static_cast<std::size_t>(l)];
    g = maxpool3d_backward(g, pool.argmax, pool.in_shape);
    const Tensor& sg = skip_grads[static_cast<std::size_t>(l)];
    for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += sg.v[i];
    g = m.enc[static_cast<std::size_t>(l)].backward(g, l > 0);
  }
}

}  // namespace femseg
