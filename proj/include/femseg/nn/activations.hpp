#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "femseg/nn/tensor.hpp"

namespace femseg {

struct ReluResult {
  Tensor out;
  std::vector<std::uint8_t> mask;  // 1 where the input was positive
};

inline ReluResult relu(const Tensor& x, bool keep_mask) {
  ReluResult r;
  r.out = Tensor(x.shape);
  if (keep_mask) r.mask.assign(x.v.size(), 0);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const bool pos = x.v[i] > 0.0;
    r.out.v[i] = pos ? x.v[i] : 0.0;
    if (keep_mask) r.mask[i] = pos;
  }
  return r;
}

inline void relu_inplace(Tensor& x) {
  for (auto& v : x.v)
    if (v < 0.0) v = 0.0;
}

inline Tensor relu_backward(const Tensor& grad_out, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != grad_out.v.size()) raise(ErrorKind::Shape, "relu backward mask mismatch");
  Tensor gx(grad_out.shape);
  for (std::size_t i = 0; i < mask.size(); ++i) gx.v[i] = mask[i] ? grad_out.v[i] : 0.0;
  return gx;
}

/// Voxel-wise softmax over the channel axis, stabilized by max subtraction.
inline Tensor softmax_voxelwise(const Tensor& logits) {
  const std::int64_t C = logits.shape.c;
  if (C < 2) raise(ErrorKind::Shape, "softmax needs at least 2 channels");
  Tensor out(logits.shape);
  const std::int64_t sp = logits.shape.spatial();
  std::vector<double> ex(static_cast<std::size_t>(C));
  for (std::int64_t n = 0; n < logits.shape.n; ++n)
    for (std::int64_t i = 0; i < sp; ++i) {
      double mx = logits.channel(n, 0)[i];
      for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, logits.channel(n, c)[i]);
      double denom = 0.0;
      for (std::int64_t c = 0; c < C; ++c) {
        ex[static_cast<std::size_t>(c)] = std::exp(logits.channel(n, c)[i] - mx);
        denom += ex[static_cast<std::size_t>(c)];
      }
      for (std::int64_t c = 0; c < C; ++c)
        out.channel(n, c)[i] = ex[static_cast<std::size_t>(c)] / denom;
    }
  return out;
}

/// Jacobian-vector product of the voxel-wise softmax:
/// dL/dz_c = p_c * (dL/dp_c - sum_k dL/dp_k * p_k).
inline Tensor softmax_backward(const Tensor& grad_probs, const Tensor& probs) {
  require_same_shape(grad_probs, probs, "softmax backward");
  Tensor gz(probs.shape);
  const std::int64_t C = probs.shape.c;
  const std::int64_t sp = probs.shape.spatial();
  for (std::int64_t n = 0; n < probs.shape.n; ++n)
    for (std::int64_t i = 0; i < sp; ++i) {
      double dot = 0.0;
      for (std::int64_t c = 0; c < C; ++c) dot += grad_probs.channel(n, c)[i] * probs.channel(n, c)[i];
      for (std::int64_t c = 0; c < C; ++c)
        gz.channel(n, c)[i] = probs.channel(n, c)[i] * (grad_probs.channel(n, c)[i] - dot);
    }
  return gz;
}

}  // namespace femseg
