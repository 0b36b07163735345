#pragma once

#include <vector>

#include "femseg/nn/tensor.hpp"

namespace femseg {

struct MaxPoolResult {
  Tensor out;
  std::vector<std::int64_t> argmax;  // flat input index per output element
};

/// 2x2x2 window maximum with stride 2; ties resolve to the first index in
/// (z, y, x) scan order. Spatial dims must be even.
inline MaxPoolResult maxpool3d(const Tensor& x) {
  if (x.shape.d % 2 != 0 || x.shape.h % 2 != 0 || x.shape.w % 2 != 0)
    raise(ErrorKind::Shape, "maxpool3d requires even spatial dims, got " + x.shape.str());
  MaxPoolResult r;
  r.out = Tensor(TensorShape{x.shape.n, x.shape.c, x.shape.d / 2, x.shape.h / 2, x.shape.w / 2});
  r.argmax.assign(static_cast<std::size_t>(r.out.numel()), 0);

  std::size_t oi = 0;
  for (std::int64_t n = 0; n < x.shape.n; ++n)
    for (std::int64_t c = 0; c < x.shape.c; ++c) {
      const double* in = x.channel(n, c);
      const std::int64_t base = (n * x.shape.c + c) * x.shape.spatial();
      for (std::int64_t z = 0; z < r.out.shape.d; ++z)
        for (std::int64_t y = 0; y < r.out.shape.h; ++y)
          for (std::int64_t xx = 0; xx < r.out.shape.w; ++xx) {
            double best = -1.0;
            std::int64_t best_idx = -1;
            for (std::int64_t kz = 0; kz < 2; ++kz)
              for (std::int64_t ky = 0; ky < 2; ++ky)
                for (std::int64_t kx = 0; kx < 2; ++kx) {
                  const std::int64_t idx =
                      ((2 * z + kz) * x.shape.h + (2 * y + ky)) * x.shape.w + (2 * xx + kx);
                  const double v = in[idx];
                  if (best_idx < 0 || v > best) {
                    best = v;
                    best_idx = idx;
                  }
                }
            r.out.v[oi] = best;
            r.argmax[oi] = base + best_idx;
            ++oi;
          }
    }
  return r;
}

/// Routes each output gradient to the input position that won the forward max.
inline Tensor maxpool3d_backward(const Tensor& grad_out, const std::vector<std::int64_t>& argmax,
                                 TensorShape input_shape) {
  if (static_cast<std::int64_t>(argmax.size()) != grad_out.numel())
    raise(ErrorKind::Shape, "maxpool backward: argmax length mismatch");
  Tensor gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i)
    gx.v[static_cast<std::size_t>(argmax[i])] += grad_out.v[i];
  return gx;
}

}  // namespace femseg
