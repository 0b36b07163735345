#pragma once

#include <vector>

#include "femseg/core/numeric.hpp"
#include "femseg/nn/tensor.hpp"

namespace femseg {

// Transposed convolution with a 2x2x2 kernel and stride 2, the adjoint of
// the matching stride-2 valid convolution: <conv(x), y> = <x, convT(y)>.
// Kernel layout (Ci, Co, 2, 2, 2). Because stride equals kernel size, each
// output voxel receives exactly one tap per input channel; outputs factor
// into eight parity sub-grids, each a channel mix of the input.

namespace convt_detail {

inline std::int64_t kidx(const TensorShape& ks, std::int64_t ci, std::int64_t co, std::int64_t kz,
                         std::int64_t ky, std::int64_t kx) {
  return (((ci * ks.c + co) * 2 + kz) * 2 + ky) * 2 + kx;
}

}  // namespace convt_detail

inline Tensor convtranspose3d_forward(const Tensor& x, const Tensor& kernel) {
  if (kernel.shape.n != x.shape.c)
    raise(ErrorKind::Shape, "convtranspose kernel expects " + std::to_string(kernel.shape.n) +
                                " input channels, tensor has " + std::to_string(x.shape.c));
  if (kernel.shape.d != 2 || kernel.shape.h != 2 || kernel.shape.w != 2)
    raise(ErrorKind::Shape, "convtranspose3d supports 2x2x2 kernels");
  const std::int64_t Ci = x.shape.c, Co = kernel.shape.c;
  const std::int64_t D = x.shape.d, H = x.shape.h, W = x.shape.w;
  Tensor out(TensorShape{x.shape.n, Co, 2 * D, 2 * H, 2 * W});

  std::vector<double> sub(static_cast<std::size_t>(x.shape.spatial()));
  for (std::int64_t n = 0; n < x.shape.n; ++n)
    for (std::int64_t co = 0; co < Co; ++co) {
      double* oc = out.channel(n, co);
      for (std::int64_t kz = 0; kz < 2; ++kz)
        for (std::int64_t ky = 0; ky < 2; ++ky)
          for (std::int64_t kx = 0; kx < 2; ++kx) {
            std::fill(sub.begin(), sub.end(), 0.0);
            for (std::int64_t ci = 0; ci < Ci; ++ci) {
              const double w = kernel.v[static_cast<std::size_t>(
                  convt_detail::kidx(kernel.shape, ci, co, kz, ky, kx))];
              const double* in = x.channel(n, ci);
              for (std::int64_t i = 0; i < x.shape.spatial(); ++i) sub[static_cast<std::size_t>(i)] += w * in[i];
            }
            for (std::int64_t z = 0; z < D; ++z)
              for (std::int64_t y = 0; y < H; ++y) {
                const double* srow = sub.data() + (z * H + y) * W;
                double* orow = oc + ((2 * z + kz) * 2 * H + (2 * y + ky)) * 2 * W + kx;
                for (std::int64_t xx = 0; xx < W; ++xx) orow[2 * xx] = srow[xx];
              }
          }
    }
  return out;
}

struct ConvTranspose3dGrads {
  Tensor x;
  Tensor kernel;
};

inline ConvTranspose3dGrads convtranspose3d_backward(const Tensor& grad_out, const Tensor& x,
                                                     const Tensor& kernel,
                                                     bool need_grad_x = true) {
  const std::int64_t Ci = x.shape.c, Co = kernel.shape.c;
  const std::int64_t D = x.shape.d, H = x.shape.h, W = x.shape.w;
  if (grad_out.shape.d != 2 * D || grad_out.shape.h != 2 * H || grad_out.shape.w != 2 * W ||
      grad_out.shape.c != Co || grad_out.shape.n != x.shape.n)
    raise(ErrorKind::Shape, "convtranspose backward: grad shape " + grad_out.shape.str());

  ConvTranspose3dGrads g;
  g.kernel = Tensor(kernel.shape);
  if (need_grad_x) g.x = Tensor(x.shape);

  std::vector<double> sub(static_cast<std::size_t>(x.shape.spatial()));
  for (std::int64_t n = 0; n < x.shape.n; ++n)
    for (std::int64_t co = 0; co < Co; ++co) {
      const double* go = grad_out.channel(n, co);
      for (std::int64_t kz = 0; kz < 2; ++kz)
        for (std::int64_t ky = 0; ky < 2; ++ky)
          for (std::int64_t kx = 0; kx < 2; ++kx) {
            // gather the parity sub-grid of grad_out once per (co, tap)
            for (std::int64_t z = 0; z < D; ++z)
              for (std::int64_t y = 0; y < H; ++y) {
                const double* grow = go + ((2 * z + kz) * 2 * H + (2 * y + ky)) * 2 * W + kx;
                double* srow = sub.data() + (z * H + y) * W;
                for (std::int64_t xx = 0; xx < W; ++xx) srow[xx] = grow[2 * xx];
              }
            for (std::int64_t ci = 0; ci < Ci; ++ci) {
              const double* in = x.channel(n, ci);
              g.kernel.v[static_cast<std::size_t>(
                  convt_detail::kidx(kernel.shape, ci, co, kz, ky, kx))] +=
                  lane_dot(in, sub.data(), static_cast<std::size_t>(x.shape.spatial()));
              if (need_grad_x) {
                const double w = kernel.v[static_cast<std::size_t>(
                    convt_detail::kidx(kernel.shape, ci, co, kz, ky, kx))];
                double* gx = g.x.channel(n, ci);
                for (std::int64_t i = 0; i < x.shape.spatial(); ++i)
                  gx[i] += w * sub[static_cast<std::size_t>(i)];
              }
            }
          }
    }
  return g;
}

}  // namespace femseg
