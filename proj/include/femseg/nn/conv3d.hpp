#pragma once

#include <cstring>
#include <span>
#include <vector>

#include "femseg/core/numeric.hpp"
#include "femseg/nn/tensor.hpp"

// Direct 3D cross-correlation. The stride-1/pad-1/3x3x3 case that dominates
// training and inference runs through a register-blocked micro-kernel (two
// output channels x 32-wide row chunks over a zero-padded copy of the
// input); everything else takes the generic path. Per output voxel the
// accumulation order is fixed (ci, kz, ky, kx), so results are reproducible.

namespace femseg {

namespace conv_detail {

/// Copies all channels of sample n into a zero-padded scratch volume.
inline void pad_sample(const Tensor& x, std::int64_t n, std::int64_t pad,
                       std::vector<double>& out) {
  const auto& s = x.shape;
  const std::int64_t Dp = s.d + 2 * pad, Hp = s.h + 2 * pad, Wp = s.w + 2 * pad;
  out.assign(static_cast<std::size_t>(s.c * Dp * Hp * Wp), 0.0);
  for (std::int64_t c = 0; c < s.c; ++c) {
    const double* src = x.channel(n, c);
    double* dst = out.data() + c * Dp * Hp * Wp;
    for (std::int64_t z = 0; z < s.d; ++z)
      for (std::int64_t y = 0; y < s.h; ++y)
        std::memcpy(dst + ((z + pad) * Hp + (y + pad)) * Wp + pad, src + (z * s.h + y) * s.w,
                    static_cast<std::size_t>(s.w) * sizeof(double));
  }
}

/// 3x3x3, stride 1, pad 1 micro-kernel: CB output channels per input pass,
/// 32-wide register-blocked row chunks.
template <int CB>
inline void fast3_rows(const double* padded, std::int64_t Ci, std::int64_t D, std::int64_t H,
                       std::int64_t W, const double* kernel, const double* bias,
                       std::int64_t co0, double* out_base, std::int64_t out_ch_stride) {
  constexpr int XB = 32;
  const std::int64_t Hp = H + 2, Wp = W + 2;
  const std::int64_t pplane = Hp * Wp, pvol = (D + 2) * pplane;
  for (std::int64_t z = 0; z < D; ++z) {
    for (std::int64_t y = 0; y < H; ++y) {
      std::int64_t xb = 0;
      for (; xb + XB <= W; xb += XB) {
        double acc[CB][XB];
        for (int c = 0; c < CB; ++c)
          for (int j = 0; j < XB; ++j) acc[c][j] = bias ? bias[co0 + c] : 0.0;
        for (std::int64_t ci = 0; ci < Ci; ++ci) {
          const double* pc = padded + ci * pvol;
          for (int kz = 0; kz < 3; ++kz)
            for (int ky = 0; ky < 3; ++ky) {
              const double* row = pc + (z + kz) * pplane + (y + ky) * Wp + xb;
              for (int kx = 0; kx < 3; ++kx)
                for (int c = 0; c < CB; ++c) {
                  const double w = kernel[(((co0 + c) * Ci + ci) * 27) + kz * 9 + ky * 3 + kx];
                  for (int j = 0; j < XB; ++j) acc[c][j] += w * row[j + kx];
                }
            }
        }
        for (int c = 0; c < CB; ++c) {
          double* orow = out_base + (co0 + c) * out_ch_stride + (z * H + y) * W + xb;
          for (int j = 0; j < XB; ++j) orow[j] = acc[c][j];
        }
      }
      for (; xb < W; ++xb) {  // row tail
        for (int c = 0; c < CB; ++c) {
          double a = bias ? bias[co0 + c] : 0.0;
          const double* w = kernel + (co0 + c) * Ci * 27;
          for (std::int64_t ci = 0; ci < Ci; ++ci) {
            const double* pc = padded + ci * pvol;
            for (int kz = 0; kz < 3; ++kz)
              for (int ky = 0; ky < 3; ++ky) {
                const double* row = pc + (z + kz) * pplane + (y + ky) * Wp + xb;
                a += w[0] * row[0] + w[1] * row[1] + w[2] * row[2];
                w += 3;
              }
          }
          out_base[(co0 + c) * out_ch_stride + (z * H + y) * W + xb] = a;
        }
      }
    }
  }
}

inline void fast3_forward(const Tensor& x, const Tensor& kernel, const double* bias,
                          Tensor& out) {
  const std::int64_t Ci = x.shape.c, Co = kernel.shape.n;
  const std::int64_t D = x.shape.d, H = x.shape.h, W = x.shape.w;
  std::vector<double> padded;
  for (std::int64_t n = 0; n < x.shape.n; ++n) {
    pad_sample(x, n, 1, padded);
    double* out_base = out.channel(n, 0);
    std::int64_t co = 0;
    for (; co + 2 <= Co; co += 2)
      fast3_rows<2>(padded.data(), Ci, D, H, W, kernel.v.data(), bias, co, out_base, D * H * W);
    if (co < Co)
      fast3_rows<1>(padded.data(), Ci, D, H, W, kernel.v.data(), bias, co, out_base, D * H * W);
  }
}

inline void generic_forward(const Tensor& x, const Tensor& kernel, const double* bias,
                            std::int64_t stride, std::int64_t pad, Tensor& out) {
  const std::int64_t Ci = x.shape.c, Co = kernel.shape.n;
  const std::int64_t kd = kernel.shape.d, kh = kernel.shape.h, kw = kernel.shape.w;
  const std::int64_t Dp = x.shape.d + 2 * pad, Hp = x.shape.h + 2 * pad, Wp = x.shape.w + 2 * pad;
  std::vector<double> padded;
  for (std::int64_t n = 0; n < x.shape.n; ++n) {
    pad_sample(x, n, pad, padded);
    for (std::int64_t co = 0; co < Co; ++co) {
      double* oc = out.channel(n, co);
      for (std::int64_t z = 0; z < out.shape.d; ++z)
        for (std::int64_t y = 0; y < out.shape.h; ++y)
          for (std::int64_t xx = 0; xx < out.shape.w; ++xx) {
            double a = bias ? bias[co] : 0.0;
            for (std::int64_t ci = 0; ci < Ci; ++ci) {
              const double* pc = padded.data() + ci * Dp * Hp * Wp;
              const double* w = kernel.v.data() + ((co * Ci + ci) * kd) * kh * kw;
              for (std::int64_t kz = 0; kz < kd; ++kz)
                for (std::int64_t ky = 0; ky < kh; ++ky) {
                  const double* row = pc + (z * stride + kz) * Hp * Wp + (y * stride + ky) * Wp +
                                      xx * stride;
                  for (std::int64_t kx = 0; kx < kw; ++kx) a += w[kx] * row[kx];
                  w += kw;
                }
            }
            oc[(z * out.shape.h + y) * out.shape.w + xx] = a;
          }
    }
  }
}

/// Single-pass triple dot against three shifted copies of b:
/// r[k] = sum_j a[j] * b[j + k] for k in {0,1,2}. Fixed lane order.
inline void dot3(const double* a, const double* b, std::int64_t n, double r[3]) {
  double lanes[3][4] = {{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}};
  std::int64_t j = 0;
  for (; j + 4 <= n; j += 4)
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 4; ++l) lanes[k][l] += a[j + l] * b[j + l + k];
  double tail[3] = {0, 0, 0};
  for (; j < n; ++j)
    for (int k = 0; k < 3; ++k) tail[k] += a[j] * b[j + k];
  for (int k = 0; k < 3; ++k)
    r[k] = (lanes[k][0] + lanes[k][1]) + (lanes[k][2] + lanes[k][3]) + tail[k];
}

}  // namespace conv_detail

/// Cross-correlation of x (N,Ci,D,H,W) with kernel (Co,Ci,kd,kh,kw) plus an
/// optional per-channel bias. Zero padding, square stride.
inline Tensor conv3d_forward(const Tensor& x, const Tensor& kernel,
                             std::span<const double> bias, std::int64_t stride = 1,
                             std::int64_t pad = 1) {
  if (kernel.shape.c != x.shape.c)
    raise(ErrorKind::Shape, "kernel expects " + std::to_string(kernel.shape.c) +
                                " input channels, tensor has " + std::to_string(x.shape.c));
  if (!bias.empty() && static_cast<std::int64_t>(bias.size()) != kernel.shape.n)
    raise(ErrorKind::Shape, "bias length does not match output channels");
  if (stride < 1 || pad < 0) raise(ErrorKind::Shape, "invalid stride/pad");
  const std::int64_t od = (x.shape.d + 2 * pad - kernel.shape.d) / stride + 1;
  const std::int64_t oh = (x.shape.h + 2 * pad - kernel.shape.h) / stride + 1;
  const std::int64_t ow = (x.shape.w + 2 * pad - kernel.shape.w) / stride + 1;
  if (od < 1 || oh < 1 || ow < 1) raise(ErrorKind::Shape, "kernel larger than padded input");

  Tensor out(TensorShape{x.shape.n, kernel.shape.n, od, oh, ow});
  const double* b = bias.empty() ? nullptr : bias.data();
  const bool fast = kernel.shape.d == 3 && kernel.shape.h == 3 && kernel.shape.w == 3 &&
                    stride == 1 && pad == 1;
  if (fast)
    conv_detail::fast3_forward(x, kernel, b, out);
  else
    conv_detail::generic_forward(x, kernel, b, stride, pad, out);
  return out;
}

struct Conv3dGrads {
  Tensor x;                  // empty when not requested
  Tensor kernel;
  std::vector<double> bias;  // sum of grad_out over all but the channel axis
};

/// Exact gradients of conv3d_forward given the saved input.
inline Conv3dGrads conv3d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& kernel,
                                   std::int64_t stride = 1, std::int64_t pad = 1,
                                   bool need_grad_x = true) {
  const std::int64_t Ci = x.shape.c, Co = kernel.shape.n;
  Conv3dGrads g;
  g.kernel = Tensor(kernel.shape);
  g.bias.assign(static_cast<std::size_t>(Co), 0.0);

  const std::int64_t sp_out = grad_out.shape.spatial();
  for (std::int64_t co = 0; co < Co; ++co) {
    double acc = 0.0;
    for (std::int64_t n = 0; n < grad_out.shape.n; ++n)
      acc += lane_sum(std::span<const double>(grad_out.channel(n, co),
                                              static_cast<std::size_t>(sp_out)));
    g.bias[static_cast<std::size_t>(co)] = acc;
  }

  const bool fast = kernel.shape.d == 3 && kernel.shape.h == 3 && kernel.shape.w == 3 &&
                    stride == 1 && pad == 1;
  if (fast) {
    const std::int64_t D = x.shape.d, H = x.shape.h, W = x.shape.w;
    const std::int64_t Hp = H + 2, Wp = W + 2, pplane = Hp * Wp, pvol = (D + 2) * pplane;
    std::vector<double> padded;
    for (std::int64_t n = 0; n < x.shape.n; ++n) {
      conv_detail::pad_sample(x, n, 1, padded);
      for (std::int64_t co = 0; co < Co; ++co) {
        const double* go = grad_out.channel(n, co);
        for (std::int64_t ci = 0; ci < Ci; ++ci) {
          const double* pc = padded.data() + ci * pvol;
          double* gk = g.kernel.v.data() + (co * Ci + ci) * 27;
          for (int kz = 0; kz < 3; ++kz)
            for (int ky = 0; ky < 3; ++ky) {
              double acc[3] = {0, 0, 0};
              for (std::int64_t z = 0; z < D; ++z)
                for (std::int64_t y = 0; y < H; ++y) {
                  double r[3];
                  conv_detail::dot3(go + (z * H + y) * W, pc + (z + kz) * pplane + (y + ky) * Wp,
                                    W, r);
                  acc[0] += r[0];
                  acc[1] += r[1];
                  acc[2] += r[2];
                }
              for (int kx = 0; kx < 3; ++kx) gk[kz * 9 + ky * 3 + kx] += acc[kx];
            }
        }
      }
    }
    if (need_grad_x) {
      // grad_x is a stride-1/pad-1 correlation of grad_out with the kernel
      // flipped in all spatial axes and transposed in its channel axes.
      Tensor swapped(TensorShape{Ci, Co, 3, 3, 3});
      for (std::int64_t co = 0; co < Co; ++co)
        for (std::int64_t ci = 0; ci < Ci; ++ci)
          for (int kz = 0; kz < 3; ++kz)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx)
                swapped.v[static_cast<std::size_t>(
                    ((ci * Co + co) * 9 + (2 - kz) * 3 + (2 - ky)) * 3 + (2 - kx))] =
                    kernel.v[static_cast<std::size_t>((co * Ci + ci) * 27 + kz * 9 + ky * 3 +
                                                      kx)];
      g.x = conv3d_forward(grad_out, swapped, {}, 1, 1);
    }
    return g;
  }

  // Generic path: scatter/gather loops over every tap.
  const std::int64_t kd = kernel.shape.d, kh = kernel.shape.h, kw = kernel.shape.w;
  if (need_grad_x) g.x = Tensor(x.shape);
  for (std::int64_t n = 0; n < x.shape.n; ++n)
    for (std::int64_t co = 0; co < Co; ++co) {
      const double* go = grad_out.channel(n, co);
      for (std::int64_t z = 0; z < grad_out.shape.d; ++z)
        for (std::int64_t y = 0; y < grad_out.shape.h; ++y)
          for (std::int64_t xx = 0; xx < grad_out.shape.w; ++xx) {
            const double gval = go[(z * grad_out.shape.h + y) * grad_out.shape.w + xx];
            if (gval == 0.0) continue;
            for (std::int64_t ci = 0; ci < Ci; ++ci)
              for (std::int64_t kz = 0; kz < kd; ++kz)
                for (std::int64_t ky = 0; ky < kh; ++ky)
                  for (std::int64_t kx = 0; kx < kw; ++kx) {
                    const std::int64_t iz = z * stride + kz - pad;
                    const std::int64_t iy = y * stride + ky - pad;
                    const std::int64_t ix = xx * stride + kx - pad;
                    if (iz < 0 || iz >= x.shape.d || iy < 0 || iy >= x.shape.h || ix < 0 ||
                        ix >= x.shape.w)
                      continue;
                    const double xval = x.at(n, ci, iz, iy, ix);
                    g.kernel.v[static_cast<std::size_t>(
                        (((co * Ci + ci) * kd + kz) * kh + ky) * kw + kx)] += gval * xval;
                    if (need_grad_x)
                      g.x.at(n, ci, iz, iy, ix) +=
                          gval * kernel.v[static_cast<std::size_t>(
                                     (((co * Ci + ci) * kd + kz) * kh + ky) * kw + kx)];
                  }
          }
    }
  return g;
}

}  // namespace femseg
