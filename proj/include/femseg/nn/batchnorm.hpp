#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "femseg/core/numeric.hpp"
#include "femseg/nn/param.hpp"
#include "femseg/nn/tensor.hpp"

namespace femseg {

/// Per-channel batch normalization over (N, D, H, W). Train mode normalizes
/// with batch statistics and updates the running estimates; eval mode uses
/// the running estimates and requires them to have been initialized by at
/// least one training step (or a checkpoint load). Backward accumulates the
/// gain/bias gradients in place and returns the input gradient.
struct BatchNorm3d {
  std::int64_t channels = 0;
  double eps = 1e-5;
  double momentum = 0.1;

  ParamTensor gain, bias;
  std::vector<double> running_mean, running_var;
  bool stats_initialized = false;

  // saved by the last train-mode forward
  std::vector<double> saved_invstd;
  Tensor saved_xhat;

  BatchNorm3d() = default;
  explicit BatchNorm3d(std::int64_t c) : channels(c) {
    gain.init("bn.gain", {c}, static_cast<std::size_t>(c), 1.0);
    bias.init("bn.bias", {c}, static_cast<std::size_t>(c), 0.0);
    running_mean.assign(static_cast<std::size_t>(c), 0.0);
    running_var.assign(static_cast<std::size_t>(c), 1.0);
  }

  Tensor forward(const Tensor& x, bool train) {
    if (x.shape.c != channels) raise(ErrorKind::Shape, "batchnorm channel mismatch");
    if (!train && !stats_initialized)
      raise(ErrorKind::Degenerate,
            "eval-mode batchnorm before any training step: running stats uninitialized");

    const std::int64_t sp = x.shape.spatial();
    const std::int64_t count = x.shape.n * sp;
    Tensor out(x.shape);

    if (train) {
      saved_invstd.assign(static_cast<std::size_t>(channels), 0.0);
      saved_xhat = Tensor(x.shape);
      for (std::int64_t c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (std::int64_t n = 0; n < x.shape.n; ++n)
          sum += lane_sum({x.channel(n, c), static_cast<std::size_t>(sp)});
        const double mean = sum / static_cast<double>(count);

        double sq = 0.0;
        for (std::int64_t n = 0; n < x.shape.n; ++n) {
          const double* p = x.channel(n, c);
          double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
          std::int64_t i = 0;
          for (; i + 8 <= sp; i += 8)
            for (int l = 0; l < 8; ++l) {
              const double d = p[i + l] - mean;
              lanes[l] += d * d;
            }
          double tail = 0.0;
          for (; i < sp; ++i) {
            const double d = p[i] - mean;
            tail += d * d;
          }
          sq += ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])) + tail;
        }
        const double var = sq / static_cast<double>(count);  // biased, used to normalize
        const double invstd = 1.0 / std::sqrt(var + eps);
        saved_invstd[static_cast<std::size_t>(c)] = invstd;

        const double var_unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
        running_mean[static_cast<std::size_t>(c)] =
            (1.0 - momentum) * running_mean[static_cast<std::size_t>(c)] + momentum * mean;
        running_var[static_cast<std::size_t>(c)] =
            (1.0 - momentum) * running_var[static_cast<std::size_t>(c)] +
            momentum * var_unbiased;

        const double g = gain.value[static_cast<std::size_t>(c)];
        const double b = bias.value[static_cast<std::size_t>(c)];
        for (std::int64_t n = 0; n < x.shape.n; ++n) {
          const double* p = x.channel(n, c);
          double* xh = saved_xhat.channel(n, c);
          double* o = out.channel(n, c);
          for (std::int64_t i = 0; i < sp; ++i) {
            xh[i] = (p[i] - mean) * invstd;
            o[i] = g * xh[i] + b;
          }
        }
      }
      stats_initialized = true;
    } else {
      for (std::int64_t c = 0; c < channels; ++c) {
        const double mean = running_mean[static_cast<std::size_t>(c)];
        const double invstd = 1.0 / std::sqrt(running_var[static_cast<std::size_t>(c)] + eps);
        const double g = gain.value[static_cast<std::size_t>(c)];
        const double b = bias.value[static_cast<std::size_t>(c)];
        for (std::int64_t n = 0; n < x.shape.n; ++n) {
          const double* p = x.channel(n, c);
          double* o = out.channel(n, c);
          for (std::int64_t i = 0; i < sp; ++i) o[i] = g * (p[i] - mean) * invstd + b;
        }
      }
    }
    return out;
  }

  /// Train-mode backward from the saved normalized activations.
  Tensor backward(const Tensor& grad_out) {
    if (saved_xhat.numel() == 0)
      raise(ErrorKind::Degenerate, "batchnorm backward without a saved train-mode forward");
    require_same_shape(grad_out, saved_xhat, "batchnorm backward");

    const std::int64_t sp = grad_out.shape.spatial();
    const std::int64_t count = grad_out.shape.n * sp;
    Tensor gx(grad_out.shape);

    for (std::int64_t c = 0; c < channels; ++c) {
      double s1 = 0.0, s2 = 0.0;
      for (std::int64_t n = 0; n < grad_out.shape.n; ++n) {
        const double* go = grad_out.channel(n, c);
        const double* xh = saved_xhat.channel(n, c);
        s1 += lane_sum({go, static_cast<std::size_t>(sp)});
        s2 += lane_dot(go, xh, static_cast<std::size_t>(sp));
      }
      bias.grad[static_cast<std::size_t>(c)] += s1;
      gain.grad[static_cast<std::size_t>(c)] += s2;

      const double scale =
          gain.value[static_cast<std::size_t>(c)] * saved_invstd[static_cast<std::size_t>(c)];
      const double m1 = s1 / static_cast<double>(count);
      const double m2 = s2 / static_cast<double>(count);
      for (std::int64_t n = 0; n < grad_out.shape.n; ++n) {
        const double* go = grad_out.channel(n, c);
        const double* xh = saved_xhat.channel(n, c);
        double* g = gx.channel(n, c);
        for (std::int64_t i = 0; i < sp; ++i) g[i] = scale * (go[i] - m1 - xh[i] * m2);
      }
    }
    return gx;
  }

  void drop_saved() {
    saved_invstd.clear();
    saved_xhat = Tensor();
  }
};

}  // namespace femseg
