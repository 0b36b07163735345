#pragma once

#include <span>
#include <vector>

#include "femseg/core/error.hpp"
#include "femseg/core/numeric.hpp"

namespace femseg {

struct DiceLossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d(loss)/d(p_i)
};

/// Soft Dice loss on the foreground probabilities of one patch:
///   loss = 1 - 2*sum(p*g) / (sum(p^2) + sum(g^2)),
/// with g binary and p in [0,1]. The squared-denominator form keeps the
/// loss differentiable without thresholding:
///   d(loss)/d(p_i) = -2 * (g_i * S - 2 * p_i * I) / S^2,
/// where I = sum(p*g) and S = sum(p^2) + sum(g^2).
inline DiceLossResult dice_loss(std::span<const double> p, std::span<const double> g) {
  if (p.size() != g.size()) raise(ErrorKind::Shape, "dice_loss: length mismatch");
  if (p.empty()) raise(ErrorKind::Degenerate, "dice_loss: empty patch");

  double lanes_i[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  double lanes_p[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  double lanes_g[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  const std::size_t n = p.size();
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; ++l) {
      lanes_i[l] += p[i + l] * g[i + l];
      lanes_p[l] += p[i + l] * p[i + l];
      lanes_g[l] += g[i + l] * g[i + l];
    }
  double ti = 0, tp = 0, tg = 0;
  for (; i < n; ++i) {
    ti += p[i] * g[i];
    tp += p[i] * p[i];
    tg += g[i] * g[i];
  }
  auto fold = [](const double lanes[8], double tail) {
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])) + tail;
  };
  const double inter = fold(lanes_i, ti);
  const double denom = fold(lanes_p, tp) + fold(lanes_g, tg);
  if (denom <= 0.0)
    raise(ErrorKind::Degenerate, "dice_loss: empty denominator (no foreground in p or g)");

  DiceLossResult r;
  r.loss = 1.0 - 2.0 * inter / denom;
  r.grad.resize(n);
  const double inv_d2 = 1.0 / (denom * denom);
  for (std::size_t j = 0; j < n; ++j)
    r.grad[j] = -2.0 * (g[j] * denom - 2.0 * p[j] * inter) * inv_d2;
  return r;
}

}  // namespace femseg
