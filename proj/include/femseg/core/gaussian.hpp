#pragma once

#include <cmath>
#include <vector>

#include "femseg/core/grid.hpp"

namespace femseg {

/// Discrete Gaussian taps truncated at 3*sigma and normalized to sum 1.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const std::int64_t radius = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (static_cast<double>(i) / sigma) *
                              (static_cast<double>(i) / sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian smoothing, zero-padded at the borders.
inline void gaussian_smooth3d(Grid3<double>& g, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const std::int64_t r = (static_cast<std::int64_t>(k.size()) - 1) / 2;
  if (r == 0) return;
  const Dim3 d = g.dims();
  Grid3<double> tmp(d);

  auto pass = [&](const Grid3<double>& src, Grid3<double>& dst, int axis) {
    const std::int64_t len = axis == 0 ? d.z : (axis == 1 ? d.y : d.x);
    for (std::int64_t z = 0; z < d.z; ++z)
      for (std::int64_t y = 0; y < d.y; ++y)
        for (std::int64_t x = 0; x < d.x; ++x) {
          const std::int64_t pos = axis == 0 ? z : (axis == 1 ? y : x);
          const std::int64_t lo = std::max<std::int64_t>(-r, -pos);
          const std::int64_t hi = std::min<std::int64_t>(r, len - 1 - pos);
          double acc = 0.0;
          for (std::int64_t t = lo; t <= hi; ++t) {
            const double w = k[static_cast<std::size_t>(t + r)];
            acc += w * (axis == 0 ? src(z + t, y, x)
                                  : axis == 1 ? src(z, y + t, x) : src(z, y, x + t));
          }
          dst(z, y, x) = acc;
        }
  };

  pass(g, tmp, 0);
  pass(tmp, g, 1);
  pass(g, tmp, 2);
  g = std::move(tmp);
}

}  // namespace femseg
