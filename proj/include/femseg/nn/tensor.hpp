#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "femseg/core/error.hpp"

namespace femseg {

struct TensorShape {
  std::int64_t n = 1;  // batch
  std::int64_t c = 1;  // channels
  std::int64_t d = 1;  // depth (z)
  std::int64_t h = 1;  // height (y)
  std::int64_t w = 1;  // width (x)

  std::int64_t numel() const { return n * c * d * h * w; }
  std::int64_t spatial() const { return d * h * w; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(d) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

/// Dense 5D array (batch, channel, depth, height, width) of doubles with an
/// optional same-shape gradient buffer. Width varies fastest.
struct Tensor {
  TensorShape shape;
  std::vector<double> v;
  std::vector<double> grad;  // empty unless allocated

  Tensor() = default;
  explicit Tensor(TensorShape s, double fill = 0.0)
      : shape(s), v(static_cast<std::size_t>(s.numel()), fill) {
    if (s.numel() <= 0) raise(ErrorKind::Shape, "tensor shape must be positive");
  }

  std::int64_t numel() const { return shape.numel(); }

  std::int64_t index(std::int64_t n, std::int64_t c, std::int64_t z, std::int64_t y,
                     std::int64_t x) const {
    return (((n * shape.c + c) * shape.d + z) * shape.h + y) * shape.w + x;
  }

  double& at(std::int64_t n, std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) {
    return v[static_cast<std::size_t>(index(n, c, z, y, x))];
  }
  double at(std::int64_t n, std::int64_t c, std::int64_t z, std::int64_t y,
            std::int64_t x) const {
    return v[static_cast<std::size_t>(index(n, c, z, y, x))];
  }

  double* channel(std::int64_t n, std::int64_t c) {
    return v.data() + (n * shape.c + c) * shape.spatial();
  }
  const double* channel(std::int64_t n, std::int64_t c) const {
    return v.data() + (n * shape.c + c) * shape.spatial();
  }

  void alloc_grad() { grad.assign(v.size(), 0.0); }
  bool has_grad() const { return !grad.empty(); }

  /// Releases the value buffer; used by eval-mode passes to cap peak memory.
  void release() {
    v.clear();
    v.shrink_to_fit();
    grad.clear();
    grad.shrink_to_fit();
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape == b.shape))
    raise(ErrorKind::Shape, std::string(what) + ": shape " + a.shape.str() + " vs " +
                                b.shape.str());
}

/// Concatenates along the channel axis; spatial and batch dims must agree.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape.n != b.shape.n || a.shape.d != b.shape.d || a.shape.h != b.shape.h ||
      a.shape.w != b.shape.w)
    raise(ErrorKind::Shape, "concat: shapes " + a.shape.str() + " and " + b.shape.str());
  Tensor out(TensorShape{a.shape.n, a.shape.c + b.shape.c, a.shape.d, a.shape.h, a.shape.w});
  const std::int64_t sp = a.shape.spatial();
  for (std::int64_t n = 0; n < a.shape.n; ++n) {
    for (std::int64_t c = 0; c < a.shape.c; ++c)
      std::copy_n(a.channel(n, c), sp, out.channel(n, c));
    for (std::int64_t c = 0; c < b.shape.c; ++c)
      std::copy_n(b.channel(n, c), sp, out.channel(n, a.shape.c + c));
  }
  return out;
}

/// Splits a channel-concatenated gradient back into the two parts.
inline std::pair<Tensor, Tensor> split_channels(const Tensor& g, std::int64_t c_first) {
  if (c_first <= 0 || c_first >= g.shape.c) raise(ErrorKind::Shape, "split point out of range");
  Tensor a(TensorShape{g.shape.n, c_first, g.shape.d, g.shape.h, g.shape.w});
  Tensor b(TensorShape{g.shape.n, g.shape.c - c_first, g.shape.d, g.shape.h, g.shape.w});
  const std::int64_t sp = g.shape.spatial();
  for (std::int64_t n = 0; n < g.shape.n; ++n) {
    for (std::int64_t c = 0; c < c_first; ++c) std::copy_n(g.channel(n, c), sp, a.channel(n, c));
    for (std::int64_t c = c_first; c < g.shape.c; ++c)
      std::copy_n(g.channel(n, c), sp, b.channel(n, c - c_first));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace femseg
