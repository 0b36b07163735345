#pragma once

#include <array>
#include <random>
#include <vector>

#include "femseg/core/rng.hpp"
#include "femseg/core/volume.hpp"
#include "femseg/nn/tensor.hpp"
#include "femseg/preprocess.hpp"

// Overlapping-tile planning for inference and random patch cropping for
// training. Volumes smaller than one patch are zero-padded symmetrically;
// larger axes tile at stride (patch - overlap) with the final tile shifted
// back so it ends exactly at the boundary.

namespace femseg {

struct PatchGrid {
  Dim3 dims{};         // source grid extents
  Dim3 patch_size{};
  Dim3 overlap{};
  Dim3 stride{};
  Dim3 padded_dims{};
  Dim3 pad_low{};      // symmetric zero-padding before the source grid
  std::vector<Dim3> origins;  // patch corners in padded coordinates, z-major
};

inline PatchGrid plan_patches(Dim3 dims, Dim3 patch, Dim3 overlap) {
  if (!dims.positive()) raise(ErrorKind::Shape, "dims must be positive");
  if (!patch.positive()) raise(ErrorKind::Config, "patch size must be positive");
  if (overlap.z < 0 || overlap.y < 0 || overlap.x < 0)
    raise(ErrorKind::Config, "overlap must be non-negative");
  const Dim3 stride = patch - overlap;
  if (!stride.positive())
    raise(ErrorKind::Config, "patch must exceed overlap componentwise");

  PatchGrid g;
  g.dims = dims;
  g.patch_size = patch;
  g.overlap = overlap;
  g.stride = stride;

  auto axis_plan = [](std::int64_t dim, std::int64_t p, std::int64_t s, std::int64_t& padded,
                      std::int64_t& pad_low) {
    std::vector<std::int64_t> origins;
    if (dim <= p) {
      padded = p;
      pad_low = (p - dim) / 2;
      origins.push_back(0);
    } else {
      padded = dim;
      pad_low = 0;
      const std::int64_t span = dim - p;
      const std::int64_t count = (span + s - 1) / s + 1;  // last tile clamps to the boundary
      for (std::int64_t i = 0; i < count; ++i)
        origins.push_back(std::min(i * s, span));
    }
    return origins;
  };

  const auto oz = axis_plan(dims.z, patch.z, stride.z, g.padded_dims.z, g.pad_low.z);
  const auto oy = axis_plan(dims.y, patch.y, stride.y, g.padded_dims.y, g.pad_low.y);
  const auto ox = axis_plan(dims.x, patch.x, stride.x, g.padded_dims.x, g.pad_low.x);
  g.origins.reserve(oz.size() * oy.size() * ox.size());
  for (auto z : oz)
    for (auto y : oy)
      for (auto x : ox) g.origins.push_back(Dim3{z, y, x});
  return g;
}

/// Copies one patch out of the source grid; padded coordinates outside the
/// source read 0. Output tensor shape (1, 1, pz, py, px).
inline Tensor extract_patch(const Grid3<float>& src, const PatchGrid& g, Dim3 origin) {
  Tensor t(TensorShape{1, 1, g.patch_size.z, g.patch_size.y, g.patch_size.x});
  std::size_t i = 0;
  for (std::int64_t z = 0; z < g.patch_size.z; ++z)
    for (std::int64_t y = 0; y < g.patch_size.y; ++y)
      for (std::int64_t x = 0; x < g.patch_size.x; ++x, ++i) {
        const std::int64_t sz = origin.z + z - g.pad_low.z;
        const std::int64_t sy = origin.y + y - g.pad_low.y;
        const std::int64_t sx = origin.x + x - g.pad_low.x;
        t.v[i] = src.contains(sz, sy, sx) ? static_cast<double>(src(sz, sy, sx)) : 0.0;
      }
  return t;
}

/// Uniformly random training crop: image patch plus a one-hot two-class
/// target. The case must carry a mask. Origins are drawn per axis over the
/// symmetric zero-padded grid.
inline std::pair<Tensor, Tensor> random_crop(const PreprocessedCase& c, Dim3 patch,
                                             std::mt19937_64& rng) {
  if (!c.mask) raise(ErrorKind::Config, "random_crop requires a case with a mask");
  if (!patch.positive()) raise(ErrorKind::Config, "patch size must be positive");
  const Dim3 dims = c.input.dims();
  if (c.mask->dims() != dims) raise(ErrorKind::Shape, "mask dims differ from volume");

  auto axis = [&](std::int64_t dim, std::int64_t p, std::int64_t& pad_low) {
    const std::int64_t padded = std::max(dim, p);
    pad_low = dim < p ? (p - dim) / 2 : 0;
    return std::uniform_int_distribution<std::int64_t>(0, padded - p)(rng);
  };
  Dim3 pad_low{};
  const std::int64_t oz = axis(dims.z, patch.z, pad_low.z);
  const std::int64_t oy = axis(dims.y, patch.y, pad_low.y);
  const std::int64_t ox = axis(dims.x, patch.x, pad_low.x);

  Tensor img(TensorShape{1, 1, patch.z, patch.y, patch.x});
  Tensor target(TensorShape{1, 2, patch.z, patch.y, patch.x});
  double* bg = target.channel(0, 0);
  double* fg = target.channel(0, 1);
  std::size_t i = 0;
  for (std::int64_t z = 0; z < patch.z; ++z)
    for (std::int64_t y = 0; y < patch.y; ++y)
      for (std::int64_t x = 0; x < patch.x; ++x, ++i) {
        const std::int64_t sz = oz + z - pad_low.z;
        const std::int64_t sy = oy + y - pad_low.y;
        const std::int64_t sx = ox + x - pad_low.x;
        const bool inside = c.input.data.contains(sz, sy, sx);
        img.v[i] = inside ? static_cast<double>(c.input.data(sz, sy, sx)) : 0.0;
        const std::uint8_t label = inside ? c.mask->data(sz, sy, sx) : 0;
        bg[i] = label ? 0.0 : 1.0;
        fg[i] = label ? 1.0 : 0.0;
      }
  return {std::move(img), std::move(target)};
}

/// Fuses per-patch class probabilities by voxel-wise arithmetic mean of all
/// covering patches, then crops the padding away. Each input tensor must be
/// (1, 2, pz, py, px) with channels in [0, 1]; one tensor per planned origin.
inline std::array<Grid3<double>, 2> stitch(const PatchGrid& g,
                                           const std::vector<Tensor>& patch_probs) {
  if (patch_probs.size() != g.origins.size())
    raise(ErrorKind::Arity, "stitch: " + std::to_string(patch_probs.size()) + " patches for " +
                                std::to_string(g.origins.size()) + " planned origins");
  const TensorShape want{1, 2, g.patch_size.z, g.patch_size.y, g.patch_size.x};
  for (const auto& t : patch_probs)
    if (!(t.shape == want))
      raise(ErrorKind::Shape, "stitch: patch tensor shape " + t.shape.str());

  Grid3<double> sum0(g.padded_dims), sum1(g.padded_dims);
  Grid3<std::int32_t> count(g.padded_dims);
  for (std::size_t pi = 0; pi < patch_probs.size(); ++pi) {
    const Dim3 o = g.origins[pi];
    const Tensor& t = patch_probs[pi];
    const double* c0 = t.channel(0, 0);
    const double* c1 = t.channel(0, 1);
    std::size_t i = 0;
    for (std::int64_t z = 0; z < g.patch_size.z; ++z)
      for (std::int64_t y = 0; y < g.patch_size.y; ++y)
        for (std::int64_t x = 0; x < g.patch_size.x; ++x, ++i) {
          sum0(o.z + z, o.y + y, o.x + x) += c0[i];
          sum1(o.z + z, o.y + y, o.x + x) += c1[i];
          count(o.z + z, o.y + y, o.x + x) += 1;
        }
  }

  std::array<Grid3<double>, 2> out{Grid3<double>(g.dims), Grid3<double>(g.dims)};
  for (std::int64_t z = 0; z < g.dims.z; ++z)
    for (std::int64_t y = 0; y < g.dims.y; ++y)
      for (std::int64_t x = 0; x < g.dims.x; ++x) {
        const std::int64_t pz = z + g.pad_low.z, py = y + g.pad_low.y, px = x + g.pad_low.x;
        const double n = static_cast<double>(count(pz, py, px));
        out[0](z, y, x) = sum0(pz, py, px) / n;
        out[1](z, y, x) = sum1(pz, py, px) / n;
      }
  return out;
}

}  // namespace femseg
