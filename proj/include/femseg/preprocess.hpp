#pragma once

#include <algorithm>
#include <optional>
#include <utility>

#include "femseg/core/error.hpp"
#include "femseg/core/volume.hpp"

namespace femseg {

/// One network-ready case: a normalized volume, its mask when supervised,
/// and the bookkeeping needed to restore predictions to the source scan.
struct PreprocessedCase {
  Volume input;
  std::optional<LabelMask> mask;
  GeometryRecord geometry;
};

/// Linearly rescales so min maps to 0 and max to 1.
inline Volume normalize_minmax(const Volume& v) {
  const auto& vals = v.data.values();
  if (vals.empty()) raise(ErrorKind::Degenerate, "empty volume");
  const auto [mn_it, mx_it] = std::minmax_element(vals.begin(), vals.end());
  const float mn = *mn_it, mx = *mx_it;
  if (!(mx > mn))
    raise(ErrorKind::Degenerate, "constant volume: min-max range is zero");
  Volume out = v;
  const float range = mx - mn;
  for (auto& s : out.data.values()) s = (s - mn) / range;
  out.unit = IntensityUnit::Normalized;
  out.storage = ScalarKind::Float32;
  return out;
}

namespace detail {

template <typename T>
inline Grid3<T> crop_x(const Grid3<T>& g, std::int64_t x0, std::int64_t width) {
  const Dim3 d = g.dims();
  Grid3<T> out(Dim3{d.z, d.y, width});
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < width; ++x) out(z, y, x) = g(z, y, x0 + x);
  return out;
}

template <typename T>
inline void reverse_x(Grid3<T>& g) {
  const Dim3 d = g.dims();
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x / 2; ++x)
        std::swap(g(z, y, x), g(z, y, d.x - 1 - x));
}

}  // namespace detail

/// Cuts a scan at x = W/2 into the patient-right half (image-left,
/// x in [0, W/2)) and the patient-left half (x in [W/2, W)). The mask, when
/// present, is cut identically; the halves' crop offsets record where each
/// sits in the source scan.
inline std::pair<PreprocessedCase, PreprocessedCase> split_halves(
    const Volume& v, const std::optional<LabelMask>& m) {
  const Dim3 d = v.dims();
  if (d.x % 2 != 0)
    raise(ErrorKind::Geometry, "cannot split halves: width " + std::to_string(d.x) + " is odd");
  if (m) {
    if (m->dims() != d) raise(ErrorKind::Shape, "mask dims differ from volume dims");
  }
  const std::int64_t half = d.x / 2;

  auto build = [&](std::int64_t x0) {
    PreprocessedCase c;
    c.input = v;
    c.input.data = detail::crop_x(v.data, x0, half);
    if (m) {
      LabelMask mm = *m;
      mm.data = detail::crop_x(m->data, x0, half);
      c.mask = std::move(mm);
    }
    c.geometry = GeometryRecord{d, Dim3{0, 0, x0}, false};
    return c;
  };
  return {build(0), build(half)};
}

/// Reverses the x axis of image and mask and toggles the mirrored flag.
/// Involution: applying twice restores the case.
inline PreprocessedCase mirror_lr(PreprocessedCase c) {
  detail::reverse_x(c.input.data);
  if (c.mask) detail::reverse_x(c.mask->data);
  c.geometry.mirrored = !c.geometry.mirrored;
  return c;
}

/// Maps a voxel coordinate of the processed grid back to its coordinate in
/// the original scan described by the geometry record.
inline Dim3 to_original_coord(const GeometryRecord& g, Dim3 processed_dims, Dim3 voxel) {
  Dim3 p = voxel;
  if (g.mirrored) p.x = processed_dims.x - 1 - p.x;
  return g.crop_offset + p;
}

}  // namespace femseg
