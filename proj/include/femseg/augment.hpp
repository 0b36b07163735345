#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <utility>

#include "femseg/core/gaussian.hpp"
#include "femseg/core/rng.hpp"
#include "femseg/core/volume.hpp"
#include "femseg/preprocess.hpp"

// On-the-fly stochastic augmentation of (volume, mask) pairs: multiplicative
// brightness, small rotations, isotropic scaling, and smooth random elastic
// deformation, each gated independently. Geometric transforms resample the
// image trilinearly and the mask by nearest neighbor through the identical
// spatial map; samples falling outside the grid read 0.

namespace femseg {

struct AugmentConfig {
  std::pair<double, double> brightness_range{0.75, 1.25};
  std::pair<double, double> rotation_range_deg{-3.0, 3.0};  // per axis X, Y, Z
  std::pair<double, double> scaling_range{0.95, 1.05};
  std::pair<double, double> elastic_alpha_range{0.0, 100.0};
  std::pair<double, double> elastic_sigma_range{9.0, 13.0};
  double apply_probability = 0.35;

  void validate() const {
    auto ordered = [](const std::pair<double, double>& r) { return r.first <= r.second; };
    if (!ordered(brightness_range) || !ordered(rotation_range_deg) || !ordered(scaling_range) ||
        !ordered(elastic_alpha_range) || !ordered(elastic_sigma_range))
      raise(ErrorKind::Config, "augment range bounds must be ordered");
    if (!(apply_probability >= 0.0 && apply_probability <= 1.0))
      raise(ErrorKind::Config, "apply_probability must lie in [0, 1]");
  }
};

/// Per-voxel displacement in voxel units, one component grid per axis.
struct DisplacementField {
  Grid3<double> dz, dy, dx;

  Dim3 dims() const { return dz.dims(); }
};

/// Which transforms fired and with which parameters; written by augment_pair
/// for audit and statistics.
struct AugmentTrace {
  bool affine = false, elastic = false, brightness = false;
  double rot_x = 0, rot_y = 0, rot_z = 0, scale = 1;
  double alpha = 0, sigma = 0;
  double factor = 1;
};

inline Volume apply_brightness(const Volume& v, double factor) {
  Volume out = v;
  for (auto& s : out.data.values()) {
    const double scaled = static_cast<double>(s) * factor;
    s = static_cast<float>(scaled < 0.0 ? 0.0 : (scaled > 1.0 ? 1.0 : scaled));
  }
  return out;
}

namespace aug_detail {

inline double sample_trilinear(const Grid3<float>& g, double x, double y, double z) {
  const std::int64_t x0 = static_cast<std::int64_t>(std::floor(x));
  const std::int64_t y0 = static_cast<std::int64_t>(std::floor(y));
  const std::int64_t z0 = static_cast<std::int64_t>(std::floor(z));
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double fz = z - static_cast<double>(z0);
  double acc = 0.0;
  for (int cz = 0; cz < 2; ++cz)
    for (int cy = 0; cy < 2; ++cy)
      for (int cx = 0; cx < 2; ++cx) {
        const double w = (cz ? fz : 1.0 - fz) * (cy ? fy : 1.0 - fy) * (cx ? fx : 1.0 - fx);
        if (w == 0.0) continue;
        const std::int64_t zz = z0 + cz, yy = y0 + cy, xx = x0 + cx;
        if (!g.contains(zz, yy, xx)) continue;  // outside reads 0
        acc += w * static_cast<double>(g(zz, yy, xx));
      }
  return acc;
}

inline std::uint8_t sample_nearest(const Grid3<std::uint8_t>& g, double x, double y, double z) {
  const std::int64_t xx = static_cast<std::int64_t>(std::floor(x + 0.5));
  const std::int64_t yy = static_cast<std::int64_t>(std::floor(y + 0.5));
  const std::int64_t zz = static_cast<std::int64_t>(std::floor(z + 0.5));
  if (!g.contains(zz, yy, xx)) return 0;
  return g(zz, yy, xx);
}

/// Resamples image and optional mask through source = map(output voxel).
template <typename MapFn>
inline void warp(const Grid3<float>& img, const Grid3<std::uint8_t>* mask, MapFn&& map,
                 Grid3<float>& img_out, Grid3<std::uint8_t>* mask_out) {
  const Dim3 d = img.dims();
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x; ++x) {
        const std::array<double, 3> s = map(x, y, z);  // (x, y, z) source
        img_out(z, y, x) = static_cast<float>(sample_trilinear(img, s[0], s[1], s[2]));
        if (mask) (*mask_out)(z, y, x) = sample_nearest(*mask, s[0], s[1], s[2]);
      }
}

/// Row-major 3x3 rotation R = Rz * Ry * Rx from per-axis degrees.
inline std::array<double, 9> rotation_matrix(double rx_deg, double ry_deg, double rz_deg) {
  constexpr double k = 3.14159265358979323846 / 180.0;
  const double ax = rx_deg * k, ay = ry_deg * k, az = rz_deg * k;
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cz = std::cos(az), sz = std::sin(az);
  // Rz*Ry*Rx expanded
  return {cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
          sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
          -sy,     cy * sx,                cy * cx};
}

}  // namespace aug_detail

/// Rotation (Rz*Ry*Rx of the given per-axis degrees) followed by isotropic
/// scaling, both about the grid center, applied by inverse resampling.
inline std::pair<Volume, LabelMask> apply_affine(const Volume& v,
                                                 const std::optional<LabelMask>& m,
                                                 std::array<double, 3> rot_deg, double scale) {
  if (!(scale > 0.0)) raise(ErrorKind::Config, "affine scale must be positive");
  if (m && m->dims() != v.dims()) raise(ErrorKind::Shape, "mask dims differ from volume");
  const Dim3 d = v.dims();
  const double cx = static_cast<double>(d.x - 1) / 2.0;
  const double cy = static_cast<double>(d.y - 1) / 2.0;
  const double cz = static_cast<double>(d.z - 1) / 2.0;
  const auto R = aug_detail::rotation_matrix(rot_deg[0], rot_deg[1], rot_deg[2]);
  const double inv_s = 1.0 / scale;

  Volume img_out = v;
  LabelMask mask_out;
  if (m) mask_out = *m;
  auto map = [&](std::int64_t x, std::int64_t y, std::int64_t z) -> std::array<double, 3> {
    const double px = (static_cast<double>(x) - cx) * inv_s;
    const double py = (static_cast<double>(y) - cy) * inv_s;
    const double pz = (static_cast<double>(z) - cz) * inv_s;
    // inverse rotation = transpose
    return {R[0] * px + R[3] * py + R[6] * pz + cx, R[1] * px + R[4] * py + R[7] * pz + cy,
            R[2] * px + R[5] * py + R[8] * pz + cz};
  };
  aug_detail::warp(v.data, m ? &m->data : nullptr, map, img_out.data,
                   m ? &mask_out.data : nullptr);
  return {std::move(img_out), std::move(mask_out)};
}

/// Smooth random displacement: per-voxel uniform noise in [-1, 1) per axis,
/// Gaussian-smoothed with the given sigma, scaled by alpha. Component grids
/// are drawn in z, y, x axis order, each in (z, y, x) scan order.
inline DisplacementField make_elastic_field(Dim3 dims, double alpha, double sigma,
                                            std::mt19937_64& rng) {
  DisplacementField f{Grid3<double>(dims), Grid3<double>(dims), Grid3<double>(dims)};
  for (Grid3<double>* comp : {&f.dz, &f.dy, &f.dx})
    for (auto& v : comp->values()) v = draw_range(rng, -1.0, 1.0);
  if (alpha != 0.0) {
    for (Grid3<double>* comp : {&f.dz, &f.dy, &f.dx}) {
      gaussian_smooth3d(*comp, sigma);
      for (auto& v : comp->values()) v *= alpha;
    }
  } else {
    for (Grid3<double>* comp : {&f.dz, &f.dy, &f.dx})
      for (auto& v : comp->values()) v = 0.0;
  }
  return f;
}

inline std::pair<Volume, LabelMask> apply_displacement(const Volume& v,
                                                       const std::optional<LabelMask>& m,
                                                       const DisplacementField& field) {
  if (field.dims() != v.dims()) raise(ErrorKind::Shape, "displacement field dims mismatch");
  if (m && m->dims() != v.dims()) raise(ErrorKind::Shape, "mask dims differ from volume");
  Volume img_out = v;
  LabelMask mask_out;
  if (m) mask_out = *m;
  auto map = [&](std::int64_t x, std::int64_t y, std::int64_t z) -> std::array<double, 3> {
    return {static_cast<double>(x) + field.dx(z, y, x), static_cast<double>(y) + field.dy(z, y, x),
            static_cast<double>(z) + field.dz(z, y, x)};
  };
  aug_detail::warp(v.data, m ? &m->data : nullptr, map, img_out.data,
                   m ? &mask_out.data : nullptr);
  return {std::move(img_out), std::move(mask_out)};
}

inline std::pair<Volume, LabelMask> elastic_deform(const Volume& v,
                                                   const std::optional<LabelMask>& m, double alpha,
                                                   double sigma, std::mt19937_64& rng) {
  const auto field = make_elastic_field(v.dims(), alpha, sigma, rng);
  return apply_displacement(v, m, field);
}

/// Applies the configured transforms, each gated independently with
/// apply_probability and parameters drawn uniformly from its range, in the
/// fixed order affine -> elastic -> brightness.
inline PreprocessedCase augment_pair(const PreprocessedCase& c, const AugmentConfig& cfg,
                                     std::mt19937_64& rng, AugmentTrace* trace = nullptr) {
  cfg.validate();
  PreprocessedCase out = c;
  AugmentTrace local;

  if (draw_unit(rng) < cfg.apply_probability) {
    local.affine = true;
    local.rot_x = draw_range(rng, cfg.rotation_range_deg.first, cfg.rotation_range_deg.second);
    local.rot_y = draw_range(rng, cfg.rotation_range_deg.first, cfg.rotation_range_deg.second);
    local.rot_z = draw_range(rng, cfg.rotation_range_deg.first, cfg.rotation_range_deg.second);
    local.scale = draw_range(rng, cfg.scaling_range.first, cfg.scaling_range.second);
    auto [img, msk] = apply_affine(out.input, out.mask, {local.rot_x, local.rot_y, local.rot_z},
                                   local.scale);
    out.input = std::move(img);
    if (out.mask) out.mask = std::move(msk);
  }
  if (draw_unit(rng) < cfg.apply_probability) {
    local.elastic = true;
    local.alpha = draw_range(rng, cfg.elastic_alpha_range.first, cfg.elastic_alpha_range.second);
    local.sigma = draw_range(rng, cfg.elastic_sigma_range.first, cfg.elastic_sigma_range.second);
    auto [img, msk] = elastic_deform(out.input, out.mask, local.alpha, local.sigma, rng);
    out.input = std::move(img);
    if (out.mask) out.mask = std::move(msk);
  }
  if (draw_unit(rng) < cfg.apply_probability) {
    local.brightness = true;
    local.factor = draw_range(rng, cfg.brightness_range.first, cfg.brightness_range.second);
    out.input = apply_brightness(out.input, local.factor);
  }

  if (trace) *trace = local;
  return out;
}

}  // namespace femseg
