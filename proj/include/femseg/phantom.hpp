#pragma once

#include <cmath>
#include <random>

#include "femseg/core/gaussian.hpp"
#include "femseg/core/rng.hpp"
#include "femseg/core/volume.hpp"

namespace femseg {

/// Synthetic desk-scale case: one or two randomly placed and sized
/// ellipsoids on a dark background. The image is the smoothed foreground
/// indicator scaled to a bone-like intensity plus Gaussian noise, rounded to
/// integers; the mask is the exact indicator. Scans real pipelines end to
/// end without cohort data.
inline std::pair<Volume, LabelMask> make_ellipsoid_phantom(Dim3 dims, std::mt19937_64& rng) {
  if (!dims.positive()) raise(ErrorKind::Shape, "phantom dims must be positive");
  LabelMask mask;
  mask.data = Grid3<std::uint8_t>(dims);
  mask.spacing = Vec3f{1.0f, 0.977f, 0.977f};

  auto add_ellipsoid = [&](double frac_center, double frac_radius) {
    const double cz = draw_range(rng, 0.5 - frac_center, 0.5 + frac_center) *
                      static_cast<double>(dims.z - 1);
    const double cy = draw_range(rng, 0.5 - frac_center, 0.5 + frac_center) *
                      static_cast<double>(dims.y - 1);
    const double cx = draw_range(rng, 0.5 - frac_center, 0.5 + frac_center) *
                      static_cast<double>(dims.x - 1);
    const double az = draw_range(rng, 0.6, 1.0) * frac_radius * static_cast<double>(dims.z);
    const double ay = draw_range(rng, 0.6, 1.0) * frac_radius * static_cast<double>(dims.y);
    const double ax = draw_range(rng, 0.6, 1.0) * frac_radius * static_cast<double>(dims.x);
    for (std::int64_t z = 0; z < dims.z; ++z)
      for (std::int64_t y = 0; y < dims.y; ++y)
        for (std::int64_t x = 0; x < dims.x; ++x) {
          const double dz = (static_cast<double>(z) - cz) / az;
          const double dy = (static_cast<double>(y) - cy) / ay;
          const double dx = (static_cast<double>(x) - cx) / ax;
          if (dz * dz + dy * dy + dx * dx <= 1.0) mask.data(z, y, x) = 1;
        }
  };
  add_ellipsoid(0.12, 0.28);
  if (draw_unit(rng) < 0.5) add_ellipsoid(0.22, 0.14);

  Grid3<double> soft(dims);
  for (std::int64_t i = 0; i < soft.size(); ++i)
    soft.values()[static_cast<std::size_t>(i)] =
        static_cast<double>(mask.data.values()[static_cast<std::size_t>(i)]);
  gaussian_smooth3d(soft, 1.5);

  Volume img;
  img.data = Grid3<float>(dims);
  img.spacing = mask.spacing;
  img.unit = IntensityUnit::HU;
  img.storage = ScalarKind::Int16;
  std::normal_distribution<double> noise(0.0, 40.0);
  for (std::int64_t i = 0; i < soft.size(); ++i) {
    const double hu =
        -1000.0 + 2200.0 * soft.values()[static_cast<std::size_t>(i)] + noise(rng);
    const double clamped = hu < -1024.0 ? -1024.0 : (hu > 3000.0 ? 3000.0 : hu);
    img.data.values()[static_cast<std::size_t>(i)] = static_cast<float>(std::nearbyint(clamped));
  }
  return {std::move(img), std::move(mask)};
}

}  // namespace femseg
