#pragma once

#include <cstdint>

#include "femseg/core/error.hpp"
#include "femseg/core/grid.hpp"

namespace femseg {

/// Physical metadata in millimetres, (z, y, x) order. Stored as 32-bit
/// floats so values survive a header round trip bit-exactly.
struct Vec3f {
  float z = 0.0f;
  float y = 0.0f;
  float x = 0.0f;
  friend bool operator==(const Vec3f&, const Vec3f&) = default;
};

enum class IntensityUnit : std::uint8_t { HU, Normalized };

/// Preferred on-disk scalar encoding of a volume's samples.
enum class ScalarKind : std::uint8_t { Int16, Uint8, Float32 };

/// A 3D scalar image. Samples are held as float regardless of on-disk
/// encoding; int16 sources are exactly representable.
struct Volume {
  Grid3<float> data;
  Vec3f spacing{1.0f, 1.0f, 1.0f};  // mm per voxel, strictly positive
  Vec3f origin{0.0f, 0.0f, 0.0f};   // mm world offset of voxel (0,0,0)
  IntensityUnit unit = IntensityUnit::HU;
  ScalarKind storage = ScalarKind::Float32;

  Dim3 dims() const { return data.dims(); }
  friend bool operator==(const Volume&, const Volume&) = default;
};

/// Binary mask aligned to a Volume; foreground voxels carry value 1.
struct LabelMask {
  Grid3<std::uint8_t> data;
  Vec3f spacing{1.0f, 1.0f, 1.0f};
  Vec3f origin{0.0f, 0.0f, 0.0f};

  Dim3 dims() const { return data.dims(); }
  std::int64_t foreground_count() const {
    std::int64_t n = 0;
    for (auto v : data.values()) n += v;
    return n;
  }
  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

inline void require_spacing_positive(const Vec3f& s) {
  if (!(s.z > 0.0f && s.y > 0.0f && s.x > 0.0f))
    raise(ErrorKind::Format, "spacing components must be strictly positive");
}

inline void require_binary(const LabelMask& m) {
  for (auto v : m.data.values())
    if (v > 1) raise(ErrorKind::Format, "mask values restricted to {0, 1}");
}

/// How a processed sub-volume sits inside the scan it was cut from. Records
/// enough to re-embed a prediction at its source location: the processed
/// grid is un-mirrored (if flagged) and then placed at crop_offset. World
/// origin/spacing fields pass through preprocessing untouched.
struct GeometryRecord {
  Dim3 original_dims{};
  Dim3 crop_offset{};
  bool mirrored = false;

  friend bool operator==(const GeometryRecord&, const GeometryRecord&) = default;
};

inline void validate_geometry(const GeometryRecord& g, Dim3 processed_dims) {
  if (!g.original_dims.positive()) raise(ErrorKind::Geometry, "original_dims must be positive");
  if (g.crop_offset.z < 0 || g.crop_offset.y < 0 || g.crop_offset.x < 0)
    raise(ErrorKind::Geometry, "crop_offset must be non-negative");
  if (g.crop_offset.z + processed_dims.z > g.original_dims.z ||
      g.crop_offset.y + processed_dims.y > g.original_dims.y ||
      g.crop_offset.x + processed_dims.x > g.original_dims.x)
    raise(ErrorKind::Geometry, "processed grid does not fit inside original_dims at crop_offset");
}

}  // namespace femseg
