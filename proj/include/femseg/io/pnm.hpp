#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "femseg/core/error.hpp"
#include "femseg/core/volume.hpp"

// Plain-text portable graymap/pixmap writers (P2/P3) for audit images;
// byte-deterministic so previews can be compared across runs.

namespace femseg::pnm {

inline void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& pix,
                      std::int64_t width, std::int64_t height) {
  if (static_cast<std::int64_t>(pix.size()) != width * height)
    raise(ErrorKind::Shape, "pgm: pixel count does not match dimensions");
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorKind::Processing, "cannot write " + path.string());
  out << "P2\n" << width << ' ' << height << "\n255\n";
  for (std::int64_t y = 0; y < height; ++y) {
    for (std::int64_t x = 0; x < width; ++x)
      out << static_cast<int>(pix[static_cast<std::size_t>(y * width + x)])
          << (x + 1 == width ? '\n' : ' ');
  }
  if (!out) raise(ErrorKind::Processing, "short write to " + path.string());
}

inline void write_ppm(const std::filesystem::path& path,
                      const std::vector<std::array<std::uint8_t, 3>>& pix, std::int64_t width,
                      std::int64_t height) {
  if (static_cast<std::int64_t>(pix.size()) != width * height)
    raise(ErrorKind::Shape, "ppm: pixel count does not match dimensions");
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorKind::Processing, "cannot write " + path.string());
  out << "P3\n" << width << ' ' << height << "\n255\n";
  for (std::int64_t y = 0; y < height; ++y) {
    for (std::int64_t x = 0; x < width; ++x) {
      const auto& p = pix[static_cast<std::size_t>(y * width + x)];
      out << static_cast<int>(p[0]) << ' ' << static_cast<int>(p[1]) << ' '
          << static_cast<int>(p[2]) << (x + 1 == width ? '\n' : ' ');
    }
  }
  if (!out) raise(ErrorKind::Processing, "short write to " + path.string());
}

/// Central axial slice of a [0,1] image scaled to 0..255.
inline std::vector<std::uint8_t> central_slice(const Grid3<float>& g) {
  const Dim3 d = g.dims();
  const std::int64_t z = d.z / 2;
  std::vector<std::uint8_t> pix(static_cast<std::size_t>(d.y * d.x));
  for (std::int64_t y = 0; y < d.y; ++y)
    for (std::int64_t x = 0; x < d.x; ++x) {
      double v = static_cast<double>(g(z, y, x));
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      pix[static_cast<std::size_t>(y * d.x + x)] =
          static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  return pix;
}

inline std::vector<std::uint8_t> central_slice(const Grid3<std::uint8_t>& g) {
  const Dim3 d = g.dims();
  const std::int64_t z = d.z / 2;
  std::vector<std::uint8_t> pix(static_cast<std::size_t>(d.y * d.x));
  for (std::int64_t y = 0; y < d.y; ++y)
    for (std::int64_t x = 0; x < d.x; ++x)
      pix[static_cast<std::size_t>(y * d.x + x)] = g(z, y, x) ? 255 : 0;
  return pix;
}

}  // namespace femseg::pnm
