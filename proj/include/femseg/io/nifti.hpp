#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "femseg/core/error.hpp"
#include "femseg/core/volume.hpp"

// NIfTI-1 single-file (.nii) subset: little-endian, datatypes int16/uint8/
// float32, no extensions, no compression, axis-aligned orientation only.
// Field layout per the 348-byte header: sizeof_hdr (offset 0, int32, =348),
// dim (40, 8×int16), datatype (70, int16), bitpix (72, int16), pixdim
// (76, 8×float32), vox_offset (108, float32, >=352), scl_slope/scl_inter
// (112/116), cal_max/cal_min (124/128), qform/sform codes (252/254),
// quaternion+offset (256..279), srow_x/y/z (280/296/312), magic (344, "n+1\0").

namespace femseg::nifti {

namespace detail {

constexpr std::size_t kHeaderSize = 348;
constexpr float kMinVoxOffset = 352.0f;

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

inline std::uint32_t load_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

inline std::int32_t load_i32(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::int32_t>(load_u32(b, off));
}

inline std::int16_t load_i16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(b[off]) |
                                   (static_cast<std::uint16_t>(b[off + 1]) << 8));
}

inline float load_f32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t u = load_u32(b, off);
  float f;
  std::memcpy(&f, &u, sizeof f);
  return f;
}

inline void store_u32(std::vector<std::uint8_t>& b, std::size_t off, std::uint32_t v) {
  b[off] = static_cast<std::uint8_t>(v);
  b[off + 1] = static_cast<std::uint8_t>(v >> 8);
  b[off + 2] = static_cast<std::uint8_t>(v >> 16);
  b[off + 3] = static_cast<std::uint8_t>(v >> 24);
}

inline void store_i32(std::vector<std::uint8_t>& b, std::size_t off, std::int32_t v) {
  store_u32(b, off, static_cast<std::uint32_t>(v));
}

inline void store_i16(std::vector<std::uint8_t>& b, std::size_t off, std::int16_t v) {
  b[off] = static_cast<std::uint8_t>(static_cast<std::uint16_t>(v));
  b[off + 1] = static_cast<std::uint8_t>(static_cast<std::uint16_t>(v) >> 8);
}

inline void store_f32(std::vector<std::uint8_t>& b, std::size_t off, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  store_u32(b, off, u);
}

inline std::uint32_t byteswap_u32(std::uint32_t v) {
  return (v << 24) | ((v << 8) & 0x00ff0000u) | ((v >> 8) & 0x0000ff00u) | (v >> 24);
}

}  // namespace detail

using VolumeOrMask = std::variant<Volume, LabelMask>;

/// Decodes one little-endian NIfTI-1 byte sequence. int16/float32 payloads
/// become a Volume, uint8 payloads with values in {0,1} a LabelMask. Any
/// malformed input raises a structured Error; no input may crash the parser.
inline VolumeOrMask read_volume(std::span<const std::uint8_t> bytes) {
  using namespace detail;
  if (bytes.size() < kHeaderSize)
    raise(ErrorKind::Format, "header truncated: need 348 bytes, got " +
                                 std::to_string(bytes.size()));

  const std::int32_t sizeof_hdr = load_i32(bytes, 0);
  if (sizeof_hdr != 348) {
    if (byteswap_u32(static_cast<std::uint32_t>(sizeof_hdr)) == 348u)
      raise(ErrorKind::Format,
            "sizeof_hdr is byte-swapped: big-endian NIfTI-1 is not supported");
    raise(ErrorKind::Format, "sizeof_hdr must be 348, got " + std::to_string(sizeof_hdr));
  }

  if (!(bytes[344] == 'n' && bytes[345] == '+' && bytes[346] == '1' && bytes[347] == '\0'))
    raise(ErrorKind::Format, "magic must be \"n+1\" (single-file NIfTI-1)");

  const std::int16_t ndim = load_i16(bytes, 40);
  if (ndim != 3) raise(ErrorKind::Format, "dim[0] must be 3, got " + std::to_string(ndim));

  const std::int64_t nx = load_i16(bytes, 42);
  const std::int64_t ny = load_i16(bytes, 44);
  const std::int64_t nz = load_i16(bytes, 46);
  if (nx < 1 || ny < 1 || nz < 1)
    raise(ErrorKind::Format, "dim[1..3] must be positive");

  const std::int16_t datatype = load_i16(bytes, 70);
  if (datatype != kDtUint8 && datatype != kDtInt16 && datatype != kDtFloat32)
    raise(ErrorKind::UnsupportedType,
          "datatype code " + std::to_string(datatype) + " not supported (need 2, 4, or 16)");
  const int sample_bytes = datatype == kDtUint8 ? 1 : (datatype == kDtInt16 ? 2 : 4);

  const std::int16_t bitpix = load_i16(bytes, 72);
  if (bitpix != 8 * sample_bytes)
    raise(ErrorKind::Format, "bitpix " + std::to_string(bitpix) +
                                 " inconsistent with datatype " + std::to_string(datatype));

  const float sx = load_f32(bytes, 80);
  const float sy = load_f32(bytes, 84);
  const float sz = load_f32(bytes, 88);
  if (!(std::isfinite(sx) && std::isfinite(sy) && std::isfinite(sz)) || sx <= 0.0f ||
      sy <= 0.0f || sz <= 0.0f)
    raise(ErrorKind::Format, "pixdim[1..3] must be finite and strictly positive");

  const float vox_offset = load_f32(bytes, 108);
  if (!std::isfinite(vox_offset) || vox_offset < kMinVoxOffset ||
      vox_offset != std::floor(vox_offset) || vox_offset > 1e9f)
    raise(ErrorKind::Format, "vox_offset must be an integral value >= 352");

  const float scl_slope = load_f32(bytes, 112);
  const float scl_inter = load_f32(bytes, 116);
  if (!std::isfinite(scl_slope) || !std::isfinite(scl_inter))
    raise(ErrorKind::Format, "scl_slope/scl_inter must be finite");

  const float cal_max = load_f32(bytes, 124);
  const float cal_min = load_f32(bytes, 128);

  // Orientation: only axis-aligned scans are representable. The rotation
  // part of qform/sform is rejected; the translation becomes the origin.
  Vec3f origin{0.0f, 0.0f, 0.0f};
  const std::int16_t qform_code = load_i16(bytes, 252);
  const std::int16_t sform_code = load_i16(bytes, 254);
  if (sform_code > 0) {
    const float m[12] = {load_f32(bytes, 280), load_f32(bytes, 284), load_f32(bytes, 288),
                         load_f32(bytes, 292), load_f32(bytes, 296), load_f32(bytes, 300),
                         load_f32(bytes, 304), load_f32(bytes, 308), load_f32(bytes, 312),
                         load_f32(bytes, 316), load_f32(bytes, 320), load_f32(bytes, 324)};
    for (float v : m)
      if (!std::isfinite(v)) raise(ErrorKind::Format, "srow matrix must be finite");
    if (m[1] != 0.0f || m[2] != 0.0f || m[4] != 0.0f || m[6] != 0.0f || m[8] != 0.0f ||
        m[9] != 0.0f)
      raise(ErrorKind::UnsupportedType, "srow carries a rotation; oblique scans not supported");
    if (m[0] <= 0.0f || m[5] <= 0.0f || m[10] <= 0.0f)
      raise(ErrorKind::UnsupportedType, "srow carries an axis flip; not supported");
    origin = Vec3f{m[11], m[7], m[3]};
  } else if (qform_code > 0) {
    const float qb = load_f32(bytes, 256);
    const float qc = load_f32(bytes, 260);
    const float qd = load_f32(bytes, 264);
    if (!(qb == 0.0f && qc == 0.0f && qd == 0.0f))
      raise(ErrorKind::UnsupportedType,
            "qform quaternion carries a rotation; oblique scans not supported");
    origin = Vec3f{load_f32(bytes, 276), load_f32(bytes, 272), load_f32(bytes, 268)};
    if (!(std::isfinite(origin.z) && std::isfinite(origin.y) && std::isfinite(origin.x)))
      raise(ErrorKind::Format, "qoffset must be finite");
  }

  const std::int64_t voxels = nx * ny * nz;
  const std::uint64_t expected =
      static_cast<std::uint64_t>(vox_offset) + static_cast<std::uint64_t>(voxels) * sample_bytes;
  if (bytes.size() != expected)
    raise(ErrorKind::SizeMismatch, "payload size mismatch: expected " + std::to_string(expected) +
                                       " bytes total, got " + std::to_string(bytes.size()));

  const std::uint8_t* payload = bytes.data() + static_cast<std::size_t>(vox_offset);
  const Dim3 dims{nz, ny, nx};
  const Vec3f spacing{sz, sy, sx};
  const bool scaled = scl_slope != 0.0f && (scl_slope != 1.0f || scl_inter != 0.0f);

  if (datatype == kDtUint8) {
    Grid3<std::uint8_t> grid(dims);
    for (std::int64_t i = 0; i < voxels; ++i) {
      float v = static_cast<float>(payload[i]);
      if (scaled) v = v * scl_slope + scl_inter;
      if (v != 0.0f && v != 1.0f)
        raise(ErrorKind::Format, "uint8 payload is not a binary mask (voxel value " +
                                     std::to_string(v) + ")");
      grid.values()[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
    }
    return LabelMask{std::move(grid), spacing, origin};
  }

  Grid3<float> grid(dims);
  if (datatype == kDtInt16) {
    for (std::int64_t i = 0; i < voxels; ++i) {
      const auto raw = static_cast<std::int16_t>(
          static_cast<std::uint16_t>(payload[2 * i]) |
          (static_cast<std::uint16_t>(payload[2 * i + 1]) << 8));
      grid.values()[static_cast<std::size_t>(i)] = static_cast<float>(raw);
    }
  } else {
    for (std::int64_t i = 0; i < voxels; ++i) {
      std::uint32_t u = static_cast<std::uint32_t>(payload[4 * i]) |
                        (static_cast<std::uint32_t>(payload[4 * i + 1]) << 8) |
                        (static_cast<std::uint32_t>(payload[4 * i + 2]) << 16) |
                        (static_cast<std::uint32_t>(payload[4 * i + 3]) << 24);
      float f;
      std::memcpy(&f, &u, sizeof f);
      grid.values()[static_cast<std::size_t>(i)] = f;
    }
  }
  if (scaled)
    for (auto& v : grid.values()) v = v * scl_slope + scl_inter;

  Volume vol;
  vol.data = std::move(grid);
  vol.spacing = spacing;
  vol.origin = origin;
  // Slope application changes sample values, so the source encoding no
  // longer describes them.
  vol.storage = (datatype == kDtInt16 && !scaled) ? ScalarKind::Int16 : ScalarKind::Float32;
  vol.unit = (datatype == kDtFloat32 && cal_min == 0.0f && cal_max == 1.0f)
                 ? IntensityUnit::Normalized
                 : IntensityUnit::HU;
  return vol;
}

namespace detail {

inline std::vector<std::uint8_t> make_header(Dim3 dims, Vec3f spacing, Vec3f origin,
                                             std::int16_t datatype, int sample_bytes,
                                             float cal_min, float cal_max) {
  if (dims.x > 32767 || dims.y > 32767 || dims.z > 32767)
    raise(ErrorKind::Capacity, "dims exceed the 16-bit NIfTI dim fields");
  if (!dims.positive()) raise(ErrorKind::Shape, "dims must be positive");
  require_spacing_positive(spacing);

  std::vector<std::uint8_t> out(kHeaderSize + 4, 0);  // header + empty extender
  store_i32(out, 0, 348);
  store_i16(out, 40, 3);
  store_i16(out, 42, static_cast<std::int16_t>(dims.x));
  store_i16(out, 44, static_cast<std::int16_t>(dims.y));
  store_i16(out, 46, static_cast<std::int16_t>(dims.z));
  for (std::size_t i = 48; i < 56; i += 2) store_i16(out, i, 1);
  store_i16(out, 70, datatype);
  store_i16(out, 72, static_cast<std::int16_t>(8 * sample_bytes));
  store_f32(out, 76, 1.0f);  // qfac
  store_f32(out, 80, spacing.x);
  store_f32(out, 84, spacing.y);
  store_f32(out, 88, spacing.z);
  store_f32(out, 108, 352.0f);
  store_f32(out, 112, 0.0f);  // scl_slope unset: samples stored as-is
  store_f32(out, 116, 0.0f);
  store_f32(out, 124, cal_max);
  store_f32(out, 128, cal_min);
  store_i16(out, 252, 0);  // qform unused
  store_i16(out, 254, 1);  // sform: scaled identity + translation
  store_f32(out, 280, spacing.x);
  store_f32(out, 292, origin.x);
  store_f32(out, 296 + 4, spacing.y);
  store_f32(out, 296 + 12, origin.y);
  store_f32(out, 312 + 8, spacing.z);
  store_f32(out, 312 + 12, origin.z);
  out[344] = 'n';
  out[345] = '+';
  out[346] = '1';
  out[347] = '\0';
  return out;
}

}  // namespace detail

/// Encodes a Volume. The sample encoding follows v.storage; int16 is demoted
/// to float32 if any sample is not exactly representable as int16.
inline std::vector<std::uint8_t> write_volume(const Volume& v) {
  using namespace detail;
  ScalarKind kind = v.storage;
  if (kind == ScalarKind::Uint8) kind = ScalarKind::Float32;  // uint8 is reserved for masks
  if (kind == ScalarKind::Int16) {
    for (float s : v.data.values()) {
      if (!(s >= -32768.0f && s <= 32767.0f) || s != std::truncf(s)) {
        kind = ScalarKind::Float32;
        break;
      }
    }
  }
  const bool normalized = v.unit == IntensityUnit::Normalized;
  const std::int16_t dt = kind == ScalarKind::Int16 ? kDtInt16 : kDtFloat32;
  const int sample_bytes = kind == ScalarKind::Int16 ? 2 : 4;
  auto out = make_header(v.dims(), v.spacing, v.origin, dt, sample_bytes,
                         0.0f, normalized ? 1.0f : 0.0f);

  const auto& vals = v.data.values();
  out.reserve(out.size() + vals.size() * static_cast<std::size_t>(sample_bytes));
  if (kind == ScalarKind::Int16) {
    for (float s : vals) {
      const auto raw = static_cast<std::int16_t>(s);
      out.push_back(static_cast<std::uint8_t>(static_cast<std::uint16_t>(raw)));
      out.push_back(static_cast<std::uint8_t>(static_cast<std::uint16_t>(raw) >> 8));
    }
  } else {
    for (float s : vals) {
      std::uint32_t u;
      std::memcpy(&u, &s, sizeof u);
      out.push_back(static_cast<std::uint8_t>(u));
      out.push_back(static_cast<std::uint8_t>(u >> 8));
      out.push_back(static_cast<std::uint8_t>(u >> 16));
      out.push_back(static_cast<std::uint8_t>(u >> 24));
    }
  }
  return out;
}

inline std::vector<std::uint8_t> write_volume(const LabelMask& m) {
  using namespace detail;
  require_binary(m);
  auto out = make_header(m.dims(), m.spacing, m.origin, kDtUint8, 1, 0.0f, 1.0f);
  const auto& vals = m.data.values();
  out.insert(out.end(), vals.begin(), vals.end());
  return out;
}

inline std::vector<std::uint8_t> write_volume(const VolumeOrMask& v) {
  return std::visit([](const auto& x) { return write_volume(x); }, v);
}

inline VolumeOrMask read_volume_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Ingestion, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return read_volume(bytes);
}

template <typename T>
inline void write_volume_file(const std::filesystem::path& path, const T& v) {
  const auto bytes = write_volume(v);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::Processing, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::Processing, "short write to " + path.string());
}

}  // namespace femseg::nifti
