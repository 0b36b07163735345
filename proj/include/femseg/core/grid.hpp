#pragma once

#include <cstdint>
#include <vector>

#include "femseg/core/error.hpp"

namespace femseg {

/// Grid extents in (z, y, x) order: z indexes axial slices, x varies fastest
/// in memory. Matches the payload order of the supported volume format.
struct Dim3 {
  std::int64_t z = 0;
  std::int64_t y = 0;
  std::int64_t x = 0;

  std::int64_t voxels() const { return z * y * x; }
  bool positive() const { return z > 0 && y > 0 && x > 0; }
  friend bool operator==(const Dim3&, const Dim3&) = default;
};

inline Dim3 operator+(Dim3 a, Dim3 b) { return {a.z + b.z, a.y + b.y, a.x + b.x}; }
inline Dim3 operator-(Dim3 a, Dim3 b) { return {a.z - b.z, a.y - b.y, a.x - b.x}; }

/// Dense 3D grid stored as one contiguous buffer, indexed (z, y, x).
template <typename T>
class Grid3 {
 public:
  Grid3() = default;

  explicit Grid3(Dim3 dims, T fill = T{}) : dims_(dims) {
    if (!dims.positive()) raise(ErrorKind::Shape, "grid dims must be positive");
    data_.assign(static_cast<std::size_t>(dims.voxels()), fill);
  }

  Grid3(Dim3 dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (!dims.positive()) raise(ErrorKind::Shape, "grid dims must be positive");
    if (static_cast<std::int64_t>(data_.size()) != dims.voxels())
      raise(ErrorKind::Shape, "grid data length does not match dims");
  }

  Dim3 dims() const { return dims_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  bool contains(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return z >= 0 && z < dims_.z && y >= 0 && y < dims_.y && x >= 0 && x < dims_.x;
  }

  std::int64_t index(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return (z * dims_.y + y) * dims_.x + x;
  }

  T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>(index(z, y, x))];
  }
  const T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return data_[static_cast<std::size_t>(index(z, y, x))];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  Dim3 dims_;
  std::vector<T> data_;
};

}  // namespace femseg
