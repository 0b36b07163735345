#pragma once

#include <vector>

#include "femseg/core/volume.hpp"
#include "femseg/preprocess.hpp"

// Restores predictions to the geometry of the source scan and removes
// spurious islands by keeping the largest connected component.

namespace femseg {

/// Un-mirrors (when flagged) and embeds the prediction at its recorded crop
/// offset inside a zero grid of the original extents. Foreground count is
/// preserved exactly.
inline LabelMask restore_geometry(const LabelMask& pred, const GeometryRecord& geom) {
  validate_geometry(geom, pred.dims());
  LabelMask working = pred;
  if (geom.mirrored) detail::reverse_x(working.data);

  LabelMask out;
  out.data = Grid3<std::uint8_t>(geom.original_dims);
  out.spacing = pred.spacing;
  out.origin = pred.origin;
  const Dim3 d = working.dims();
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x; ++x)
        out.data(geom.crop_offset.z + z, geom.crop_offset.y + y, geom.crop_offset.x + x) =
            working.data(z, y, x);
  return out;
}

struct ComponentLabeling {
  Grid3<std::int32_t> labels;               // 0 = background, components 1..K
  std::vector<std::int64_t> component_sizes;  // size of component k at index k-1
};

/// Flood-fill labeling under 6- or 26-connectivity. Labels are assigned in
/// first-voxel scan order, so the labeling is deterministic.
inline ComponentLabeling label_components(const LabelMask& m, int connectivity = 26) {
  if (connectivity != 6 && connectivity != 26)
    raise(ErrorKind::Config, "connectivity must be 6 or 26");
  const Dim3 d = m.dims();
  ComponentLabeling out;
  out.labels = Grid3<std::int32_t>(d);

  std::vector<Dim3> offsets;
  for (std::int64_t dz = -1; dz <= 1; ++dz)
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && dy == 0 && dx == 0) continue;
        if (connectivity == 6 && std::abs(dz) + std::abs(dy) + std::abs(dx) != 1) continue;
        offsets.push_back(Dim3{dz, dy, dx});
      }

  std::vector<std::int64_t> stack;
  std::int32_t next_label = 0;
  for (std::int64_t z = 0; z < d.z; ++z)
    for (std::int64_t y = 0; y < d.y; ++y)
      for (std::int64_t x = 0; x < d.x; ++x) {
        if (!m.data(z, y, x) || out.labels(z, y, x) != 0) continue;
        ++next_label;
        std::int64_t size = 0;
        stack.push_back(m.data.index(z, y, x));
        out.labels(z, y, x) = next_label;
        while (!stack.empty()) {
          const std::int64_t idx = stack.back();
          stack.pop_back();
          ++size;
          const std::int64_t cz = idx / (d.y * d.x);
          const std::int64_t cy = (idx / d.x) % d.y;
          const std::int64_t cx = idx % d.x;
          for (const auto& o : offsets) {
            const std::int64_t nz = cz + o.z, ny = cy + o.y, nx = cx + o.x;
            if (!m.data.contains(nz, ny, nx)) continue;
            if (!m.data(nz, ny, nx) || out.labels(nz, ny, nx) != 0) continue;
            out.labels(nz, ny, nx) = next_label;
            stack.push_back(m.data.index(nz, ny, nx));
          }
        }
        out.component_sizes.push_back(size);
      }
  return out;
}

/// Keeps exactly the maximum-size component; ties resolve to the component
/// whose first voxel comes earliest in scan order (the lowest label).
inline LabelMask largest_component(const LabelMask& m, int connectivity = 26) {
  if (m.foreground_count() == 0)
    raise(ErrorKind::Degenerate, "largest_component: empty mask");
  const auto labeling = label_components(m, connectivity);
  std::int32_t best = 1;
  for (std::size_t k = 1; k < labeling.component_sizes.size(); ++k)
    if (labeling.component_sizes[k] > labeling.component_sizes[static_cast<std::size_t>(best - 1)])
      best = static_cast<std::int32_t>(k + 1);

  LabelMask out = m;
  const auto& lv = labeling.labels.values();
  for (std::size_t i = 0; i < lv.size(); ++i)
    out.data.values()[i] = lv[i] == best ? 1 : 0;
  return out;
}

}  // namespace femseg
