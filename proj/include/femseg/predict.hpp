#pragma once

#include <utility>
#include <vector>

#include "femseg/nn/activations.hpp"
#include "femseg/nn/unet.hpp"
#include "femseg/patching.hpp"

namespace femseg {

/// Tiled inference: plans overlapping patches, runs `net` (image patch in,
/// 2-channel probability patch out) on each, and fuses by voxel-wise mean.
template <typename NetFn>
inline std::array<Grid3<double>, 2> predict_probabilities(NetFn&& net, const Grid3<float>& vol,
                                                          Dim3 patch, Dim3 overlap) {
  const PatchGrid grid = plan_patches(vol.dims(), patch, overlap);
  std::vector<Tensor> probs;
  probs.reserve(grid.origins.size());
  for (const Dim3& origin : grid.origins)
    probs.push_back(net(extract_patch(vol, grid, origin)));
  return stitch(grid, probs);
}

/// Foreground mask from stitched probabilities; strictly greater than 0.5.
inline LabelMask threshold_foreground(const std::array<Grid3<double>, 2>& probs, Vec3f spacing,
                                      Vec3f origin) {
  LabelMask out;
  out.data = Grid3<std::uint8_t>(probs[1].dims());
  out.spacing = spacing;
  out.origin = origin;
  const auto& fg = probs[1].values();
  for (std::size_t i = 0; i < fg.size(); ++i) out.data.values()[i] = fg[i] > 0.5 ? 1 : 0;
  return out;
}

/// Full-volume prediction through eval-mode patch inference.
inline LabelMask predict_volume(UNetModel& m, const PreprocessedCase& c, Dim3 patch,
                                Dim3 overlap) {
  auto net = [&m](Tensor t) {
    Tensor logits = unet_forward(m, std::move(t), false);
    return softmax_voxelwise(logits);
  };
  const auto probs = predict_probabilities(net, c.input.data, patch, overlap);
  return threshold_foreground(probs, c.input.spacing, c.input.origin);
}

}  // namespace femseg
