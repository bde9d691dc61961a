#pragma once

#include <vector>

#include "cascadet/box.hpp"

namespace cascadet {

// Anchors of one pyramid level, row-major by grid cell then anchor index:
// boxes[(i * grid_w + j) * per_location + a].
struct AnchorSet {
  std::vector<Box> boxes;
  int level = 0;
  int stride = 0;
  int per_location = 0;
  int grid_h = 0;
  int grid_w = 0;

  std::size_t size() const { return boxes.size(); }
};

// Default side scales {2S, 2*sqrt(2)*S}.
std::vector<double> default_anchor_scales(int stride);

inline constexpr double kAnchorAspect = 1.25;  // height / width

// Anchors centred at ((j + 0.5) S, (i + 0.5) S). A scale s with aspect a
// (height over width) gives width s / sqrt(a), height s * sqrt(a).
AnchorSet tile_anchors(int grid_h, int grid_w, int stride, const std::vector<double>& scales, double aspect = kAnchorAspect,
                       int level = 0);
AnchorSet tile_anchors(int grid_h, int grid_w, int stride, int level = 0);

// One AnchorSet per stride for a square image of side `image_size`.
std::vector<AnchorSet> tile_pyramid(int image_size, const std::vector<int>& strides);

}  // namespace cascadet
