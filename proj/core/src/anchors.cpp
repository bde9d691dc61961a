#include "cascadet/anchors.hpp"

#include <cmath>
#include <stdexcept>

namespace cascadet {

std::vector<double> default_anchor_scales(int stride) {
  return {2.0 * stride, 2.0 * std::sqrt(2.0) * stride};
}

AnchorSet tile_anchors(int grid_h, int grid_w, int stride, const std::vector<double>& scales, double aspect, int level) {
  if (stride <= 0) throw std::invalid_argument("tile_anchors: stride must be positive");
  if (grid_h < 0 || grid_w < 0) throw std::invalid_argument("tile_anchors: negative grid");
  if (!(aspect > 0)) throw std::invalid_argument("tile_anchors: aspect must be positive");
  AnchorSet set;
  set.level = level;
  set.stride = stride;
  set.per_location = static_cast<int>(scales.size());
  set.grid_h = grid_h;
  set.grid_w = grid_w;
  set.boxes.reserve(static_cast<std::size_t>(grid_h) * grid_w * scales.size());
  const double root = std::sqrt(aspect);
  for (int i = 0; i < grid_h; ++i) {
    for (int j = 0; j < grid_w; ++j) {
      const double cx = (j + 0.5) * stride;
      const double cy = (i + 0.5) * stride;
      for (double s : scales) {
        const double w = s / root;
        const double h = s * root;
        set.boxes.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
      }
    }
  }
  return set;
}

AnchorSet tile_anchors(int grid_h, int grid_w, int stride, int level) {
  return tile_anchors(grid_h, grid_w, stride, default_anchor_scales(stride), kAnchorAspect, level);
}

std::vector<AnchorSet> tile_pyramid(int image_size, const std::vector<int>& strides) {
  std::vector<AnchorSet> out;
  for (std::size_t l = 0; l < strides.size(); ++l) {
    const int s = strides[l];
    if (s <= 0 || image_size % s != 0) {
      throw std::invalid_argument("tile_pyramid: image size " + std::to_string(image_size) +
                                  " not divisible by stride " + std::to_string(s));
    }
    out.push_back(tile_anchors(image_size / s, image_size / s, s, static_cast<int>(l)));
  }
  return out;
}

}  // namespace cascadet
