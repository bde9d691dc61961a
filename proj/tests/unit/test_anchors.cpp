#include <gtest/gtest.h>

#include <cmath>

#include "cascadet/anchors.hpp"

using namespace cascadet;

TEST(Anchors, TwoScalesPerStrideAndAspectOnePointTwoFive) {
  const auto s = default_anchor_scales(4);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0], 8.0);
  EXPECT_DOUBLE_EQ(s[1], 8.0 * std::sqrt(2.0));
  EXPECT_EQ(kAnchorAspect, 1.25);
}

TEST(Anchors, SixLevelPyramidSpansEightTo362Pixels) {
  const auto pyramid = tile_pyramid(128, {4, 8, 16, 32, 64, 128});
  double lo = 1e9, hi = 0;
  for (const auto& set : pyramid) {
    for (const auto& b : set.boxes) {
      lo = std::min(lo, b.scale());
      hi = std::max(hi, b.scale());
    }
  }
  EXPECT_NEAR(lo, 8.0, 1e-9);
  EXPECT_NEAR(hi, 256.0 * std::sqrt(2.0), 1e-9);
  EXPECT_EQ(std::lround(hi), 362);
}

TEST(Anchors, LayoutCentresAndShape) {
  const AnchorSet set = tile_anchors(3, 4, 8, 1);
  EXPECT_EQ(set.size(), 3u * 4u * 2u);
  EXPECT_EQ(set.grid_h, 3);
  EXPECT_EQ(set.grid_w, 4);
  EXPECT_EQ(set.level, 1);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      for (int a = 0; a < 2; ++a) {
        const Box& b = set.boxes[static_cast<std::size_t>((i * 4 + j) * 2 + a)];
        EXPECT_DOUBLE_EQ(b.cx(), (j + 0.5) * 8);
        EXPECT_DOUBLE_EQ(b.cy(), (i + 0.5) * 8);
        EXPECT_NEAR(b.height() / b.width(), 1.25, 1e-12);
        EXPECT_NEAR(b.scale(), a == 0 ? 16.0 : 16.0 * std::sqrt(2.0), 1e-12);
      }
    }
  }
}

TEST(Anchors, PyramidCountsForDefaultImage) {
  const auto p = tile_pyramid(128, {4, 8, 16});
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0].size(), 32u * 32u * 2u);
  EXPECT_EQ(p[1].size(), 16u * 16u * 2u);
  EXPECT_EQ(p[2].size(), 8u * 8u * 2u);
}
