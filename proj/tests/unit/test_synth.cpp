#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cascadet/synth.hpp"

using namespace cascadet;

namespace {

void expect_boxes_inside(const Scene& s) {
  for (const Box& b : s.gts) {
    EXPECT_GE(b.x1, 0.0);
    EXPECT_GE(b.y1, 0.0);
    EXPECT_LE(b.x2, s.image.width);
    EXPECT_LE(b.y2, s.image.height);
    EXPECT_GT(b.width(), 0.0);
    EXPECT_GT(b.height(), 0.0);
  }
}

double mean_scale(const std::vector<Scene>& scenes) {
  double total = 0;
  int n = 0;
  for (const auto& s : scenes)
    for (const auto& b : s.gts) {
      total += b.scale();
      ++n;
    }
  return total / n;
}

}  // namespace

TEST(Generate, SameSeedSameScenes) {
  EXPECT_EQ(generate(5, 6), generate(5, 6));
  EXPECT_NE(generate(5, 1)[0].image, generate(6, 1)[0].image);
}

TEST(Generate, ThreadCountDoesNotChangeOutput) {
  GenerateOptions threaded;
  threaded.threads = 3;
  EXPECT_EQ(generate(11, 7), generate(11, 7, threaded));
}

TEST(Generate, SceneIDependsOnlyOnSeedPlusI) {
  const auto all = generate(40, 5);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], generate_scene(40 + static_cast<std::uint64_t>(i)));
}

TEST(Generate, BoxesInsideImageAndPixelsInRange) {
  const GenerateOptions opt;
  for (const Scene& s : generate(70, 30)) {
    EXPECT_EQ(s.image.height, 128);
    EXPECT_EQ(s.image.width, 128);
    EXPECT_FALSE(s.gts.empty());
    EXPECT_LE(static_cast<int>(s.gts.size()), opt.max_objects);
    expect_boxes_inside(s);
    for (float v : s.image.pixels) {
      EXPECT_GE(v, 0.f);
      EXPECT_LE(v, 1.f);
    }
  }
}

TEST(Generate, ScaleMixShiftsObjectSizes) {
  GenerateOptions small, large;
  small.scale_mix = 1.0;
  large.scale_mix = 0.0;
  const auto a = generate(90, 40, small), b = generate(90, 40, large);
  EXPECT_LT(mean_scale(a), kSmallObjectScale + 2.0);
  EXPECT_GT(mean_scale(b), mean_scale(a) + 8.0);
}

TEST(Augment, NeutralParamsAreIdentity) {
  const Scene s = generate_scene(3);
  const Scene out = augment(s, AugmentParams{});
  EXPECT_EQ(out.gts, s.gts);
  ASSERT_EQ(out.image.pixels.size(), s.image.pixels.size());
  for (std::size_t i = 0; i < s.image.pixels.size(); ++i) ASSERT_NEAR(out.image.pixels[i], s.image.pixels[i], 1e-6f);
}

TEST(Augment, FlipMirrorsBoxesAndPixels) {
  const Scene s = generate_scene(4);
  AugmentParams p;
  p.flip = true;
  const Scene out = augment(s, p);
  ASSERT_EQ(out.gts.size(), s.gts.size());
  for (std::size_t i = 0; i < s.gts.size(); ++i) {
    EXPECT_NEAR(out.gts[i].x1, 128 - s.gts[i].x2, 1e-9);
    EXPECT_NEAR(out.gts[i].x2, 128 - s.gts[i].x1, 1e-9);
    EXPECT_NEAR(out.gts[i].y1, s.gts[i].y1, 1e-9);
  }
  EXPECT_NEAR(out.image.at(1, 10, 0), s.image.at(1, 10, 127), 1e-6f);
  EXPECT_EQ(augment(out, p).gts.size(), s.gts.size());
}

TEST(Augment, RandomDrawsKeepBoxesValidAndAreDeterministic) {
  const auto scenes = generate(120, 10);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scene& s = scenes[seed % scenes.size()];
    const Scene a = augment(s, seed);
    EXPECT_EQ(a, augment(s, seed));
    EXPECT_EQ(a.image.height, 128);
    expect_boxes_inside(a);
    for (const Box& b : a.gts) EXPECT_GE(std::min(b.width(), b.height()), 2.0);
  }
}

TEST(Augment, DrawnParamsStayInTheirRanges) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const AugmentParams p = draw_augment_params(seed);
    EXPECT_LE(std::abs(p.brightness), 0.2);
    EXPECT_GE(p.contrast, 0.8);
    EXPECT_LE(p.contrast, 1.2);
    EXPECT_GE(p.expand, 1.0);
    EXPECT_LE(p.expand, 2.0);
    EXPECT_GE(p.crop_fraction, 0.5);
    EXPECT_LE(p.crop_fraction, 1.0);
  }
}

TEST(MakeBatch, StacksImagesInOrder) {
  const auto scenes = generate(8, 3);
  const auto batch = make_batch(scenes, {2, 0});
  EXPECT_EQ(batch.shape(), (Shape{2, 3, 128, 128}));
  EXPECT_EQ(batch.at(0), scenes[2].image.pixels[0]);
  EXPECT_EQ(batch.at(3 * 128 * 128), scenes[0].image.pixels[0]);
  EXPECT_THROW(make_batch(scenes, {}), std::invalid_argument);
}

TEST(ExportScene, WritesImageAndBoxFile) {
  const auto dir = std::filesystem::temp_directory_path() / "cascadet_export_test";
  std::filesystem::remove_all(dir);
  const Scene s = generate_scene(9);
  export_scene(s, 7, dir);
  EXPECT_EQ(std::filesystem::file_size(dir / "scene_7.ppm"), 15u + 3u * 128u * 128u);
  std::ifstream txt(dir / "scene_7.txt");
  int lines = 0, id = -1;
  double x1, y1, x2, y2;
  while (txt >> id >> x1 >> y1 >> x2 >> y2) {
    EXPECT_EQ(id, 7);
    ++lines;
  }
  EXPECT_EQ(lines, static_cast<int>(s.gts.size()));
  std::filesystem::remove_all(dir);
}
