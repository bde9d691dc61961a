#pragma once

// Procedural detection scenes. Objects are textured ellipses inscribed in
// their ground-truth rectangle (two dark spots and a band, loosely face
// like) drawn over a noisy gradient with distractor clutter.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cascadet/box.hpp"
#include "cascadet/tensor.hpp"

namespace cascadet {

// Planar RGB image, values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // [3][height][width]

  Image() = default;
  Image(int h, int w, float fill = 0.f) : height(h), width(w), pixels(static_cast<std::size_t>(3) * h * w, fill) {}
  float& at(int c, int y, int x) { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }

  bool operator==(const Image&) const = default;
};

struct Scene {
  Image image;
  std::vector<Box> gts;
  std::uint64_t seed = 0;
  double scale_mix = 0;  // fraction of small objects the scene was drawn with

  bool operator==(const Scene&) const = default;
};

struct GenerateOptions {
  int size = 128;
  // Probability that an object is drawn from the small range.
  double scale_mix = 0.5;
  // Height/width ratios objects are drawn from (each jittered by +-8%).
  std::vector<double> aspect_mix{0.8, 1.0, 1.25, 1.25, 1.5, 2.5, 0.45};
  double small_min = 8, small_max = 18;
  double large_min = 18, large_max = 48;
  int min_objects = 1, max_objects = 5;
  int min_distractors = 2, max_distractors = 6;
  // Worker threads; scenes depend only on (seed + index).
  int threads = 1;
};

inline constexpr double kSmallObjectScale = 16.0;  // sqrt(w h) boundary of the small subset

// Scene i is drawn from seed + i, so any subrange can be regenerated alone.
std::vector<Scene> generate(std::uint64_t seed, int count, const GenerateOptions& options = {});
Scene generate_scene(std::uint64_t scene_seed, const GenerateOptions& options = {});

struct AugmentParams {
  double brightness = 0;  // additive, within +-0.2
  double contrast = 1;    // multiplicative about 0.5, within [0.8, 1.2]
  double expand = 1;      // canvas factor in [1, 2], mean padded
  double expand_x = 0, expand_y = 0;  // image placement within the canvas, fractions of the slack
  bool crop_full = true;  // square patch of the shorter side, else crop_fraction of it
  double crop_fraction = 1;  // in [0.5, 1]
  double crop_x = 0, crop_y = 0;  // patch placement, fractions of the slack
  bool flip = false;
  int output_size = 0;  // 0 keeps the input size
};

AugmentParams draw_augment_params(std::uint64_t seed, int output_size = 0);
// Ground truths are carried through the same geometric transform; those
// whose centre leaves the patch, or that end up narrower than 2 px, are dropped.
Scene augment(const Scene& scene, const AugmentParams& params);
Scene augment(const Scene& scene, std::uint64_t seed);

// Stacks the images of scenes[indices] into [N,3,H,W].
Tensor<float> make_batch(const std::vector<Scene>& scenes, const std::vector<std::size_t>& indices);

// Binary PPM (P6) plus "<stem>.txt" with one "image_id x1 y1 x2 y2" line per box.
void export_scene(const Scene& scene, int image_id, const std::filesystem::path& dir);

}  // namespace cascadet
