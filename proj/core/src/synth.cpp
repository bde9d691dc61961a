#include "cascadet/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <thread>

#include "cascadet/rng.hpp"

namespace cascadet {

namespace {

using Color = std::array<float, 3>;

class Painter {
 public:
  explicit Painter(Image& img) : img_(img) {}

  // Blends `color` with the coverage of an inside-test, 2x2 supersampled.
  template <typename Inside>
  void fill(double x1, double y1, double x2, double y2, const Color& color, Inside inside) {
    const int ix1 = std::max(0, static_cast<int>(std::floor(x1)));
    const int iy1 = std::max(0, static_cast<int>(std::floor(y1)));
    const int ix2 = std::min(img_.width - 1, static_cast<int>(std::ceil(x2)));
    const int iy2 = std::min(img_.height - 1, static_cast<int>(std::ceil(y2)));
    for (int y = iy1; y <= iy2; ++y) {
      for (int x = ix1; x <= ix2; ++x) {
        int hits = 0;
        for (double sy : {0.25, 0.75}) {
          for (double sx : {0.25, 0.75}) hits += inside(x + sx, y + sy) ? 1 : 0;
        }
        if (hits == 0) continue;
        const float cover = static_cast<float>(hits) / 4.f;
        for (int c = 0; c < 3; ++c) img_.at(c, y, x) = img_.at(c, y, x) * (1.f - cover) + color[static_cast<std::size_t>(c)] * cover;
      }
    }
  }

  void ellipse(double cx, double cy, double rx, double ry, const Color& color) {
    fill(cx - rx, cy - ry, cx + rx, cy + ry, color, [=](double x, double y) {
      const double u = (x - cx) / rx, v = (y - cy) / ry;
      return u * u + v * v <= 1.0;
    });
  }

  void rect(double x1, double y1, double x2, double y2, const Color& color) {
    fill(x1, y1, x2, y2, color, [=](double x, double y) { return x >= x1 && x < x2 && y >= y1 && y < y2; });
  }

  void ring(double cx, double cy, double rx, double ry, double thickness, const Color& color) {
    fill(cx - rx, cy - ry, cx + rx, cy + ry, color, [=](double x, double y) {
      const double u = (x - cx) / rx, v = (y - cy) / ry;
      const double r = std::sqrt(u * u + v * v);
      return r <= 1.0 && r >= 1.0 - thickness;
    });
  }

 private:
  Image& img_;
};

double log_uniform(std::mt19937_64& gen, double lo, double hi) {
  std::uniform_real_distribution<double> d(std::log(lo), std::log(hi));
  return std::exp(d(gen));
}

Color skin_color(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> j(-0.08, 0.08);
  return {static_cast<float>(0.86 + j(gen)), static_cast<float>(0.62 + j(gen)), static_cast<float>(0.46 + j(gen))};
}

Color clutter_color(std::mt19937_64& gen) {
  // Cool or grey tones, far from skin.
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> u(0.15, 0.85);
  switch (pick(gen)) {
    case 0: return {static_cast<float>(u(gen) * 0.4), static_cast<float>(u(gen) * 0.6), static_cast<float>(u(gen))};
    case 1: return {static_cast<float>(u(gen) * 0.4), static_cast<float>(u(gen)), static_cast<float>(u(gen) * 0.5)};
    default: {
      const auto g = static_cast<float>(u(gen));
      return {g, g, g};
    }
  }
}

void draw_object(Painter& paint, const Box& b, std::mt19937_64& gen) {
  const Color skin = skin_color(gen);
  const double w = b.width(), h = b.height();
  const double cx = b.cx(), cy = b.cy();
  paint.ellipse(cx, cy, 0.5 * w, 0.5 * h, skin);
  const Color dark{static_cast<float>(skin[0] * 0.25), static_cast<float>(skin[1] * 0.2), static_cast<float>(skin[2] * 0.2)};
  const double eye = std::max(0.6, 0.1 * std::min(w, h));
  paint.ellipse(b.x1 + 0.32 * w, b.y1 + 0.38 * h, eye, eye, dark);
  paint.ellipse(b.x1 + 0.68 * w, b.y1 + 0.38 * h, eye, eye, dark);
  paint.rect(b.x1 + 0.32 * w, b.y1 + 0.68 * h, b.x1 + 0.68 * w, b.y1 + 0.68 * h + std::max(0.7, 0.07 * h), dark);
}

void draw_distractor(Painter& paint, int size, std::mt19937_64& gen) {
  std::uniform_int_distribution<int> kind(0, 2);
  const double s = log_uniform(gen, 6, 50);
  std::uniform_real_distribution<double> aspect(0.4, 2.5);
  const double a = aspect(gen);
  const double w = s / std::sqrt(a), h = s * std::sqrt(a);
  std::uniform_real_distribution<double> px(-0.3 * w, size - 0.7 * w);
  std::uniform_real_distribution<double> py(-0.3 * h, size - 0.7 * h);
  const double x = px(gen), y = py(gen);
  std::bernoulli_distribution skin_like(0.35);
  switch (kind(gen)) {
    case 0: paint.rect(x, y, x + w, y + h, skin_like(gen) ? skin_color(gen) : clutter_color(gen)); break;
    case 1: paint.ellipse(x + 0.5 * w, y + 0.5 * h, 0.5 * w, 0.5 * h, clutter_color(gen)); break;
    default: paint.ring(x + 0.5 * w, y + 0.5 * h, 0.5 * w, 0.5 * h, 0.35, skin_color(gen)); break;
  }
}

// Intersection over the smaller area; keeps objects from hiding each other.
double overlap_ratio(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  return iw * ih / std::min(a.area(), b.area());
}

float bilinear(const Image& img, int c, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  const double lx = x - x0, ly = y - y0;
  return static_cast<float>((1 - ly) * ((1 - lx) * img.at(c, y0, x0) + lx * img.at(c, y0, x1)) +
                            ly * ((1 - lx) * img.at(c, y1, x0) + lx * img.at(c, y1, x1)));
}

}  // namespace

Scene generate_scene(std::uint64_t scene_seed, const GenerateOptions& options) {
  const int size = options.size;
  std::mt19937_64 gen(derive_seed(scene_seed, "scene"));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Scene scene;
  scene.seed = scene_seed;
  scene.scale_mix = options.scale_mix;
  scene.image = Image(size, size);
  Image& img = scene.image;

  Color base{static_cast<float>(0.2 + 0.5 * u01(gen)), static_cast<float>(0.2 + 0.5 * u01(gen)),
             static_cast<float>(0.2 + 0.5 * u01(gen))};
  const double gx = (u01(gen) - 0.5) * 0.4, gy = (u01(gen) - 0.5) * 0.4;
  std::normal_distribution<double> noise(0.0, 0.03);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double ramp = gx * (x / static_cast<double>(size) - 0.5) + gy * (y / static_cast<double>(size) - 0.5);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(base[static_cast<std::size_t>(c)] + ramp + noise(gen));
    }
  }

  Painter paint(img);
  std::uniform_int_distribution<int> n_distract(options.min_distractors, options.max_distractors);
  const int distractors = n_distract(gen);
  for (int i = 0; i < distractors; ++i) draw_distractor(paint, size, gen);

  std::uniform_int_distribution<int> n_obj(options.min_objects, options.max_objects);
  std::uniform_int_distribution<std::size_t> pick_aspect(0, options.aspect_mix.empty() ? 0 : options.aspect_mix.size() - 1);
  std::uniform_real_distribution<double> jitter(0.92, 1.08);
  const int objects = n_obj(gen);
  for (int i = 0; i < objects; ++i) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const bool small = u01(gen) < options.scale_mix;
      const double s = small ? log_uniform(gen, options.small_min, options.small_max)
                             : log_uniform(gen, options.large_min, options.large_max);
      const double a = (options.aspect_mix.empty() ? 1.0 : options.aspect_mix[pick_aspect(gen)]) * jitter(gen);
      const double w = std::clamp(s / std::sqrt(a), 3.0, size - 2.0);
      const double h = std::clamp(s * std::sqrt(a), 3.0, size - 2.0);
      const double x = 1.0 + u01(gen) * (size - 2.0 - w);
      const double y = 1.0 + u01(gen) * (size - 2.0 - h);
      const Box b{x, y, x + w, y + h};
      const bool crowded = std::any_of(scene.gts.begin(), scene.gts.end(), [&](const Box& g) { return overlap_ratio(b, g) > 0.1; });
      if (crowded) continue;
      draw_object(paint, b, gen);
      scene.gts.push_back(b);
      break;
    }
  }
  for (auto& v : img.pixels) v = std::clamp(v, 0.f, 1.f);
  return scene;
}

std::vector<Scene> generate(std::uint64_t seed, int count, const GenerateOptions& options) {
  if (options.size <= 0) throw std::invalid_argument("generate: size must be positive");
  std::vector<Scene> scenes(static_cast<std::size_t>(std::max(0, count)));
  const int threads = std::max(1, std::min(options.threads, count));
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) scenes[static_cast<std::size_t>(i)] = generate_scene(seed + static_cast<std::uint64_t>(i), options);
    return scenes;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) scenes[static_cast<std::size_t>(i)] = generate_scene(seed + static_cast<std::uint64_t>(i), options);
    });
  }
  for (auto& th : pool) th.join();
  return scenes;
}

AugmentParams draw_augment_params(std::uint64_t seed, int output_size) {
  std::mt19937_64 gen(derive_seed(seed, "augment"));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  AugmentParams p;
  p.brightness = (u01(gen) - 0.5) * 0.4;
  p.contrast = 0.8 + 0.4 * u01(gen);
  p.expand = 1.0 + u01(gen);
  p.expand_x = u01(gen);
  p.expand_y = u01(gen);
  p.crop_full = u01(gen) < 0.5;
  p.crop_fraction = 0.5 + 0.5 * u01(gen);
  p.crop_x = u01(gen);
  p.crop_y = u01(gen);
  p.flip = u01(gen) < 0.5;
  p.output_size = output_size;
  return p;
}

Scene augment(const Scene& scene, const AugmentParams& params) {
  const Image& src = scene.image;
  const int h = src.height, w = src.width;
  const int out_size = params.output_size > 0 ? params.output_size : std::min(h, w);

  // Photometric distortion, then mean-padded expansion.
  std::array<double, 3> mean{};
  Image photo = src;
  for (int c = 0; c < 3; ++c) {
    double s = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float& v = photo.at(c, y, x);
        v = std::clamp(static_cast<float>((v - 0.5) * params.contrast + 0.5 + params.brightness), 0.f, 1.f);
        s += v;
      }
    }
    mean[static_cast<std::size_t>(c)] = s / (static_cast<double>(h) * w);
  }
  const int eh = static_cast<int>(std::lround(h * params.expand));
  const int ew = static_cast<int>(std::lround(w * params.expand));
  const int ox = static_cast<int>(std::lround(params.expand_x * (ew - w)));
  const int oy = static_cast<int>(std::lround(params.expand_y * (eh - h)));
  Image canvas(eh, ew);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < eh; ++y) {
      for (int x = 0; x < ew; ++x) {
        const int sx = x - ox, sy = y - oy;
        canvas.at(c, y, x) = (sx >= 0 && sx < w && sy >= 0 && sy < h) ? photo.at(c, sy, sx)
                                                                      : static_cast<float>(mean[static_cast<std::size_t>(c)]);
      }
    }
  }

  // Square patch.
  const double shorter = std::min(eh, ew);
  const double side = params.crop_full ? shorter : std::clamp(params.crop_fraction, 0.5, 1.0) * shorter;
  const double px = params.crop_x * (ew - side);
  const double py = params.crop_y * (eh - side);
  const double scale = out_size / side;

  Scene out;
  out.seed = scene.seed;
  out.scale_mix = scene.scale_mix;
  out.image = Image(out_size, out_size);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < out_size; ++y) {
      for (int x = 0; x < out_size; ++x) {
        const int xo = params.flip ? out_size - 1 - x : x;
        out.image.at(c, y, x) = bilinear(canvas, c, px + (xo + 0.5) / scale - 0.5, py + (y + 0.5) / scale - 0.5);
      }
    }
  }
  for (const Box& g : scene.gts) {
    const Box moved{g.x1 + ox - px, g.y1 + oy - py, g.x2 + ox - px, g.y2 + oy - py};
    if (moved.cx() < 0 || moved.cx() >= side || moved.cy() < 0 || moved.cy() >= side) continue;
    Box b = clip(moved, side, side);
    b = {b.x1 * scale, b.y1 * scale, b.x2 * scale, b.y2 * scale};
    if (params.flip) b = {out_size - b.x2, b.y1, out_size - b.x1, b.y2};
    if (b.width() < 2.0 || b.height() < 2.0) continue;
    out.gts.push_back(b);
  }
  return out;
}

Scene augment(const Scene& scene, std::uint64_t seed) {
  return augment(scene, draw_augment_params(seed, scene.image.height));
}

Tensor<float> make_batch(const std::vector<Scene>& scenes, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const Image& first = scenes.at(indices.front()).image;
  std::vector<float> data;
  data.reserve(indices.size() * first.pixels.size());
  for (std::size_t i : indices) {
    const Image& img = scenes.at(i).image;
    if (img.height != first.height || img.width != first.width) throw std::invalid_argument("make_batch: image sizes differ");
    data.insert(data.end(), img.pixels.begin(), img.pixels.end());
  }
  return Tensor<float>::from_data({static_cast<std::int64_t>(indices.size()), 3, first.height, first.width}, std::move(data));
}

void export_scene(const Scene& scene, int image_id, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = "scene_" + std::to_string(image_id);
  std::ofstream ppm(dir / (stem + ".ppm"), std::ios::binary);
  if (!ppm) throw std::runtime_error("cannot write " + (dir / (stem + ".ppm")).string());
  ppm << "P6\n" << scene.image.width << ' ' << scene.image.height << "\n255\n";
  for (int y = 0; y < scene.image.height; ++y) {
    for (int x = 0; x < scene.image.width; ++x) {
      for (int c = 0; c < 3; ++c) ppm.put(static_cast<char>(std::lround(std::clamp(scene.image.at(c, y, x), 0.f, 1.f) * 255.f)));
    }
  }
  std::ofstream txt(dir / (stem + ".txt"));
  write_boxes(txt, image_id, scene.gts);
}

}  // namespace cascadet
