#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cascadet/box.hpp"
#include "cascadet/cascade.hpp"
#include "cascadet/eval.hpp"
#include "cascadet/model.hpp"
#include "cascadet/ops.hpp"
#include "cascadet/synth.hpp"

using namespace cascadet;

namespace {

Tensorf random_float(std::mt19937_64& gen, Shape shape, bool requires_grad = false) {
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = u(gen);
  return Tensorf::from_data(std::move(shape), std::move(v), requires_grad);
}

std::vector<Detection> random_detections(std::mt19937_64& gen, int n) {
  std::uniform_real_distribution<double> pos(0, 112), side(6, 40), score(0, 1);
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    const double x = pos(gen), y = pos(gen);
    dets.push_back({{x, y, x + side(gen), y + side(gen)}, score(gen), 0});
  }
  return dets;
}

void BM_Conv3x3Forward(benchmark::State& state) {
  std::mt19937_64 gen(1);
  const auto c = state.range(0), hw = state.range(1);
  const auto x = random_float(gen, {8, c, hw, hw});
  const auto k = random_float(gen, {c, c, 3, 3});
  const auto b = random_float(gen, {c});
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, b, Conv2dOptions::same(3, 3, 1)));
}
BENCHMARK(BM_Conv3x3Forward)->Args({16, 32})->Args({16, 64})->Unit(benchmark::kMicrosecond);

void BM_Conv3x3ForwardBackward(benchmark::State& state) {
  std::mt19937_64 gen(2);
  const auto c = state.range(0), hw = state.range(1);
  const auto x = random_float(gen, {8, c, hw, hw}, true);
  const auto k = random_float(gen, {c, c, 3, 3}, true);
  const auto b = random_float(gen, {c}, true);
  for (auto _ : state) {
    const auto y = conv2d(x, k, b, Conv2dOptions::same(3, 3, 1));
    sum(mul(y, y)).backward();
  }
}
BENCHMARK(BM_Conv3x3ForwardBackward)->Args({16, 32})->Args({16, 64})->Unit(benchmark::kMicrosecond);

void BM_Nms(benchmark::State& state) {
  std::mt19937_64 gen(3);
  const auto dets = random_detections(gen, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(nms(dets, 0.4, 750));
}
BENCHMARK(BM_Nms)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMicrosecond);

void BM_ComputeAp(benchmark::State& state) {
  std::mt19937_64 gen(4);
  DetectionsPerImage dets;
  BoxesPerImage gts;
  for (int i = 0; i < 200; ++i) {
    dets.push_back(random_detections(gen, 50));
    std::vector<Box> g;
    for (const auto& d : random_detections(gen, 4)) g.push_back(d.box);
    gts.push_back(std::move(g));
  }
  for (auto _ : state) benchmark::DoNotOptimize(compute_ap(dets, gts, 0.5));
}
BENCHMARK(BM_ComputeAp)->Unit(benchmark::kMillisecond);

void BM_DetectorInference(benchmark::State& state) {
  const Detector<float> model(ModelConfig{}, 5);
  const auto scenes = generate(11, static_cast<int>(state.range(0)));
  std::vector<std::size_t> idx(scenes.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto images = make_batch(scenes, idx);
  const CascadeConfig cascade;
  for (auto _ : state) benchmark::DoNotOptimize(inference_pipeline(model, images, cascade));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DetectorInference)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_PlanTargets(benchmark::State& state) {
  const Detector<float> model(ModelConfig{}, 6);
  const auto scenes = generate(12, 8);
  std::vector<std::size_t> idx(scenes.size());
  std::vector<std::vector<Box>> gts;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    idx[i] = i;
    gts.push_back(scenes[i].gts);
  }
  const CascadeConfig cascade;
  const PyramidLayout layout(128, model.config().strides);
  NoGradGuard no_grad;
  const auto feats = model.features(make_batch(scenes, idx));
  const auto preds = extract_predictions(model.heads(feats, cascade.str_levels, cascade.stc_levels), layout);
  for (auto _ : state) benchmark::DoNotOptimize(plan_targets(layout, preds, gts, cascade, true, 128));
}
BENCHMARK(BM_PlanTargets)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
