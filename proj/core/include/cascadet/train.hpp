#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cascadet/cascade.hpp"
#include "cascadet/losses.hpp"
#include "cascadet/model.hpp"
#include "cascadet/synth.hpp"

namespace cascadet {

struct TrainConfig {
  double lr_start = 3.125e-4;
  double lr_peak = 1e-2;
  int warmup_epochs = 2;
  std::vector<int> milestones{20, 26};  // lr divided by 10 at each
  int epochs = 30;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 8;
  bool augment = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Linear ramp from lr_start at step 0 to lr_peak at the end of warmup, then
// lr_peak / 10^k where k counts the milestones already reached.
double learning_rate(const TrainConfig& config, std::int64_t step, std::int64_t steps_per_epoch);

// velocity <- momentum * velocity + grad + weight_decay * param
// param    <- param - lr * velocity
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, double lr, double momentum,
              double weight_decay);

template <typename T>
class Sgd {
 public:
  Sgd(std::vector<Tensor<T>> params, double momentum, double weight_decay);
  void step(double lr);

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> velocity_;
  double momentum_;
  double weight_decay_;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::int64_t step, double loss);
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

struct EpochLog {
  int epoch = 0;
  std::int64_t step = 0;  // global steps completed
  double lr = 0;          // rate of the last step
  LossReport mean;        // epoch mean of each component
};

// Runs one optimization step on scenes[indices]; returns the loss report.
// Throws TrainingDiverged (tagged with `step`) before touching the weights
// when the loss is not finite.
LossReport train_step(Detector<float>& model, Sgd<float>& optimizer, const std::vector<Scene>& scenes,
                      const std::vector<std::size_t>& indices, const PyramidLayout& layout, const CascadeConfig& cascade,
                      double lr, std::int64_t step = 0);

// Full schedule over `scenes`. Shuffling and augmentation draw from `seed`.
std::vector<EpochLog> train(Detector<float>& model, const std::vector<Scene>& scenes, const TrainConfig& config,
                            const CascadeConfig& cascade, std::uint64_t seed,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace cascadet
