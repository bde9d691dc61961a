#include "cascadet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "cascadet/rng.hpp"

namespace cascadet {

void TrainConfig::validate() const {
  if (!(lr_start > 0) || !(lr_peak > 0)) throw std::invalid_argument("train: learning rates must be positive");
  if (warmup_epochs < 0 || epochs < 0) throw std::invalid_argument("train: epoch counts must be non-negative");
  int previous = warmup_epochs;
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] <= previous && !(i == 0 && milestones[i] == previous && previous == 0)) {
      throw std::invalid_argument("train: need warmup_epochs < milestone[0] < milestone[1] < ...");
    }
    previous = milestones[i];
  }
  if (momentum < 0 || momentum >= 1) throw std::invalid_argument("train: momentum must lie in [0,1)");
  if (weight_decay < 0) throw std::invalid_argument("train: weight decay must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be positive");
}

double learning_rate(const TrainConfig& config, std::int64_t step, std::int64_t steps_per_epoch) {
  const std::int64_t warmup_steps = static_cast<std::int64_t>(config.warmup_epochs) * steps_per_epoch;
  if (step < warmup_steps) {
    return config.lr_start + (config.lr_peak - config.lr_start) * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  const std::int64_t epoch = steps_per_epoch > 0 ? step / steps_per_epoch : 0;
  double lr = config.lr_peak;
  for (int m : config.milestones) {
    if (epoch >= m) lr /= 10.0;
  }
  return lr;
}

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, double lr, double momentum,
              double weight_decay) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_step: parameter, gradient and velocity sizes differ");
  }
  const T mom = static_cast<T>(momentum), wd = static_cast<T>(weight_decay), rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = mom * velocity[i] + grads[i] + wd * params[i];
    params[i] -= rate * velocity[i];
  }
}

template <typename T>
Sgd<T>::Sgd(std::vector<Tensor<T>> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : params_) velocity_.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
}

template <typename T>
void Sgd<T>::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const std::span<const T> g = p.grad();
    sgd_step<T>(p.mutable_data(), g, velocity_[i], lr, momentum_, weight_decay_);
  }
}

TrainingDiverged::TrainingDiverged(std::int64_t step, double loss)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "training diverged at step " << step << " (loss " << loss << ")";
        return os.str();
      }()),
      step_(step) {}

LossReport train_step(Detector<float>& model, Sgd<float>& optimizer, const std::vector<Scene>& scenes,
                      const std::vector<std::size_t>& indices, const PyramidLayout& layout, const CascadeConfig& cascade,
                      double lr, std::int64_t step) {
  const Tensor<float> images = make_batch(scenes, indices);
  std::vector<std::vector<Box>> gts;
  for (std::size_t i : indices) gts.push_back(scenes[i].gts);
  const auto feats = model.features(images);
  const auto outputs = model.heads(feats, cascade.str_levels, cascade.stc_levels);
  const auto preds = extract_predictions(outputs, layout);
  const int size = model.config().image_size;
  const TrainTargets targets = plan_targets(layout, preds, gts, cascade, model.config().fsm_enabled, size);
  const auto loss = hybrid_loss(model, feats, outputs, layout, targets, cascade);
  if (!std::isfinite(loss.report.total)) throw TrainingDiverged(step, loss.report.total);
  model.zero_grad();
  loss.total.backward();
  optimizer.step(lr);
  return loss.report;
}

std::vector<EpochLog> train(Detector<float>& model, const std::vector<Scene>& scenes, const TrainConfig& config,
                            const CascadeConfig& cascade, std::uint64_t seed,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  cascade.validate(model.config().num_levels());
  std::vector<EpochLog> log;
  if (config.epochs == 0 || scenes.empty()) return log;
  const PyramidLayout layout(model.config().image_size, model.config().strides);
  Sgd<float> optimizer(model.parameters(), config.momentum, config.weight_decay);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const auto steps_per_epoch = static_cast<std::int64_t>((scenes.size() + batch - 1) / batch);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(derive_seed(seed, 0x5348554646ull, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), gen);

    EpochLog entry;
    entry.epoch = epoch;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      std::vector<Scene> batch_scenes;
      std::vector<std::size_t> indices;
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t s = order[i];
        batch_scenes.push_back(config.augment ? augment(scenes[s], derive_seed(seed, s, static_cast<std::uint64_t>(epoch) + 1))
                                              : scenes[s]);
        indices.push_back(i - begin);
      }
      const double lr = learning_rate(config, step, steps_per_epoch);
      const LossReport r = train_step(model, optimizer, batch_scenes, indices, layout, cascade, lr, step);
      const double w = static_cast<double>(end - begin) / static_cast<double>(scenes.size());
      entry.mean.str_loss += w * r.str_loss;
      entry.mean.stc_loss += w * r.stc_loss;
      entry.mean.fsm_loss += w * r.fsm_loss;
      entry.mean.total += w * r.total;
      entry.mean.n_s1 += r.n_s1;
      entry.mean.n_s2 += r.n_s2;
      entry.mean.n_s3 += r.n_s3;
      entry.mean.n_s4 += r.n_s4;
      entry.lr = lr;
      ++step;
    }
    entry.step = step;
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return log;
}

template void sgd_step<float>(std::span<float>, std::span<const float>, std::span<float>, double, double, double);
template void sgd_step<double>(std::span<double>, std::span<const double>, std::span<double>, double, double, double);
template class Sgd<float>;
template class Sgd<double>;

}  // namespace cascadet
