#include "cascadet/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "cascadet/ops.hpp"
#include "cascadet/rng.hpp"

namespace cascadet {

namespace {

constexpr double kPriorProbability = 0.01;

// (kh, kw) of the four RFE branches.
constexpr int kRfeKernels[4][2] = {{1, 3}, {3, 1}, {1, 5}, {5, 1}};

bool contains(const std::vector<int>& levels, int level) {
  return std::find(levels.begin(), levels.end(), level) != levels.end();
}

}  // namespace

void ModelConfig::validate() const {
  if (strides.empty()) throw std::invalid_argument("model: at least one level is required");
  if (strides.front() != 4) throw std::invalid_argument("model: the first level must have stride 4");
  for (std::size_t i = 1; i < strides.size(); ++i) {
    if (strides[i] != 2 * strides[i - 1]) {
      throw std::invalid_argument("model: strides must double from level to level");
    }
  }
  if (image_size <= 0 || image_size % strides.back() != 0) {
    throw std::invalid_argument("model: image size " + std::to_string(image_size) + " not divisible by max stride " +
                                std::to_string(strides.back()));
  }
  if (stem_channels < 1 || channels < 1 || fsm_channels < 1) throw std::invalid_argument("model: channel counts must be positive");
  if (head_depth < 0) throw std::invalid_argument("model: head depth must be non-negative");
  if (rfe_enabled && channels % 4 != 0) {
    throw std::invalid_argument("model: channels (" + std::to_string(channels) + ") must be divisible by 4 with RFE");
  }
  if (fsm_bins < 1) throw std::invalid_argument("model: fsm bins must be positive");
  if (anchors_per_location != 2) throw std::invalid_argument("model: two anchors per location are tiled");
}

template <typename T>
Detector<T>::Detector(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
  config_.validate();
  const int c = config_.channels;
  const int a = config_.anchors_per_location;
  add_conv("backbone.stem", config_.stem_channels, 3, 3, 3);
  for (int l = 0; l < config_.num_levels(); ++l) {
    const std::string p = "backbone.c" + std::to_string(l);
    add_conv(p + ".down", c, l == 0 ? config_.stem_channels : c, 3, 3);
    add_conv(p + ".conv", c, c, 3, 3);
  }
  for (int l = 0; l < config_.num_levels(); ++l) {
    add_conv("fpn.lateral" + std::to_string(l), c, c, 1, 1);
    add_conv("fpn.smooth" + std::to_string(l), c, c, 3, 3);
  }
  const double prior = -std::log((1.0 - kPriorProbability) / kPriorProbability);
  add_subnet("head.cls", a, prior);
  add_subnet("head.reg1", 4 * a, 0.0);
  add_subnet("head.reg2", 4 * a, 0.0);
  if (config_.fsm_enabled) {
    const int f = config_.fsm_channels;
    add_conv("fsm.conv1", f, c, 3, 3);
    add_conv("fsm.conv2", f, f, 3, 3);
    add_conv("fsm.conv3", f, f, 3, 3);
    add_conv("fsm.pred", 1, f, 3, 3);
  }
}

template <typename T>
void Detector<T>::add_conv(const std::string& name, int out_c, int in_c, int kh, int kw, double bias_init) {
  // Fan-in uniform ("xavier" filler): U(-sqrt(3/fan_in), sqrt(3/fan_in)).
  const double fan_in = static_cast<double>(in_c) * kh * kw;
  const double limit = std::sqrt(3.0 / fan_in);
  std::mt19937_64 gen(derive_seed(seed_, name));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<T> w(static_cast<std::size_t>(out_c) * in_c * kh * kw);
  for (auto& v : w) v = static_cast<T>(dist(gen));
  params_.emplace(name + ".w", Tensor<T>::from_data({out_c, in_c, kh, kw}, std::move(w), true));
  params_.emplace(name + ".b", Tensor<T>::full({out_c}, static_cast<T>(bias_init), true));
  names_.push_back(name + ".w");
  names_.push_back(name + ".b");
}

template <typename T>
bool Detector<T>::layer_is_rfe(int layer) const {
  if (!config_.rfe_enabled) return false;
  const int depth = config_.head_depth;
  const int start = depth >= 2 ? (depth - 2) / 2 : 0;
  return layer >= start && layer < start + std::min(2, depth);
}

template <typename T>
void Detector<T>::add_subnet(const std::string& name, int out_c, double bias_init) {
  const int c = config_.channels;
  for (int d = 0; d < config_.head_depth; ++d) {
    const std::string layer = name + ".layer" + std::to_string(d);
    if (layer_is_rfe(d)) {
      for (int b = 0; b < 4; ++b) {
        const std::string branch = layer + ".b" + std::to_string(b);
        add_conv(branch + ".reduce", c / 4, c, 1, 1);
        add_conv(branch + ".conv", c / 4, c / 4, kRfeKernels[b][0], kRfeKernels[b][1]);
      }
      add_conv(layer + ".fuse", c, c, 1, 1);
    } else {
      add_conv(layer, c, c, 3, 3);
    }
  }
  add_conv(name + ".pred", out_c, c, 3, 3, bias_init);
}

template <typename T>
const Tensor<T>& Detector<T>::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
Tensor<T>& Detector<T>::param(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
std::vector<Tensor<T>> Detector<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (const auto& n : names_) out.push_back(params_.at(n));
  return out;
}

template <typename T>
void Detector<T>::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

template <typename T>
Tensor<T> Detector<T>::apply_conv(const Tensor<T>& x, const std::string& name, int stride, int pad_h, int pad_w) const {
  return conv2d(x, param(name + ".w"), param(name + ".b"), Conv2dOptions{stride, pad_h, pad_w});
}

template <typename T>
Features<T> Detector<T>::features(const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw std::invalid_argument("detector input must be [N,3,H,W], got " + shape_str(images.shape()));
  }
  const std::int64_t max_stride = config_.strides.back();
  if (images.dim(2) % max_stride != 0 || images.dim(3) % max_stride != 0) {
    throw std::invalid_argument("image extents " + shape_str(images.shape()) + " not divisible by max stride " +
                                std::to_string(max_stride));
  }
  Features<T> f;
  Tensor<T> x = relu(apply_conv(images, "backbone.stem", 2, 1, 1));
  for (int l = 0; l < config_.num_levels(); ++l) {
    const std::string p = "backbone.c" + std::to_string(l);
    x = relu(apply_conv(x, p + ".down", 2, 1, 1));
    x = relu(apply_conv(x, p + ".conv", 1, 1, 1));
    f.backbone.push_back(x);
  }
  const int levels = config_.num_levels();
  std::vector<Tensor<T>> merged(static_cast<std::size_t>(levels));
  for (int l = levels - 1; l >= 0; --l) {
    Tensor<T> lateral = apply_conv(f.backbone[static_cast<std::size_t>(l)], "fpn.lateral" + std::to_string(l), 1, 0, 0);
    merged[static_cast<std::size_t>(l)] =
        l == levels - 1 ? lateral : add(lateral, upsample_nearest2x(merged[static_cast<std::size_t>(l + 1)]));
  }
  for (int l = 0; l < levels; ++l) {
    f.pyramid.push_back(apply_conv(merged[static_cast<std::size_t>(l)], "fpn.smooth" + std::to_string(l), 1, 1, 1));
  }
  return f;
}

template <typename T>
Tensor<T> Detector<T>::rfe_block(const Tensor<T>& x, const std::string& prefix) const {
  if (x.rank() != 4 || x.dim(1) % 4 != 0) {
    throw std::invalid_argument("rfe_block: channels of " + shape_str(x.shape()) + " not divisible by 4");
  }
  std::vector<Tensor<T>> branches;
  for (int b = 0; b < 4; ++b) {
    const std::string branch = prefix + ".b" + std::to_string(b);
    Tensor<T> y = relu(apply_conv(x, branch + ".reduce", 1, 0, 0));
    y = relu(apply_conv(y, branch + ".conv", 1, kRfeKernels[b][0] / 2, kRfeKernels[b][1] / 2));
    branches.push_back(y);
  }
  return add(x, apply_conv(concat(branches, 1), prefix + ".fuse", 1, 0, 0));
}

template <typename T>
Tensor<T> Detector<T>::apply_subnet(const Tensor<T>& x, const std::string& name) const {
  Tensor<T> y = x;
  for (int d = 0; d < config_.head_depth; ++d) {
    const std::string layer = name + ".layer" + std::to_string(d);
    y = relu(layer_is_rfe(d) ? rfe_block(y, layer) : apply_conv(y, layer, 1, 1, 1));
  }
  return apply_conv(y, name + ".pred", 1, 1, 1);
}

template <typename T>
std::vector<LevelOutputs<T>> Detector<T>::heads(const Features<T>& feats, const std::vector<int>& str_levels,
                                                const std::vector<int>& stc_levels) const {
  std::vector<LevelOutputs<T>> out;
  for (int l = 0; l < config_.num_levels(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    LevelOutputs<T> o;
    if (contains(stc_levels, l)) o.cls1 = apply_subnet(feats.backbone[li], "head.cls");
    if (contains(str_levels, l)) o.reg1 = apply_subnet(feats.backbone[li], "head.reg1");
    o.cls2 = apply_subnet(feats.pyramid[li], "head.cls");
    o.reg2 = apply_subnet(feats.pyramid[li], "head.reg2");
    out.push_back(std::move(o));
  }
  return out;
}

template <typename T>
Tensor<T> Detector<T>::fsm_forward(const std::vector<Tensor<T>>& pyramid, const std::vector<Proposal>& proposals) const {
  if (!config_.fsm_enabled) throw std::logic_error("fsm_forward on a model built without the FSM head");
  if (proposals.empty()) return Tensor<T>::zeros({0});
  std::vector<Tensor<T>> pooled;
  std::vector<std::int64_t> position(proposals.size());
  std::int64_t row = 0;
  for (int l = 0; l < config_.num_levels(); ++l) {
    const double stride = config_.strides[static_cast<std::size_t>(l)];
    std::vector<RoI> rois;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
      const Proposal& p = proposals[i];
      if (p.level < 0 || p.level >= config_.num_levels()) throw std::invalid_argument("fsm_forward: bad proposal level");
      if (p.level != l) continue;
      if (!(p.box.width() > 0) || !(p.box.height() > 0)) throw std::invalid_argument("fsm_forward: degenerate proposal box");
      rois.push_back({p.batch, p.box.x1 / stride - 0.5, p.box.y1 / stride - 0.5, p.box.x2 / stride - 0.5,
                      p.box.y2 / stride - 0.5});
      position[i] = row++;
    }
    if (!rois.empty()) pooled.push_back(roi_align(pyramid[static_cast<std::size_t>(l)], rois, config_.fsm_bins));
  }
  Tensor<T> x = gather_rows(concat(pooled, 0), position);
  x = relu(apply_conv(x, "fsm.conv1", 1, 1, 1));
  x = relu(apply_conv(x, "fsm.conv2", 1, 1, 1));
  x = relu(apply_conv(x, "fsm.conv3", 1, 1, 1));
  x = global_avg_pool(apply_conv(x, "fsm.pred", 1, 1, 1));
  return reshape(x, {static_cast<std::int64_t>(proposals.size())});
}

template <typename T>
std::vector<ParamRecord> Detector<T>::to_records() const {
  std::vector<ParamRecord> out;
  for (const auto& n : names_) {
    const auto& t = params_.at(n);
    ParamRecord rec{n, t.shape(), {}};
    rec.values.reserve(static_cast<std::size_t>(t.numel()));
    for (T v : t.data()) rec.values.push_back(static_cast<float>(v));
    out.push_back(std::move(rec));
  }
  return out;
}

template <typename T>
void Detector<T>::load_records(const std::vector<ParamRecord>& records) {
  if (records.size() != names_.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(records.size()) + " parameters, model expects " +
                             std::to_string(names_.size()));
  }
  for (const auto& rec : records) {
    auto it = params_.find(rec.name);
    if (it == params_.end()) throw std::runtime_error("checkpoint parameter '" + rec.name + "' not in model");
    if (it->second.shape() != rec.shape) {
      throw std::runtime_error("checkpoint parameter '" + rec.name + "' has shape " + shape_str(rec.shape) +
                               ", model expects " + shape_str(it->second.shape()));
    }
  }
  copy_matching(records);
}

template <typename T>
std::size_t Detector<T>::copy_matching(const std::vector<ParamRecord>& records) {
  std::size_t copied = 0;
  for (const auto& rec : records) {
    auto it = params_.find(rec.name);
    if (it == params_.end() || it->second.shape() != rec.shape) continue;
    auto dst = it->second.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(rec.values[i]);
    ++copied;
  }
  return copied;
}

int assign_level(const Box& box, const std::vector<int>& strides) {
  int best = 0;
  double best_gap = 0;
  const double s = std::max(box.scale(), 1e-6);
  for (std::size_t l = 0; l < strides.size(); ++l) {
    const double anchor_scale = 2.0 * strides[l] * std::pow(2.0, 0.25);
    const double gap = std::abs(std::log(s / anchor_scale));
    if (l == 0 || gap < best_gap) {
      best = static_cast<int>(l);
      best_gap = gap;
    }
  }
  return best;
}

std::vector<Proposal> sample_fsm_proposals(const std::vector<Detection>& detections, const std::vector<Box>& gts,
                                           const std::vector<int>& strides, int image_size, const FsmSampling& sampling,
                                           int batch) {
  std::vector<Proposal> out;
  const auto cap = static_cast<std::size_t>(std::max(0, sampling.max_proposals));
  for (const Box& g : gts) {
    if (out.size() >= cap) return out;
    out.push_back({g, assign_level(g, strides), 1, batch});
  }
  std::vector<Detection> clipped;
  clipped.reserve(detections.size());
  for (const Detection& d : detections) {
    Detection c = d;
    c.box = clip(d.box, image_size, image_size);
    if (c.box.width() >= 1.0 && c.box.height() >= 1.0) clipped.push_back(c);
  }
  for (std::size_t idx : nms_indices(clipped, sampling.nms_overlap)) {
    if (out.size() >= cap) break;
    const Detection& d = clipped[idx];
    double best = 0;
    for (const Box& g : gts) best = std::max(best, iou(d.box, g));
    if (best >= sampling.pos_iou) {
      out.push_back({d.box, d.level, 1, batch});
    } else if (best < sampling.neg_iou) {
      out.push_back({d.box, d.level, 0, batch});
    }
  }
  return out;
}

template class Detector<float>;
template class Detector<double>;

}  // namespace cascadet
