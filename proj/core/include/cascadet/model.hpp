#pragma once

// Desk-scale detector graph: plain conv backbone with a top-down lateral
// pyramid, two-step prediction heads shared across levels, optional RFE
// blocks inside the heads, and the training-only feature supervision head.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cascadet/box.hpp"
#include "cascadet/checkpoint.hpp"
#include "cascadet/tensor.hpp"

namespace cascadet {

struct ModelConfig {
  int image_size = 128;
  std::vector<int> strides{4, 8, 16};
  int stem_channels = 16;
  int channels = 16;  // backbone level outputs, pyramid and head width
  int head_depth = 2;
  bool rfe_enabled = true;
  bool fsm_enabled = true;
  int fsm_channels = 16;
  int fsm_bins = 5;
  int anchors_per_location = 2;

  int num_levels() const { return static_cast<int>(strides.size()); }
  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct Proposal {
  Box box;  // image pixels
  int level = 0;
  int label = 0;  // 1 face, 0 background
  int batch = 0;  // image index within the mini-batch
};

template <typename T>
struct LevelOutputs {
  Tensor<T> cls1;  // [N,A,H,W], defined on two-step classification levels
  Tensor<T> reg1;  // [N,4A,H,W], defined on two-step regression levels
  Tensor<T> cls2;  // [N,A,H,W]
  Tensor<T> reg2;  // [N,4A,H,W]
};

template <typename T>
struct Features {
  std::vector<Tensor<T>> backbone;  // bottom-up maps, one per level
  std::vector<Tensor<T>> pyramid;   // top-down + lateral maps, one per level
};

template <typename T>
class Detector {
 public:
  Detector(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  Features<T> features(const Tensor<T>& images) const;
  // Pyramid maps only; level i has extent image / stride_i.
  std::vector<Tensor<T>> build_fpn(const Tensor<T>& images) const { return features(images).pyramid; }

  // Step-1 classification runs on backbone maps of `stc_levels`, step-1
  // regression on backbone maps of `str_levels`; step 2 runs on every
  // pyramid level. Both steps share the classification subnet.
  std::vector<LevelOutputs<T>> heads(const Features<T>& feats, const std::vector<int>& str_levels,
                                     const std::vector<int>& stc_levels) const;

  // Shape-preserving four-branch block; `prefix` names its parameters.
  Tensor<T> rfe_block(const Tensor<T>& x, const std::string& prefix) const;

  // One face logit per proposal, shape [R], in proposal order. Proposals
  // are sampled from the pyramid map of their level.
  Tensor<T> fsm_forward(const std::vector<Tensor<T>>& pyramid, const std::vector<Proposal>& proposals) const;

  const std::vector<std::string>& parameter_names() const { return names_; }
  const Tensor<T>& param(const std::string& name) const;
  Tensor<T>& param(const std::string& name);
  bool has_param(const std::string& name) const { return params_.count(name) != 0; }
  std::vector<Tensor<T>> parameters() const;
  void zero_grad();

  std::vector<ParamRecord> to_records() const;
  // Strict load: names, order-independent, and shapes must match exactly.
  void load_records(const std::vector<ParamRecord>& records);
  // Copies every parameter whose name and shape also exist in `records`.
  std::size_t copy_matching(const std::vector<ParamRecord>& records);

 private:
  void add_conv(const std::string& name, int out_c, int in_c, int kh, int kw, double bias_init = 0.0);
  void add_subnet(const std::string& name, int out_c, double bias_init);
  Tensor<T> apply_conv(const Tensor<T>& x, const std::string& name, int stride, int pad_h, int pad_w) const;
  Tensor<T> apply_subnet(const Tensor<T>& x, const std::string& name) const;
  bool layer_is_rfe(int layer) const;

  ModelConfig config_;
  std::uint64_t seed_;
  std::vector<std::string> names_;
  std::map<std::string, Tensor<T>> params_;
};

// Level whose anchor scales best fit `box` (nearest in log scale).
int assign_level(const Box& box, const std::vector<int>& strides);

struct FsmSampling {
  double nms_overlap = 0.7;
  int max_proposals = 64;  // per image
  double neg_iou = 0.4;  // background below this IoU
  double pos_iou = 0.7;  // face at or above this IoU
  bool operator==(const FsmSampling&) const = default;
};

// Builds FSM training proposals for one image: every ground truth first,
// then NMS survivors of `detections` in descending score, labelled by best
// ground-truth IoU. Detections in the ignore band or with zero area after
// clipping are skipped. At most max_proposals are returned.
std::vector<Proposal> sample_fsm_proposals(const std::vector<Detection>& detections, const std::vector<Box>& gts,
                                           const std::vector<int>& strides, int image_size,
                                           const FsmSampling& sampling = {}, int batch = 0);

extern template class Detector<float>;
extern template class Detector<double>;

}  // namespace cascadet
