#pragma once

// Selective two-step regression / classification.
//
// Training flow for one mini-batch:
//   1. match anchors to ground truth with the step-1 thresholds;
//   2. refine anchors on the two-step regression levels with the step-1
//      deltas (values only, no gradient);
//   3. drop anchors whose step-1 negative confidence exceeds the filter
//      threshold on the two-step classification levels; the survivors are
//      the step-2 sample set;
//   4. re-match the survivors, as refined, with the step-2 thresholds;
//   5. assemble the regression and classification losses of both steps.
// Steps 1-4 are plan_targets(); step 5 is str_loss / stc_loss / hybrid_loss.

#include <cstdint>
#include <vector>

#include "cascadet/anchors.hpp"
#include "cascadet/box.hpp"
#include "cascadet/losses.hpp"
#include "cascadet/model.hpp"
#include "cascadet/tensor.hpp"

namespace cascadet {

struct MatchThresholds {
  double neg = 0.3;  // background below
  double pos = 0.7;  // positive at or above
  bool operator==(const MatchThresholds&) const = default;
};

struct CascadeConfig {
  std::vector<int> str_levels{1, 2};
  std::vector<int> stc_levels{0, 1};
  double stc_threshold = 0.99;
  MatchThresholds step1{0.3, 0.7};
  MatchThresholds step2{0.4, 0.5};
  FsmSampling fsm{};
  bool sml_enabled = true;
  double sml_alpha = kMarginAlpha;
  double focal_gamma = kFocalGamma;
  double focal_balance = kFocalBalance;
  // Inference.
  double score_threshold = 0.05;
  int pre_nms_top = 5000;
  double nms_overlap = 0.4;
  int max_detections = 750;

  void validate(int num_levels) const;
  bool operator==(const CascadeConfig&) const = default;
};

// Per-anchor assignment. Values >= 0 are the matched ground-truth index.
struct MatchAssignment {
  static constexpr int kNegative = -1;
  static constexpr int kIgnored = -2;

  std::vector<int> labels;
  std::vector<double> best_iou;

  bool positive(std::size_t i) const { return labels[i] >= 0; }
  bool negative(std::size_t i) const { return labels[i] == kNegative; }
  bool ignored(std::size_t i) const { return labels[i] == kIgnored; }
  std::int64_t num_positive() const;
  std::int64_t num_negative() const;
};

// Threshold matching plus forced matching: each ground truth also claims its
// highest-IoU anchor (first index on ties; later ground truths win shared
// anchors) as long as that IoU is positive.
MatchAssignment match(const std::vector<Box>& anchors, const std::vector<Box>& gts, MatchThresholds thresholds);
MatchAssignment match(const std::vector<AnchorSet>& anchors, const std::vector<Box>& gts, MatchThresholds thresholds);

// 1 where the step-1 negative confidence is <= threshold.
std::vector<std::uint8_t> stc_filter(const std::vector<double>& neg_prob, double threshold = 0.99);

// decode(delta, anchor) on `str_levels`, identity elsewhere. `deltas` has
// one entry per anchor per level (ignored off the selected levels).
std::vector<AnchorSet> str_refine(const std::vector<AnchorSet>& anchors, const std::vector<std::vector<Delta>>& deltas,
                                  const std::vector<int>& str_levels);

// Anchors of every level concatenated in level order.
struct PyramidLayout {
  std::vector<AnchorSet> levels;
  std::vector<Box> flat;
  std::vector<int> level_of;
  std::vector<std::size_t> offset;

  PyramidLayout() = default;
  PyramidLayout(int image_size, const std::vector<int>& strides);
  std::size_t size() const { return flat.size(); }
};

// Regression heads emit encode() deltas multiplied per coordinate by these.
inline constexpr Delta kDeltaWeights{10.0, 10.0, 5.0, 5.0};

Delta to_head_units(Delta delta, const Delta& weights = kDeltaWeights);
Delta from_head_units(Delta delta, const Delta& weights = kDeltaWeights);

// Raw head outputs of one image in flat anchor order.
struct ImagePredictions {
  std::vector<double> cls1;  // logits; meaningful on two-step classification levels
  std::vector<Delta> reg1;   // meaningful on two-step regression levels
  std::vector<double> cls2;
  std::vector<Delta> reg2;
};

template <typename T>
std::vector<ImagePredictions> extract_predictions(const std::vector<LevelOutputs<T>>& outputs, const PyramidLayout& layout);

struct TrainTargets {
  int batch = 0;
  std::size_t anchors = 0;  // per image
  // All per-anchor arrays are indexed [image * anchors + anchor].
  std::vector<std::int8_t> label1;
  std::vector<double> target1;  // 4 per anchor, weighted
  std::vector<std::uint8_t> keep;
  std::vector<std::int8_t> label2;  // kIgnore outside the kept set
  std::vector<double> target2;      // 4 per anchor, weighted
  std::vector<double> margin2;
  std::vector<Box> refined;
  std::vector<Proposal> proposals;
  // Step-1 counts cover every level; the loss terms cover only the selected ones.
  std::int64_t n_s1 = 0, n_s2 = 0, n_s3 = 0, n_s4 = 0;
  // Step-1 positives/negatives before and after filtering.
  std::int64_t pos_before = 0, neg_before = 0, pos_after = 0, neg_after = 0;
};

TrainTargets plan_targets(const PyramidLayout& layout, const std::vector<ImagePredictions>& preds,
                          const std::vector<std::vector<Box>>& gts, const CascadeConfig& config, bool sample_fsm,
                          int image_size);

// Two smooth-L1 terms normalized by max(N_s1,1) and max(N_s2,1).
template <typename T>
Tensor<T> str_loss(const std::vector<LevelOutputs<T>>& outputs, const PyramidLayout& layout, const TrainTargets& targets,
                   const std::vector<int>& str_levels);

// Two focal terms normalized by max(N_s3,1) and max(N_s4,1); the step-2
// term carries the scale-aware margins in targets.margin2.
template <typename T>
Tensor<T> stc_loss(const std::vector<LevelOutputs<T>>& outputs, const PyramidLayout& layout, const TrainTargets& targets,
                   const CascadeConfig& config);

template <typename T>
Tensor<T> fsm_loss(const Detector<T>& model, const Features<T>& feats, const TrainTargets& targets,
                   const CascadeConfig& config);

template <typename T>
struct HybridLoss {
  Tensor<T> total;
  LossReport report;
};

// L = L_STR + L_STC + L_FSM (the last only when the model has an FSM head
// and there are proposals).
template <typename T>
HybridLoss<T> hybrid_loss(const Detector<T>& model, const Features<T>& feats, const std::vector<LevelOutputs<T>>& outputs,
                          const PyramidLayout& layout, const TrainTargets& targets, const CascadeConfig& config);

// Single-step detector loss (focal + smooth-L1 over every anchor, one
// matching at the step-2 thresholds, no margin). Reference path.
template <typename T>
HybridLoss<T> one_step_loss(const std::vector<LevelOutputs<T>>& outputs, const PyramidLayout& layout,
                            const std::vector<std::vector<Box>>& gts, const CascadeConfig& config);

// Filter -> refine -> score -> threshold -> top-k -> NMS -> top-k.
std::vector<Detection> postprocess(const ImagePredictions& preds, const PyramidLayout& layout,
                                   const CascadeConfig& config, int image_size);

// Per-image detections of a batch [N,3,H,W].
std::vector<std::vector<Detection>> inference_pipeline(const Detector<float>& model, const Tensor<float>& images,
                                                       const CascadeConfig& config);

}  // namespace cascadet
