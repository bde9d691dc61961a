#include "cascadet/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cascadet/ops.hpp"

namespace cascadet {

namespace {

std::vector<int> normalized(std::vector<int> levels) {
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

bool contains(const std::vector<int>& levels, int level) {
  return std::find(levels.begin(), levels.end(), level) != levels.end();
}

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

template <typename T>
T inverse_count(std::int64_t n) {
  return static_cast<T>(1.0 / static_cast<double>(std::max<std::int64_t>(n, 1)));
}

void check_thresholds(const MatchThresholds& t, const char* what) {
  if (!(t.neg >= 0 && t.pos <= 1 && t.neg <= t.pos)) {
    throw std::invalid_argument(std::string(what) + " thresholds must satisfy 0 <= neg <= pos <= 1");
  }
}

}  // namespace

void CascadeConfig::validate(int num_levels) const {
  for (const auto* set : {&str_levels, &stc_levels}) {
    for (int l : *set) {
      if (l < 0 || l >= num_levels) throw std::invalid_argument("cascade: level " + std::to_string(l) + " does not exist");
    }
  }
  if (!(stc_threshold > 0 && stc_threshold < 1)) throw std::invalid_argument("cascade: stc_threshold must lie in (0,1)");
  check_thresholds(step1, "step-1");
  check_thresholds(step2, "step-2");
  check_thresholds({fsm.neg_iou, fsm.pos_iou}, "fsm");
  if (sml_alpha < 0) throw std::invalid_argument("cascade: sml_alpha must be non-negative");
  if (focal_gamma < 0 || focal_balance <= 0 || focal_balance >= 1) {
    throw std::invalid_argument("cascade: focal gamma must be >= 0 and balance in (0,1)");
  }
  if (pre_nms_top < 1 || max_detections < 1 || fsm.max_proposals < 0) {
    throw std::invalid_argument("cascade: detection limits must be positive");
  }
}

std::int64_t MatchAssignment::num_positive() const {
  return std::count_if(labels.begin(), labels.end(), [](int l) { return l >= 0; });
}

std::int64_t MatchAssignment::num_negative() const {
  return std::count(labels.begin(), labels.end(), kNegative);
}

MatchAssignment match(const std::vector<Box>& anchors, const std::vector<Box>& gts, MatchThresholds thresholds) {
  MatchAssignment m;
  m.labels.assign(anchors.size(), MatchAssignment::kNegative);
  m.best_iou.assign(anchors.size(), 0.0);
  if (gts.empty()) return m;
  std::vector<double> gt_best(gts.size(), 0.0);
  std::vector<std::size_t> gt_arg(gts.size(), 0);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    int best = -1;
    double best_iou = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(anchors[i], gts[g]);
      if (best < 0 || v > best_iou) {
        best = static_cast<int>(g);
        best_iou = v;
      }
      if (v > gt_best[g]) {
        gt_best[g] = v;
        gt_arg[g] = i;
      }
    }
    m.best_iou[i] = best_iou;
    if (best_iou >= thresholds.pos) {
      m.labels[i] = best;
    } else if (best_iou >= thresholds.neg) {
      m.labels[i] = MatchAssignment::kIgnored;
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gt_best[g] > 0) m.labels[gt_arg[g]] = static_cast<int>(g);
  }
  return m;
}

MatchAssignment match(const std::vector<AnchorSet>& anchors, const std::vector<Box>& gts, MatchThresholds thresholds) {
  std::vector<Box> flat;
  for (const auto& set : anchors) flat.insert(flat.end(), set.boxes.begin(), set.boxes.end());
  return match(flat, gts, thresholds);
}

Delta to_head_units(Delta delta, const Delta& weights) {
  for (std::size_t c = 0; c < 4; ++c) delta[c] *= weights[c];
  return delta;
}

Delta from_head_units(Delta delta, const Delta& weights) {
  for (std::size_t c = 0; c < 4; ++c) delta[c] /= weights[c];
  return delta;
}

std::vector<std::uint8_t> stc_filter(const std::vector<double>& neg_prob, double threshold) {
  std::vector<std::uint8_t> keep(neg_prob.size());
  for (std::size_t i = 0; i < neg_prob.size(); ++i) keep[i] = neg_prob[i] <= threshold ? 1 : 0;
  return keep;
}

std::vector<AnchorSet> str_refine(const std::vector<AnchorSet>& anchors, const std::vector<std::vector<Delta>>& deltas,
                                  const std::vector<int>& str_levels) {
  std::vector<AnchorSet> out = anchors;
  for (auto& set : out) {
    if (!contains(str_levels, set.level)) continue;
    const auto& d = deltas.at(static_cast<std::size_t>(set.level));
    if (d.size() != set.boxes.size()) throw std::invalid_argument("str_refine: delta count does not match anchors");
    for (std::size_t i = 0; i < set.boxes.size(); ++i) set.boxes[i] = decode(d[i], set.boxes[i]);
  }
  return out;
}

PyramidLayout::PyramidLayout(int image_size, const std::vector<int>& strides) : levels(tile_pyramid(image_size, strides)) {
  for (const auto& set : levels) {
    offset.push_back(flat.size());
    flat.insert(flat.end(), set.boxes.begin(), set.boxes.end());
    level_of.insert(level_of.end(), set.boxes.size(), set.level);
  }
}

template <typename T>
std::vector<ImagePredictions> extract_predictions(const std::vector<LevelOutputs<T>>& outputs, const PyramidLayout& layout) {
  if (outputs.size() != layout.levels.size()) throw std::invalid_argument("extract_predictions: level count mismatch");
  const std::int64_t batch = outputs.front().cls2.dim(0);
  std::vector<ImagePredictions> preds(static_cast<std::size_t>(batch));
  for (auto& p : preds) {
    p.cls1.assign(layout.size(), 0.0);
    p.reg1.assign(layout.size(), Delta{});
    p.cls2.assign(layout.size(), 0.0);
    p.reg2.assign(layout.size(), Delta{});
  }
  for (std::size_t l = 0; l < outputs.size(); ++l) {
    const AnchorSet& set = layout.levels[l];
    const std::int64_t a_count = set.per_location, h = set.grid_h, w = set.grid_w;
    auto read_cls = [&](const Tensor<T>& t, auto member) {
      if (!t.defined()) return;
      if (t.shape() != Shape{batch, a_count, h, w}) throw std::invalid_argument("extract_predictions: bad cls shape");
      auto d = t.data();
      for (std::int64_t n = 0; n < batch; ++n)
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t j = 0; j < w; ++j)
            for (std::int64_t a = 0; a < a_count; ++a) {
              const auto anchor = layout.offset[l] + static_cast<std::size_t>((i * w + j) * a_count + a);
              (preds[static_cast<std::size_t>(n)].*member)[anchor] = d[static_cast<std::size_t>(((n * a_count + a) * h + i) * w + j)];
            }
    };
    auto read_reg = [&](const Tensor<T>& t, auto member) {
      if (!t.defined()) return;
      if (t.shape() != Shape{batch, 4 * a_count, h, w}) throw std::invalid_argument("extract_predictions: bad reg shape");
      auto d = t.data();
      for (std::int64_t n = 0; n < batch; ++n)
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t j = 0; j < w; ++j)
            for (std::int64_t a = 0; a < a_count; ++a) {
              const auto anchor = layout.offset[l] + static_cast<std::size_t>((i * w + j) * a_count + a);
              Delta& dst = (preds[static_cast<std::size_t>(n)].*member)[anchor];
              for (std::int64_t c = 0; c < 4; ++c) {
                dst[static_cast<std::size_t>(c)] = d[static_cast<std::size_t>(((n * 4 * a_count + a * 4 + c) * h + i) * w + j)];
              }
            }
    };
    read_cls(outputs[l].cls1, &ImagePredictions::cls1);
    read_reg(outputs[l].reg1, &ImagePredictions::reg1);
    read_cls(outputs[l].cls2, &ImagePredictions::cls2);
    read_reg(outputs[l].reg2, &ImagePredictions::reg2);
  }
  return preds;
}

TrainTargets plan_targets(const PyramidLayout& layout, const std::vector<ImagePredictions>& preds,
                          const std::vector<std::vector<Box>>& gts, const CascadeConfig& config, bool sample_fsm,
                          int image_size) {
  if (preds.size() != gts.size()) throw std::invalid_argument("plan_targets: prediction and ground-truth batch differ");
  const auto str = normalized(config.str_levels);
  const auto stc = normalized(config.stc_levels);
  const std::size_t m = layout.size();
  TrainTargets t;
  t.batch = static_cast<int>(preds.size());
  t.anchors = m;
  const std::size_t total = m * preds.size();
  t.label1.assign(total, kIgnore);
  t.target1.assign(4 * total, 0.0);
  t.keep.assign(total, 0);
  t.label2.assign(total, kIgnore);
  t.target2.assign(4 * total, 0.0);
  t.margin2.assign(total, 0.0);
  t.refined.assign(total, Box{});

  std::vector<std::int64_t> strides;
  for (const auto& set : layout.levels) strides.push_back(set.stride);

  for (std::size_t n = 0; n < preds.size(); ++n) {
    const ImagePredictions& p = preds[n];
    const std::vector<Box>& g = gts[n];
    const std::size_t base = n * m;

    const MatchAssignment m1 = match(layout.flat, g, config.step1);
    std::vector<Box> kept_boxes;
    std::vector<std::size_t> kept_index;
    for (std::size_t i = 0; i < m; ++i) {
      const int level = layout.level_of[i];
      const std::size_t k = base + i;
      if (m1.positive(i)) {
        t.label1[k] = kPositive;
        const Delta d = to_head_units(encode(g[static_cast<std::size_t>(m1.labels[i])], layout.flat[i]));
        std::copy(d.begin(), d.end(), t.target1.begin() + static_cast<std::ptrdiff_t>(4 * k));
        ++t.n_s1;
        ++t.n_s3;
      } else if (m1.negative(i)) {
        t.label1[k] = kNegative;
      }
      t.refined[k] = contains(str, level) ? decode(from_head_units(p.reg1[i]), layout.flat[i]) : layout.flat[i];
      t.keep[k] = contains(stc, level) ? (1.0 - sigmoid(p.cls1[i]) <= config.stc_threshold ? 1 : 0) : 1;
      if (m1.positive(i)) {
        ++t.pos_before;
        if (t.keep[k]) ++t.pos_after;
      } else if (m1.negative(i)) {
        ++t.neg_before;
        if (t.keep[k]) ++t.neg_after;
      }
      if (t.keep[k]) {
        kept_boxes.push_back(t.refined[k]);
        kept_index.push_back(i);
      }
    }

    const MatchAssignment m2 = match(kept_boxes, g, config.step2);
    for (std::size_t r = 0; r < kept_index.size(); ++r) {
      const std::size_t i = kept_index[r];
      const std::size_t k = base + i;
      const Box& anchor = t.refined[k];
      if (m2.positive(r)) {
        const Box& gt = g[static_cast<std::size_t>(m2.labels[r])];
        t.label2[k] = kPositive;
        const Delta d = to_head_units(encode(gt, anchor));
        std::copy(d.begin(), d.end(), t.target2.begin() + static_cast<std::ptrdiff_t>(4 * k));
        if (config.sml_enabled) t.margin2[k] = scale_margin(gt.width(), gt.height(), config.sml_alpha);
        ++t.n_s2;
      } else if (m2.negative(r)) {
        t.label2[k] = kNegative;
        if (config.sml_enabled) t.margin2[k] = scale_margin(anchor.width(), anchor.height(), config.sml_alpha);
      }
    }
    t.n_s4 = t.n_s2;

    if (sample_fsm) {
      std::vector<Detection> dets;
      dets.reserve(kept_index.size());
      for (std::size_t i : kept_index) {
        const std::size_t k = base + i;
        dets.push_back({decode(from_head_units(p.reg2[i]), t.refined[k]), sigmoid(p.cls2[i]), layout.level_of[i]});
      }
      const auto limit = static_cast<std::size_t>(std::max(1, 2 * config.fsm.max_proposals));
      if (dets.size() > limit) {
        std::vector<std::size_t> order(dets.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
        std::vector<Detection> top;
        for (std::size_t j = 0; j < limit; ++j) top.push_back(dets[order[j]]);
        dets = std::move(top);
      }
      std::vector<int> level_strides(strides.begin(), strides.end());
      auto props = sample_fsm_proposals(dets, g, level_strides, image_size, config.fsm, static_cast<int>(n));
      t.proposals.insert(t.proposals.end(), props.begin(), props.end());
    }
  }
  return t;
}

namespace {

// Rows of the given levels, image-major then level then anchor, matching
// concat over levels of to_anchor_major outputs.
std::vector<std::size_t> rows_of_levels(const PyramidLayout& layout, int batch, const std::vector<int>& levels) {
  std::vector<std::size_t> rows;
  for (int n = 0; n < batch; ++n) {
    for (int l : levels) {
      const std::size_t begin = layout.offset[static_cast<std::size_t>(l)];
      const std::size_t end = begin + layout.levels[static_cast<std::size_t>(l)].size();
      for (std::size_t i = begin; i < end; ++i) rows.push_back(static_cast<std::size_t>(n) * layout.size() + i);
    }
  }
  return rows;
}

template <typename T>
Tensor<T> gather_levels(const std::vector<LevelOutputs<T>>& outputs, const std::vector<int>& levels,
                        Tensor<T> LevelOutputs<T>::*member, int k) {
  std::vector<Tensor<T>> parts;
  for (int l : levels) {
    const Tensor<T>& t = outputs[static_cast<std::size_t>(l)].*member;
    if (!t.defined()) throw std::logic_error("loss: head output missing on level " + std::to_string(l));
    parts.push_back(to_anchor_major(t, k));
  }
  return concat(parts, 1);
}

std::vector<int> all_levels(const PyramidLayout& layout) {
  std::vector<int> v(layout.levels.size());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

template <typename T>
Tensor<T> regression_term(const Tensor<T>& pred, const std::vector<std::size_t>& rows, const std::vector<std::int8_t>& labels,
                          const std::vector<double>& targets, std::int64_t count) {
  std::vector<double> tgt(4 * rows.size());
  std::vector<std::uint8_t> mask(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    mask[r] = labels[rows[r]] == kPositive ? 1 : 0;
    if (mask[r]) std::copy_n(targets.begin() + static_cast<std::ptrdiff_t>(4 * rows[r]), 4, tgt.begin() + static_cast<std::ptrdiff_t>(4 * r));
  }
  return mul_scalar(smooth_l1_sum(pred, tgt, mask), inverse_count<T>(count));
}

template <typename T>
Tensor<T> classification_term(const Tensor<T>& logits, const std::vector<std::size_t>& rows,
                              const std::vector<std::int8_t>& labels, const std::vector<double>* margins,
                              std::int64_t count, const CascadeConfig& config) {
  std::vector<std::int8_t> lab(rows.size());
  std::vector<double> mar;
  for (std::size_t r = 0; r < rows.size(); ++r) lab[r] = labels[rows[r]];
  if (margins) {
    mar.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) mar[r] = (*margins)[rows[r]];
  }
  return mul_scalar(focal_loss_sum(logits, lab, mar, config.focal_gamma, config.focal_balance), inverse_count<T>(count));
}

}  // namespace

template <typename T>
Tensor<T> str_loss(const std::vector<LevelOutputs<T>>& outputs, const PyramidLayout& layout, const TrainTargets& targets,
                   const std::vector<int>& str_levels) {
  const auto str = normalized(str_levels);
  std::vector<Tensor<T>> terms;
  if (!str.empty()) {
    terms.push_back(regression_term(gather_levels(outputs, str, &LevelOutputs<T>::reg1, 4),
                                    rows_of_levels(layout, targets.batch, str), targets.label1, targets.target1,
                                    targets.n_s1));
  }
  const auto all = all_levels(layout);
  terms.push_back(regression_term(gather_levels(outputs, all, &LevelOutputs<T>::reg2, 4),
                                  rows_of_levels(layout, targets.batch, all), targets.label2, targets.target2,
                                  targets.n_s2));
  return terms.size() == 1 ? terms.front() : sum_scalars(terms);
}

template <typename T>
Tensor<T> stc_loss(const std::vector<LevelOutputs<T>>& outputs, const PyramidLayout& layout, const TrainTargets& targets,
                   const CascadeConfig& config) {
  const auto stc = normalized(config.stc_levels);
  std::vector<Tensor<T>> terms;
  if (!stc.empty()) {
    terms.push_back(classification_term(gather_levels(outputs, stc, &LevelOutputs<T>::cls1, 1),
                                        rows_of_levels(layout, targets.batch, stc), targets.label1, nullptr,
                                        targets.n_s3, config));
  }
  const auto all = all_levels(layout);
  terms.push_back(classification_term(gather_levels(outputs, all, &LevelOutputs<T>::cls2, 1),
                                      rows_of_levels(layout, targets.batch, all), targets.label2,
                                      config.sml_enabled ? &targets.margin2 : nullptr, targets.n_s4, config));
  return terms.size() == 1 ? terms.front() : sum_scalars(terms);
}

template <typename T>
Tensor<T> fsm_loss(const Detector<T>& model, const Features<T>& feats, const TrainTargets& targets,
                   const CascadeConfig& config) {
  const Tensor<T> logits = model.fsm_forward(feats.pyramid, targets.proposals);
  std::vector<std::int8_t> labels;
  std::int64_t positives = 0;
  for (const auto& p : targets.proposals) {
    labels.push_back(p.label == 1 ? kPositive : kNegative);
    positives += p.label == 1;
  }
  return mul_scalar(focal_loss_sum(logits, labels, {}, config.focal_gamma, config.focal_balance), inverse_count<T>(positives));
}

template <typename T>
HybridLoss<T> hybrid_loss(const Detector<T>& model, const Features<T>& feats, const std::vector<LevelOutputs<T>>& outputs,
                          const PyramidLayout& layout, const TrainTargets& targets, const CascadeConfig& config) {
  HybridLoss<T> out;
  const Tensor<T> str = str_loss(outputs, layout, targets, config.str_levels);
  const Tensor<T> stc = stc_loss(outputs, layout, targets, config);
  out.total = add(str, stc);
  out.report.str_loss = static_cast<double>(str.item());
  out.report.stc_loss = static_cast<double>(stc.item());
  if (model.config().fsm_enabled && !targets.proposals.empty()) {
    const Tensor<T> fsm = fsm_loss(model, feats, targets, config);
    out.total = add(out.total, fsm);
    out.report.fsm_loss = static_cast<double>(fsm.item());
  }
  out.report.total = static_cast<double>(out.total.item());
  out.report.n_s1 = targets.n_s1;
  out.report.n_s2 = targets.n_s2;
  out.report.n_s3 = targets.n_s3;
  out.report.n_s4 = targets.n_s4;
  return out;
}

template <typename T>
HybridLoss<T> one_step_loss(const std::vector<LevelOutputs<T>>& outputs, const PyramidLayout& layout,
                            const std::vector<std::vector<Box>>& gts, const CascadeConfig& config) {
  const std::size_t m = layout.size();
  const auto batch = static_cast<int>(gts.size());
  std::vector<std::int8_t> labels(m * gts.size(), kIgnore);
  std::vector<double> targets(4 * m * gts.size(), 0.0);
  std::int64_t positives = 0;
  for (std::size_t n = 0; n < gts.size(); ++n) {
    const MatchAssignment a = match(layout.flat, gts[n], config.step2);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = n * m + i;
      if (a.positive(i)) {
        labels[k] = kPositive;
        const Delta d = to_head_units(encode(gts[n][static_cast<std::size_t>(a.labels[i])], layout.flat[i]));
        std::copy(d.begin(), d.end(), targets.begin() + static_cast<std::ptrdiff_t>(4 * k));
        ++positives;
      } else if (a.negative(i)) {
        labels[k] = kNegative;
      }
    }
  }
  const auto all = all_levels(layout);
  const auto rows = rows_of_levels(layout, batch, all);
  const Tensor<T> reg = regression_term(gather_levels(outputs, all, &LevelOutputs<T>::reg2, 4), rows, labels, targets, positives);
  const Tensor<T> cls = classification_term(gather_levels(outputs, all, &LevelOutputs<T>::cls2, 1), rows, labels, nullptr,
                                            positives, config);
  HybridLoss<T> out;
  out.total = add(reg, cls);
  out.report.str_loss = static_cast<double>(reg.item());
  out.report.stc_loss = static_cast<double>(cls.item());
  out.report.total = static_cast<double>(out.total.item());
  out.report.n_s2 = out.report.n_s4 = positives;
  return out;
}

std::vector<Detection> postprocess(const ImagePredictions& preds, const PyramidLayout& layout, const CascadeConfig& config,
                                   int image_size) {
  const auto str = normalized(config.str_levels);
  const auto stc = normalized(config.stc_levels);
  std::vector<Detection> cands;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const int level = layout.level_of[i];
    if (contains(stc, level) && 1.0 - sigmoid(preds.cls1[i]) > config.stc_threshold) continue;
    const Box anchor = contains(str, level) ? decode(from_head_units(preds.reg1[i]), layout.flat[i]) : layout.flat[i];
    const double score = sigmoid(preds.cls2[i]);
    if (score < config.score_threshold) continue;
    const Box box = clip(decode(from_head_units(preds.reg2[i]), anchor), image_size, image_size);
    if (!(box.width() > 0) || !(box.height() > 0)) continue;
    cands.push_back({box, score, level});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (cands.size() > static_cast<std::size_t>(config.pre_nms_top)) cands.resize(static_cast<std::size_t>(config.pre_nms_top));
  return nms(cands, config.nms_overlap, config.max_detections);
}

std::vector<std::vector<Detection>> inference_pipeline(const Detector<float>& model, const Tensor<float>& images,
                                                       const CascadeConfig& config) {
  NoGradGuard no_grad;
  const PyramidLayout layout(model.config().image_size, model.config().strides);
  if (images.rank() != 4 || images.dim(2) != model.config().image_size || images.dim(3) != model.config().image_size) {
    throw std::invalid_argument("inference: images must be [N,3," + std::to_string(model.config().image_size) + "," +
                                std::to_string(model.config().image_size) + "], got " + shape_str(images.shape()));
  }
  const auto feats = model.features(images);
  const auto outputs = model.heads(feats, config.str_levels, config.stc_levels);
  const auto preds = extract_predictions(outputs, layout);
  std::vector<std::vector<Detection>> out;
  for (const auto& p : preds) out.push_back(postprocess(p, layout, config, model.config().image_size));
  return out;
}

#define CASCADET_INSTANTIATE_CASCADE(T)                                                                              \
  template std::vector<ImagePredictions> extract_predictions(const std::vector<LevelOutputs<T>>&, const PyramidLayout&); \
  template Tensor<T> str_loss(const std::vector<LevelOutputs<T>>&, const PyramidLayout&, const TrainTargets&,          \
                              const std::vector<int>&);                                                              \
  template Tensor<T> stc_loss(const std::vector<LevelOutputs<T>>&, const PyramidLayout&, const TrainTargets&,          \
                              const CascadeConfig&);                                                                 \
  template Tensor<T> fsm_loss(const Detector<T>&, const Features<T>&, const TrainTargets&, const CascadeConfig&);     \
  template HybridLoss<T> hybrid_loss(const Detector<T>&, const Features<T>&, const std::vector<LevelOutputs<T>>&,     \
                                     const PyramidLayout&, const TrainTargets&, const CascadeConfig&);               \
  template HybridLoss<T> one_step_loss(const std::vector<LevelOutputs<T>>&, const PyramidLayout&,                    \
                                       const std::vector<std::vector<Box>>&, const CascadeConfig&);

CASCADET_INSTANTIATE_CASCADE(float)
CASCADET_INSTANTIATE_CASCADE(double)

}  // namespace cascadet
