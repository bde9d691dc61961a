#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cascadet/cascade.hpp"
#include "cascadet/ops.hpp"
#include "oracles.hpp"
#include "testing.hpp"

using namespace cascadet;
using cascadet::testing::check_gradients;
using cascadet::testing::jitter_box;
using cascadet::testing::match_oracle;
using cascadet::testing::random_box;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.image_size = 32;
  c.stem_channels = 4;
  c.channels = 4;
  c.fsm_channels = 4;
  c.fsm_bins = 3;
  return c;
}

std::vector<std::vector<Box>> random_gts(std::mt19937_64& gen, int batch, double extent) {
  std::vector<std::vector<Box>> gts(static_cast<std::size_t>(batch));
  std::uniform_int_distribution<int> count(1, 3);
  for (auto& g : gts) {
    const int n = count(gen);
    for (int i = 0; i < n; ++i) g.push_back(random_box(gen, extent, 5, 20));
  }
  return gts;
}

}  // namespace

TEST(CascadeConfig, DefaultsFollowTheReferenceSettings) {
  const CascadeConfig c;
  EXPECT_EQ(c.stc_threshold, 0.99);
  EXPECT_EQ(c.step1, (MatchThresholds{0.3, 0.7}));
  EXPECT_EQ(c.step2, (MatchThresholds{0.4, 0.5}));
  EXPECT_EQ(c.fsm.nms_overlap, 0.7);
  EXPECT_EQ(c.fsm.neg_iou, 0.4);
  EXPECT_EQ(c.fsm.pos_iou, 0.7);
  EXPECT_EQ(c.sml_alpha, 15.0);
  EXPECT_EQ(c.score_threshold, 0.05);
  EXPECT_EQ(c.pre_nms_top, 5000);
  EXPECT_EQ(c.nms_overlap, 0.4);
  EXPECT_EQ(c.max_detections, 750);
}

TEST(CascadeConfig, RejectsMissingLevels) {
  CascadeConfig c;
  c.str_levels = {3};
  EXPECT_THROW(c.validate(3), std::invalid_argument);
  c.str_levels = {};
  c.stc_threshold = 1.0;
  EXPECT_THROW(c.validate(3), std::invalid_argument);
}

TEST(Match, AgreesWithBruteForceOracle) {
  std::mt19937_64 gen(41);
  std::uniform_int_distribution<int> na(0, 40), ng(0, 5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Box> gts;
    for (int j = 0, n = ng(gen); j < n; ++j) gts.push_back(random_box(gen, 48, 4, 20));
    std::vector<Box> anchors;
    for (int i = 0, n = na(gen); i < n; ++i) {
      anchors.push_back(!gts.empty() && i % 2 ? jitter_box(gen, gts[static_cast<std::size_t>(i) % gts.size()], 0.4)
                                              : random_box(gen, 48, 4, 20));
    }
    if (trial % 7 == 0 && !anchors.empty()) anchors.push_back(anchors.front());  // exact tie
    const MatchThresholds t = trial % 2 ? MatchThresholds{0.3, 0.7} : MatchThresholds{0.4, 0.5};
    EXPECT_EQ(match(anchors, gts, t).labels, match_oracle(anchors, gts, t)) << "trial " << trial;
  }
}

TEST(Match, EveryGroundTruthOwnsAnAnchorUnlessALaterOneTookIt) {
  std::mt19937_64 gen(42);
  const PyramidLayout layout(64, {4, 8, 16});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Box> gts;
    for (int j = 0; j < 4; ++j) gts.push_back(random_box(gen, 64, 3, 40));
    const auto m = match(layout.levels, gts, {0.3, 0.7});
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (std::count(m.labels.begin(), m.labels.end(), static_cast<int>(j)) > 0) continue;
      // Its best anchor must now belong to a later ground truth.
      std::size_t best = 0;
      for (std::size_t i = 1; i < layout.size(); ++i) {
        if (iou(layout.flat[i], gts[j]) > iou(layout.flat[best], gts[j])) best = i;
      }
      EXPECT_GT(m.labels[best], static_cast<int>(j));
    }
  }
}

TEST(StcFilter, KeepsAtOrBelowThreshold) {
  const auto keep = stc_filter({0.5, 0.99, 0.9900001, 1.0, 0.0});
  EXPECT_EQ(keep, (std::vector<std::uint8_t>{1, 1, 0, 0, 1}));
}

TEST(StrRefine, DecodesSelectedLevelsOnly) {
  const auto anchors = tile_pyramid(32, {4, 8, 16});
  std::vector<std::vector<Delta>> deltas;
  for (const auto& set : anchors) deltas.emplace_back(set.size(), Delta{0.1, -0.2, 0.3, 0.0});
  const auto refined = str_refine(anchors, deltas, {1, 2});
  EXPECT_EQ(refined[0].boxes, anchors[0].boxes);
  for (std::size_t l = 1; l < 3; ++l) {
    for (std::size_t i = 0; i < anchors[l].size(); ++i) {
      EXPECT_EQ(refined[l].boxes[i], decode(deltas[l][i], anchors[l].boxes[i]));
    }
  }
  // Empty selection is the identity.
  const auto same = str_refine(anchors, deltas, {});
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(same[l].boxes, anchors[l].boxes);
}

TEST(PlanTargets, StructuralInvariants) {
  std::mt19937_64 gen(43);
  const PyramidLayout layout(32, {4, 8, 16});
  CascadeConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    const auto gts = random_gts(gen, 2, 32);
    std::vector<ImagePredictions> preds(2);
    std::normal_distribution<double> logit(-2.0, 3.0), delta(0.0, 0.1);
    for (auto& p : preds) {
      for (std::size_t i = 0; i < layout.size(); ++i) {
        p.cls1.push_back(logit(gen));
        p.cls2.push_back(logit(gen));
        p.reg1.push_back({delta(gen), delta(gen), delta(gen), delta(gen)});
        p.reg2.push_back({delta(gen), delta(gen), delta(gen), delta(gen)});
      }
    }
    const TrainTargets t = plan_targets(layout, preds, gts, cfg, true, 32);
    EXPECT_EQ(t.n_s2, t.n_s4);
    std::int64_t pos2 = 0;
    for (std::size_t k = 0; k < t.keep.size(); ++k) {
      const int level = layout.level_of[k % layout.size()];
      const std::size_t i = k % layout.size();
      const std::size_t n = k / layout.size();
      if (level == 2) EXPECT_EQ(t.keep[k], 1);  // not a filtering level
      if (!t.keep[k]) EXPECT_EQ(t.label2[k], kIgnore);
      if (level == 0) EXPECT_EQ(t.refined[k], layout.flat[i]);  // not a refinement level
      if (level != 0) EXPECT_EQ(t.refined[k], decode(from_head_units(preds[n].reg1[i]), layout.flat[i]));
      if (level == 0 || level == 1) {
        EXPECT_EQ(t.keep[k], 1.0 - 1.0 / (1.0 + std::exp(-preds[n].cls1[i])) <= 0.99 ? 1 : 0);
      }
      if (t.label2[k] == kPositive) {
        ++pos2;
        EXPECT_GT(t.margin2[k], 0.0);
      }
    }
    EXPECT_EQ(pos2, t.n_s2);
    EXPECT_LE(t.pos_after, t.pos_before);
    EXPECT_LE(t.neg_after, t.neg_before);
    // Ground truths lead the FSM proposal list of each image.
    std::size_t first = 0;
    for (int n = 0; n < 2; ++n) {
      for (std::size_t j = 0; j < gts[static_cast<std::size_t>(n)].size(); ++j) {
        ASSERT_LT(first + j, t.proposals.size());
        EXPECT_EQ(t.proposals[first + j].box, gts[static_cast<std::size_t>(n)][j]);
        EXPECT_EQ(t.proposals[first + j].label, 1);
      }
      while (first < t.proposals.size() && t.proposals[first].batch == n) ++first;
    }
  }
}

TEST(PlanTargets, MarginsUseGroundTruthForPositivesAndRefinedAnchorForNegatives) {
  std::mt19937_64 gen(44);
  const PyramidLayout layout(32, {4, 8, 16});
  const auto gts = random_gts(gen, 1, 32);
  std::vector<ImagePredictions> preds(1);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    preds[0].cls1.push_back(0.0);
    preds[0].cls2.push_back(0.0);
    preds[0].reg1.push_back({0.05, 0.0, 0.1, -0.1});
    preds[0].reg2.push_back({0, 0, 0, 0});
  }
  CascadeConfig cfg;
  const TrainTargets t = plan_targets(layout, preds, gts, cfg, false, 32);
  const auto m2 = [&] {
    std::vector<Box> kept;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (t.keep[i]) kept.push_back(t.refined[i]);
    }
    return match(kept, gts[0], cfg.step2);
  }();
  std::size_t r = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (!t.keep[i]) continue;
    const int lab = m2.labels[r++];
    if (lab >= 0) {
      const Box& g = gts[0][static_cast<std::size_t>(lab)];
      EXPECT_DOUBLE_EQ(t.margin2[i], 15.0 / std::sqrt(g.width() * g.height()));
    } else if (lab == -1) {
      EXPECT_DOUBLE_EQ(t.margin2[i], 15.0 / std::sqrt(t.refined[i].width() * t.refined[i].height()));
    } else {
      EXPECT_EQ(t.margin2[i], 0.0);
    }
  }
}

TEST(Selectivity, EmptyLevelSetsReproduceTheSingleStepLossBitForBit) {
  std::mt19937_64 gen(45);
  ModelConfig mc = tiny_model();
  mc.fsm_enabled = false;
  CascadeConfig cfg;
  cfg.str_levels = {};
  cfg.stc_levels = {};
  cfg.sml_enabled = false;
  for (int trial = 0; trial < 5; ++trial) {
    const Detector<double> a(mc, 100 + static_cast<std::uint64_t>(trial));
    const Detector<double> b(mc, 100 + static_cast<std::uint64_t>(trial));
    const auto images = cascadet::testing::random_tensor(gen, {2, 3, 32, 32}, false, 0, 1);
    const auto gts = random_gts(gen, 2, 32);
    const PyramidLayout layout(32, mc.strides);

    const auto fa = a.features(images);
    const auto oa = a.heads(fa, cfg.str_levels, cfg.stc_levels);
    const auto ta = plan_targets(layout, extract_predictions(oa, layout), gts, cfg, false, 32);
    const auto la = hybrid_loss(a, fa, oa, layout, ta, cfg);

    const auto fb = b.features(images);
    const auto ob = b.heads(fb, {}, {});
    const auto lb = one_step_loss(ob, layout, gts, cfg);

    EXPECT_EQ(la.report.total, lb.report.total);
    la.total.backward();
    lb.total.backward();
    for (const auto& name : a.parameter_names()) {
      const auto ga = a.param(name).grad(), gb = b.param(name).grad();
      ASSERT_EQ(ga.size(), gb.size());
      EXPECT_TRUE(std::equal(ga.begin(), ga.end(), gb.begin())) << name;
    }
  }
}

TEST(HybridLoss, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(46);
  const ModelConfig mc = tiny_model();
  CascadeConfig cfg;
  const PyramidLayout layout(32, mc.strides);
  for (int trial = 0; trial < 20; ++trial) {
    const Detector<double> model(mc, 200 + static_cast<std::uint64_t>(trial));
    cascadet::testing::perturb(model.parameters(), gen);
    const auto images = cascadet::testing::random_tensor(gen, {2, 3, 32, 32}, false, 0, 1);
    const auto gts = random_gts(gen, 2, 32);
    TrainTargets targets;
    {
      NoGradGuard no_grad;
      const auto f = model.features(images);
      targets = plan_targets(layout, extract_predictions(model.heads(f, cfg.str_levels, cfg.stc_levels), layout), gts, cfg,
                             true, 32);
    }
    ASSERT_FALSE(targets.proposals.empty());
    auto loss = [&] {
      const auto f = model.features(images);
      return hybrid_loss(model, f, model.heads(f, cfg.str_levels, cfg.stc_levels), layout, targets, cfg).total;
    };
    const auto r = check_gradients(model.parameters(), loss, gen, 2, 1e-6, 1e-3, true);
    EXPECT_LT(r.max_rel_error, 1e-5) << "trial " << trial;
    EXPECT_LE(r.skipped * 10, r.checked) << "trial " << trial;
  }
}

TEST(Postprocess, ScoresThresholdedSortedAndBoxesInsideImage) {
  std::mt19937_64 gen(47);
  const PyramidLayout layout(64, {4, 8, 16});
  CascadeConfig cfg;
  cfg.max_detections = 20;
  std::normal_distribution<double> logit(-1.0, 2.5), delta(0.0, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    ImagePredictions p;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      p.cls1.push_back(logit(gen));
      p.cls2.push_back(logit(gen));
      p.reg1.push_back({delta(gen), delta(gen), delta(gen), delta(gen)});
      p.reg2.push_back({delta(gen), delta(gen), delta(gen), delta(gen)});
    }
    const auto dets = postprocess(p, layout, cfg, 64);
    EXPECT_LE(dets.size(), 20u);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      EXPECT_GE(dets[i].score, 0.05);
      if (i) EXPECT_GE(dets[i - 1].score, dets[i].score);
      EXPECT_GE(dets[i].box.x1, 0.0);
      EXPECT_GE(dets[i].box.y1, 0.0);
      EXPECT_LE(dets[i].box.x2, 64.0);
      EXPECT_LE(dets[i].box.y2, 64.0);
      EXPECT_GT(dets[i].box.area(), 0.0);
      for (std::size_t j = 0; j < i; ++j) EXPECT_LE(iou(dets[i].box, dets[j].box), 0.4);
    }
  }
}
