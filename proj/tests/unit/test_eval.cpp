#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "cascadet/eval.hpp"
#include "oracles.hpp"
#include "testing.hpp"

using namespace cascadet;
using namespace cascadet::testing;

TEST(ComputeAp, PerfectDetectionsScoreOne) {
  const BoxesPerImage gts{{{0, 0, 10, 10}, {20, 20, 30, 30}}, {{5, 5, 9, 9}}};
  DetectionsPerImage dets(2);
  for (std::size_t i = 0; i < 2; ++i)
    for (const auto& g : gts[i]) dets[i].push_back({g, 0.9, 0});
  EXPECT_DOUBLE_EQ(compute_ap(dets, gts, 0.5).ap, 1.0);
}

TEST(ComputeAp, NoDetectionsScoreZero) {
  const BoxesPerImage gts{{{0, 0, 10, 10}}};
  EXPECT_EQ(compute_ap(DetectionsPerImage(1), gts, 0.5).ap, 0.0);
}

TEST(ComputeAp, HandCaseFiveDetectionsThreeGts) {
  const BoxesPerImage gts{{{0, 0, 10, 10}, {20, 20, 30, 30}}, {{0, 0, 10, 10}}};
  DetectionsPerImage dets(2);
  dets[0] = {{{0, 0, 10, 10}, 0.9, 0}, {{1, 1, 10, 10}, 0.8, 0}, {{50, 50, 60, 60}, 0.6, 0}, {{20, 20, 30, 30}, 0.5, 0}};
  dets[1] = {{{0, 0, 10, 10}, 0.7, 0}};
  // Prefix precisions 1, 1/2, 2/3, 1/2, 3/5 at recalls 1/3, 1/3, 2/3, 2/3, 1.
  const double expect = (1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0;
  const auto r = compute_ap(dets, gts, 0.5);
  EXPECT_NEAR(r.ap, expect, 1e-12);
  EXPECT_NEAR(r.ap, oracle_ap(oracle_tp(dets, gts, 0.5), 3), 1e-12);
  ASSERT_EQ(r.pr.size(), 5u);
  EXPECT_NEAR(r.pr[1].precision, 0.5, 1e-15);
}

TEST(ComputeAp, MatchesBruteForceOracleOnRandomInstances) {
  std::mt19937_64 gen(61);
  for (int trial = 0; trial < 300; ++trial) {
    const EvalInstance in = random_eval_instance(gen);
    for (double t : {0.5, 0.7}) {
      const auto r = compute_ap(in.dets, in.gts, t);
      EXPECT_NEAR(r.ap, oracle_ap(oracle_tp(in.dets, in.gts, t), count_gts(in.gts)), 1e-12) << "trial " << trial;
      for (std::size_t k = 1; k < r.pr.size(); ++k) EXPECT_GE(r.pr[k].recall, r.pr[k - 1].recall);
      EXPECT_GE(r.ap, 0.0);
      EXPECT_LE(r.ap, 1.0);
    }
  }
}

TEST(ComputeAp, InvariantUnderMonotoneScoreTransform) {
  std::mt19937_64 gen(62);
  for (int trial = 0; trial < 100; ++trial) {
    EvalInstance in = random_eval_instance(gen);
    const double before = compute_ap(in.dets, in.gts, 0.5).ap;
    for (auto& d : in.dets)
      for (auto& x : d) x.score = 2.0 * x.score * x.score * x.score + 0.25;
    EXPECT_EQ(compute_ap(in.dets, in.gts, 0.5).ap, before);
  }
}

TEST(ComputeAp, DuplicatesGiveOneTruePositive) {
  const BoxesPerImage gts{{{0, 0, 10, 10}}};
  DetectionsPerImage dets{{{{0, 0, 10, 10}, 0.9, 0}, {{0, 0, 10, 10}, 0.8, 0}, {{0, 0, 10, 10}, 0.7, 0}}};
  const auto m = match_detections(dets, gts, 0.5);
  int tp = 0;
  for (const auto& d : m.detections) tp += d.true_positive ? 1 : 0;
  EXPECT_EQ(tp, 1);
  EXPECT_TRUE(m.detections[0].true_positive);
}

TEST(ComputeAp, NonIncreasingInIouThreshold) {
  std::mt19937_64 gen(63);
  for (int trial = 0; trial < 100; ++trial) {
    const EvalInstance in = random_eval_instance(gen);
    const EvalReport r = evaluate(in.dets, in.gts);
    double prev = 2.0;
    for (double t : kApThresholds) {
      EXPECT_LE(r.ap_by_iou.at(t), prev + 1e-15);
      prev = r.ap_by_iou.at(t);
    }
  }
}

TEST(ComputeAp, ScaleRangeIgnoresOutOfRangeGroundTruths) {
  const BoxesPerImage gts{{{0, 0, 10, 10}, {30, 30, 70, 70}}};
  // The large object is found first; under a small-only range it is neither TP nor FP.
  DetectionsPerImage dets{{{{30, 30, 70, 70}, 0.9, 0}, {{0, 0, 10, 10}, 0.8, 0}}};
  EXPECT_DOUBLE_EQ(compute_ap(dets, gts, 0.5, ScaleRange{0, 16}).ap, 1.0);
  EXPECT_DOUBLE_EQ(compute_ap(dets, gts, 0.5).ap, 1.0);
  // An unmatched large detection outside the range is dropped too.
  dets[0].insert(dets[0].begin(), {{80, 80, 120, 120}, 0.95, 0});
  EXPECT_DOUBLE_EQ(compute_ap(dets, gts, 0.5, ScaleRange{0, 16}).ap, 1.0);
  EXPECT_LT(compute_ap(dets, gts, 0.5).ap, 1.0);
}

TEST(FpAtRecall, PerfectDetectorHasNoFalsePositives) {
  const BoxesPerImage gts{{{0, 0, 10, 10}, {20, 20, 30, 30}}};
  DetectionsPerImage dets{{{gts[0][0], 0.9, 0}, {gts[0][1], 0.8, 0}, {{50, 50, 60, 60}, 0.1, 0}}};
  for (const auto& v : fp_at_recall(dets, gts)) {
    ASSERT_TRUE(v.has_value());
    EXPECT_EQ(*v, 0);
  }
}

TEST(FpAtRecall, MissingTenPercentLeavesTopLevelUnattained) {
  BoxesPerImage gts(1);
  DetectionsPerImage dets(1);
  for (int i = 0; i < 10; ++i) {
    const Box b{i * 12.0, 0, i * 12.0 + 10, 10};
    gts[0].push_back(b);
    if (i < 9) dets[0].push_back({b, 1.0 - i * 0.05, 0});
  }
  const auto r = fp_at_recall(dets, gts);
  ASSERT_EQ(r.size(), kRecallLevels.size());
  EXPECT_TRUE(r[4].has_value());   // 90%
  EXPECT_FALSE(r[5].has_value());  // 95%
}

TEST(FpAtRecall, MatchesPrefixEnumerationOracle) {
  std::mt19937_64 gen(64);
  for (int trial = 0; trial < 300; ++trial) {
    const EvalInstance in = random_eval_instance(gen);
    EXPECT_EQ(fp_at_recall(in.dets, in.gts), fp_at_recall_oracle(in.dets, in.gts)) << "trial " << trial;
  }
}

TEST(ErrorDecompose, BandBoundaries) {
  EXPECT_EQ(error_decompose(std::vector<double>{0.3}), (ErrorSplit{1, 0}));
  EXPECT_EQ(error_decompose(std::vector<double>{0.0}), (ErrorSplit{0, 1}));
  EXPECT_EQ(error_decompose(std::vector<double>{0.1, 0.5, 0.0999, 0.4999}), (ErrorSplit{2, 2}));
}

TEST(ErrorDecompose, MatchesDirectBandingOracle) {
  std::mt19937_64 gen(65);
  for (int trial = 0; trial < 200; ++trial) {
    const EvalInstance in = random_eval_instance(gen);
    EXPECT_EQ(error_decompose(match_detections(in.dets, in.gts, 0.5)), error_split_oracle(in.dets, in.gts));
  }
}

TEST(PosNegRatio, CountingOracle) {
  std::mt19937_64 gen(66);
  std::uniform_int_distribution<int> lab(-2, 3);
  std::bernoulli_distribution keep_d(0.6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(100);
    std::vector<std::uint8_t> keep(100);
    double pos = 0, neg = 0, pos_all = 0, neg_all = 0;
    for (std::size_t i = 0; i < 100; ++i) {
      labels[i] = lab(gen);
      keep[i] = keep_d(gen) ? 1 : 0;
      pos_all += labels[i] >= 0;
      neg_all += labels[i] == -1;
      if (keep[i]) {
        pos += labels[i] >= 0;
        neg += labels[i] == -1;
      }
    }
    EXPECT_EQ(pos_neg_ratio(labels), neg_all > 0 ? pos_all / neg_all : INFINITY);
    EXPECT_EQ(pos_neg_ratio(labels, keep), neg > 0 ? pos / neg : INFINITY);
  }
}

TEST(PosNegRatio, DroppingOnlyNegativesRaisesTheRatio) {
  const std::vector<int> labels{0, -1, -1, -1, -2, 1};
  const std::vector<std::uint8_t> keep{1, 0, 1, 1, 0, 1};
  EXPECT_GT(pos_neg_ratio(labels, keep), pos_neg_ratio(labels));
  EXPECT_TRUE(std::isinf(pos_neg_ratio({0, 1, -2})));
}

TEST(Report, SerializationIsDocumentedAndStable) {
  std::mt19937_64 gen(67);
  const EvalInstance in = random_eval_instance(gen, 6);
  const EvalReport a = evaluate(in.dets, in.gts);
  const EvalReport b = evaluate(in.dets, in.gts, 4);
  EXPECT_EQ(a, b);
  std::ostringstream sa, sb;
  write_report(sa, a);
  write_report(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str().find("all-point"), std::string::npos);
  EXPECT_NE(sa.str().find("ap@0.8="), std::string::npos);
  EXPECT_NE(sa.str().find("fp@recall95="), std::string::npos);
  EXPECT_EQ(summary_line(a).rfind("AP@0.5=", 0), 0u);
}
