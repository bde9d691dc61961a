#pragma once

// Detection evaluation: greedy score-ordered matching, all-point AP,
// false positives at fixed recall, and LOC/CLS false-positive split.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "cascadet/box.hpp"

namespace cascadet {

using DetectionsPerImage = std::vector<std::vector<Detection>>;
using BoxesPerImage = std::vector<std::vector<Box>>;

struct PrPoint {
  double recall = 0;
  double precision = 0;
  bool operator==(const PrPoint&) const = default;
};

// Ground truths whose scale sqrt(w h) falls outside [lo, hi) are ignored:
// a detection matched to one neither counts as TP nor FP, and unmatched
// detections outside the range are dropped as well.
struct ScaleRange {
  double lo = 0;
  double hi = std::numeric_limits<double>::infinity();
  bool contains(const Box& b) const { return b.scale() >= lo && b.scale() < hi; }
};

// One scored detection after matching, in global evaluation order
// (descending score, ties by image then by index within the image).
struct MatchedDetection {
  std::size_t image = 0;
  std::size_t index = 0;
  double score = 0;
  bool true_positive = false;
  bool ignored = false;
  double best_iou = 0;  // against all gts of the image
};

struct MatchResult {
  std::vector<MatchedDetection> detections;
  std::size_t num_gts = 0;  // not counting ignored ones
};

MatchResult match_detections(const DetectionsPerImage& dets, const BoxesPerImage& gts, double iou_thresh,
                             std::optional<ScaleRange> range = std::nullopt, int threads = 1);

struct ApResult {
  double ap = 0;
  std::vector<PrPoint> pr;  // one point per counted detection
};

// Area under the monotone precision envelope (all-point interpolation).
ApResult average_precision(const MatchResult& matched);
ApResult compute_ap(const DetectionsPerImage& dets, const BoxesPerImage& gts, double iou_thresh,
                    std::optional<ScaleRange> range = std::nullopt);

inline const std::vector<int> kRecallLevels{10, 30, 50, 80, 90, 95};

// FP count within the shortest prefix reaching each recall level (percent);
// nullopt when the level is never reached.
std::vector<std::optional<std::int64_t>> fp_at_recall(const MatchResult& matched, const std::vector<int>& levels = kRecallLevels);
std::vector<std::optional<std::int64_t>> fp_at_recall(const DetectionsPerImage& dets, const BoxesPerImage& gts,
                                                      const std::vector<int>& levels = kRecallLevels);

struct ErrorSplit {
  std::int64_t loc = 0;  // best gt IoU in [0.1, 0.5)
  std::int64_t cls = 0;  // everything else
  bool operator==(const ErrorSplit&) const = default;
};

ErrorSplit error_decompose(const std::vector<double>& fp_best_ious);
ErrorSplit error_decompose(const MatchResult& matched);

// Positives over negatives among kept anchors; +inf without negatives.
// labels use the matcher's convention (>= 0 positive, -1 negative, -2 ignored).
double pos_neg_ratio(const std::vector<int>& labels, const std::vector<std::uint8_t>& keep = {});

inline const std::vector<double> kApThresholds{0.5, 0.6, 0.7, 0.8};

struct EvalReport {
  std::size_t images = 0;
  std::size_t gts = 0;
  std::size_t detections = 0;
  std::vector<PrPoint> pr;               // at IoU 0.5
  std::map<double, double> ap_by_iou;    // keyed by kApThresholds
  double ap_small = 0;                   // IoU 0.5, gts with scale below kSmallObjectScale
  std::map<int, std::optional<std::int64_t>> fp_at_recall;
  ErrorSplit error_split;
  double pos_neg_ratio_before = 0;       // all anchors of the classification step
  double pos_neg_ratio = 0;              // after stc filtering

  bool operator==(const EvalReport&) const = default;
};

// Fills everything except the two anchor ratios.
EvalReport evaluate(const DetectionsPerImage& dets, const BoxesPerImage& gts, int threads = 1);

void write_report(std::ostream& os, const EvalReport& report);
void write_pr_curve(std::ostream& os, const std::vector<PrPoint>& pr);
// One line: "AP@0.5=... AP@0.6=... AP@0.7=... AP@0.8=..."
std::string summary_line(const EvalReport& report);

}  // namespace cascadet
