#include "cascadet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "cascadet/synth.hpp"

namespace cascadet {

namespace {

std::vector<MatchedDetection> match_image(std::size_t image, const std::vector<Detection>& dets, const std::vector<Box>& gts,
                                          double iou_thresh, const std::optional<ScaleRange>& range) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<bool> ignored_gt(gts.size(), false);
  if (range) {
    for (std::size_t g = 0; g < gts.size(); ++g) ignored_gt[g] = !range->contains(gts[g]);
  }
  std::vector<bool> taken(gts.size(), false);
  std::vector<MatchedDetection> out;
  out.reserve(dets.size());
  for (std::size_t i : order) {
    MatchedDetection m;
    m.image = image;
    m.index = i;
    m.score = dets[i].score;
    int best = -1;
    double best_iou = iou_thresh;
    bool hits_ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = iou(dets[i].box, gts[g]);
      m.best_iou = std::max(m.best_iou, o);
      if (ignored_gt[g]) {
        hits_ignored = hits_ignored || o >= iou_thresh;
        continue;
      }
      if (taken[g] || o < best_iou) continue;
      if (best < 0 || o > best_iou) {
        best = static_cast<int>(g);
        best_iou = o;
      }
    }
    if (best >= 0) {
      m.true_positive = true;
      taken[static_cast<std::size_t>(best)] = true;
    } else if (hits_ignored || (range && !range->contains(dets[i].box))) {
      m.ignored = true;
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace

MatchResult match_detections(const DetectionsPerImage& dets, const BoxesPerImage& gts, double iou_thresh,
                             std::optional<ScaleRange> range, int threads) {
  const std::size_t n = std::max(dets.size(), gts.size());
  static const std::vector<Detection> kNoDets;
  static const std::vector<Box> kNoBoxes;
  std::vector<std::vector<MatchedDetection>> per_image(n);
  auto work = [&](std::size_t img) {
    per_image[img] = match_image(img, img < dets.size() ? dets[img] : kNoDets, img < gts.size() ? gts[img] : kNoBoxes,
                                 iou_thresh, range);
  };
  const auto t = static_cast<std::size_t>(std::max(1, threads));
  if (t <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < t; ++k) {
      pool.emplace_back([&, k] {
        for (std::size_t i = k; i < n; i += t) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  MatchResult result;
  for (std::size_t img = 0; img < n && img < gts.size(); ++img) {
    for (const Box& g : gts[img]) result.num_gts += (!range || range->contains(g)) ? 1 : 0;
  }
  for (auto& v : per_image) result.detections.insert(result.detections.end(), v.begin(), v.end());
  std::stable_sort(result.detections.begin(), result.detections.end(),
                   [](const MatchedDetection& a, const MatchedDetection& b) { return a.score > b.score; });
  return result;
}

ApResult average_precision(const MatchResult& matched) {
  ApResult out;
  if (matched.num_gts == 0) {
    return out;
  }
  const double total = static_cast<double>(matched.num_gts);
  std::int64_t tp = 0, seen = 0;
  for (const auto& d : matched.detections) {
    if (d.ignored) continue;
    ++seen;
    tp += d.true_positive ? 1 : 0;
    out.pr.push_back({static_cast<double>(tp) / total, static_cast<double>(tp) / static_cast<double>(seen)});
  }
  std::vector<double> envelope(out.pr.size());
  double running = 0;
  for (std::size_t i = out.pr.size(); i-- > 0;) {
    running = std::max(running, out.pr[i].precision);
    envelope[i] = running;
  }
  double prev_recall = 0;
  for (std::size_t i = 0; i < out.pr.size(); ++i) {
    if (out.pr[i].recall > prev_recall) {
      out.ap += (out.pr[i].recall - prev_recall) * envelope[i];
      prev_recall = out.pr[i].recall;
    }
  }
  return out;
}

ApResult compute_ap(const DetectionsPerImage& dets, const BoxesPerImage& gts, double iou_thresh,
                    std::optional<ScaleRange> range) {
  return average_precision(match_detections(dets, gts, iou_thresh, range));
}

std::vector<std::optional<std::int64_t>> fp_at_recall(const MatchResult& matched, const std::vector<int>& levels) {
  std::vector<std::optional<std::int64_t>> out(levels.size());
  if (matched.num_gts == 0) return out;
  // Smallest TP count reaching each level, in integer arithmetic.
  std::vector<std::int64_t> needed(levels.size());
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto num = static_cast<std::int64_t>(levels[k]) * static_cast<std::int64_t>(matched.num_gts);
    needed[k] = (num + 99) / 100;
  }
  std::int64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (needed[k] == 0) out[k] = 0;
  }
  for (const auto& d : matched.detections) {
    if (d.ignored) continue;
    if (d.true_positive) {
      ++tp;
      for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!out[k] && tp >= needed[k]) out[k] = fp;
      }
    } else {
      ++fp;
    }
  }
  return out;
}

std::vector<std::optional<std::int64_t>> fp_at_recall(const DetectionsPerImage& dets, const BoxesPerImage& gts,
                                                      const std::vector<int>& levels) {
  return fp_at_recall(match_detections(dets, gts, 0.5), levels);
}

ErrorSplit error_decompose(const std::vector<double>& fp_best_ious) {
  ErrorSplit s;
  for (double o : fp_best_ious) {
    if (o >= 0.1 && o < 0.5) {
      ++s.loc;
    } else {
      ++s.cls;
    }
  }
  return s;
}

ErrorSplit error_decompose(const MatchResult& matched) {
  std::vector<double> ious;
  for (const auto& d : matched.detections) {
    if (!d.ignored && !d.true_positive) ious.push_back(d.best_iou);
  }
  return error_decompose(ious);
}

double pos_neg_ratio(const std::vector<int>& labels, const std::vector<std::uint8_t>& keep) {
  if (!keep.empty() && keep.size() != labels.size()) throw std::invalid_argument("pos_neg_ratio: keep mask size mismatch");
  std::int64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!keep.empty() && !keep[i]) continue;
    if (labels[i] >= 0) ++pos;
    if (labels[i] == -1) ++neg;
  }
  if (neg == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(pos) / static_cast<double>(neg);
}

EvalReport evaluate(const DetectionsPerImage& dets, const BoxesPerImage& gts, int threads) {
  EvalReport r;
  r.images = std::max(dets.size(), gts.size());
  for (const auto& g : gts) r.gts += g.size();
  for (const auto& d : dets) r.detections += d.size();
  for (double t : kApThresholds) {
    const MatchResult m = match_detections(dets, gts, t, std::nullopt, threads);
    ApResult ap = average_precision(m);
    r.ap_by_iou[t] = ap.ap;
    if (t == 0.5) {
      r.pr = std::move(ap.pr);
      const auto fps = fp_at_recall(m, kRecallLevels);
      for (std::size_t k = 0; k < kRecallLevels.size(); ++k) r.fp_at_recall[kRecallLevels[k]] = fps[k];
      r.error_split = error_decompose(m);
    }
  }
  r.ap_small = average_precision(match_detections(dets, gts, 0.5, ScaleRange{0, kSmallObjectScale}, threads)).ap;
  return r;
}

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

void write_report(std::ostream& os, const EvalReport& r) {
  os << "# evaluation report\n"
     << "# ap: all-point interpolation (exact area under the precision envelope), greedy matching by descending score\n"
     << "# fp_at_recall: false positives in the shortest prefix reaching the recall level at IoU 0.5\n"
     << "# errors: LOC when the best gt IoU lies in [0.1, 0.5), CLS otherwise\n";
  os << "images=" << r.images << "\n"
     << "gts=" << r.gts << "\n"
     << "detections=" << r.detections << "\n";
  for (const auto& [t, ap] : r.ap_by_iou) os << "ap@" << fmt(t).substr(0, 3) << "=" << fmt(ap) << "\n";
  os << "ap_small@0.5=" << fmt(r.ap_small) << "\n";
  for (const auto& [level, fp] : r.fp_at_recall) {
    os << "fp@recall" << level << "=" << (fp ? std::to_string(*fp) : std::string("unattained")) << "\n";
  }
  os << "loc_errors=" << r.error_split.loc << "\n"
     << "cls_errors=" << r.error_split.cls << "\n"
     << "pos_neg_ratio_before=" << fmt(r.pos_neg_ratio_before) << "\n"
     << "pos_neg_ratio=" << fmt(r.pos_neg_ratio) << "\n";
}

void write_pr_curve(std::ostream& os, const std::vector<PrPoint>& pr) {
  os << "# recall precision\n";
  for (const auto& p : pr) os << fmt(p.recall) << ' ' << fmt(p.precision) << "\n";
}

std::string summary_line(const EvalReport& r) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [t, ap] : r.ap_by_iou) {
    os << (first ? "" : " ") << "AP@" << fmt(t).substr(0, 3) << "=" << fmt(ap);
    first = false;
  }
  return os.str();
}

}  // namespace cascadet
