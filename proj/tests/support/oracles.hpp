#pragma once

// Brute-force reference implementations for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "cascadet/box.hpp"
#include "cascadet/cascade.hpp"
#include "cascadet/eval.hpp"
#include "cascadet/ops.hpp"
#include "testing.hpp"

namespace cascadet::testing {

// Repeatedly takes the best remaining candidate and strikes out everything
// it overlaps too much.
inline std::vector<std::size_t> nms_oracle(const std::vector<Detection>& dets, double overlap, int max_keep) {
  std::vector<bool> alive(dets.size(), true);
  std::vector<std::size_t> kept;
  while (max_keep < 0 || static_cast<int>(kept.size()) < max_keep) {
    int best = -1;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (alive[i] && (best < 0 || dets[i].score > dets[static_cast<std::size_t>(best)].score)) best = static_cast<int>(i);
    }
    if (best < 0) break;
    const auto b = static_cast<std::size_t>(best);
    kept.push_back(b);
    alive[b] = false;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (alive[i] && iou(dets[i].box, dets[b].box) > overlap) alive[i] = false;
    }
  }
  return kept;
}

// IoU matrix first, thresholds second, forced best anchors last.
inline std::vector<int> match_oracle(const std::vector<Box>& anchors, const std::vector<Box>& gts, MatchThresholds t) {
  const std::size_t a = anchors.size(), g = gts.size();
  std::vector<std::vector<double>> m(a, std::vector<double>(g));
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < g; ++j) m[i][j] = iou(anchors[i], gts[j]);
  std::vector<int> labels(a, -1);
  if (g == 0) return labels;
  for (std::size_t i = 0; i < a; ++i) {
    const auto it = std::max_element(m[i].begin(), m[i].end());
    if (*it >= t.pos) {
      labels[i] = static_cast<int>(it - m[i].begin());
    } else if (*it >= t.neg) {
      labels[i] = -2;
    }
  }
  for (std::size_t j = 0; j < g; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < a; ++i) {
      if (m[i][j] > m[best][j]) best = i;
    }
    if (a > 0 && m[best][j] > 0) labels[best] = static_cast<int>(j);
  }
  return labels;
}

struct Flat {
  std::size_t image;
  std::size_t index;
  double score;
};

// Global descending-score order with (image, index) tie-break.
inline std::vector<Flat> global_order(const DetectionsPerImage& dets) {
  std::vector<Flat> all;
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (std::size_t j = 0; j < dets[i].size(); ++j) all.push_back({i, j, dets[i][j].score});
  std::stable_sort(all.begin(), all.end(), [](const Flat& a, const Flat& b) { return a.score > b.score; });
  return all;
}

// TP flags in global order, each gt claimed by the highest-IoU free detection.
inline std::vector<bool> oracle_tp(const DetectionsPerImage& dets, const BoxesPerImage& gts, double t) {
  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) used[i].assign(gts[i].size(), false);
  std::vector<bool> tp;
  for (const Flat& f : global_order(dets)) {
    const Box& d = dets[f.image][f.index].box;
    double best = -1;
    std::size_t arg = 0;
    for (std::size_t g = 0; g < gts[f.image].size(); ++g) {
      const double o = iou(d, gts[f.image][g]);
      if (!used[f.image][g] && o >= t && o > best) {
        best = o;
        arg = g;
      }
    }
    if (best >= 0) used[f.image][arg] = true;
    tp.push_back(best >= 0);
  }
  return tp;
}

// Interpolated precision at each achieved recall, taken over all prefixes.
inline double oracle_ap(const std::vector<bool>& tp, std::size_t num_gts) {
  if (num_gts == 0) return 0.0;
  std::vector<double> recall, precision;
  double hits = 0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    hits += tp[k] ? 1 : 0;
    recall.push_back(hits / static_cast<double>(num_gts));
    precision.push_back(hits / static_cast<double>(k + 1));
  }
  std::vector<double> levels = recall;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double ap = 0, prev = 0;
  for (double r : levels) {
    if (r <= 0) continue;
    double p = 0;
    for (std::size_t k = 0; k < recall.size(); ++k) {
      if (recall[k] >= r) p = std::max(p, precision[k]);
    }
    ap += (r - prev) * p;
    prev = r;
  }
  return ap;
}

inline std::size_t count_gts(const BoxesPerImage& gts) {
  std::size_t n = 0;
  for (const auto& g : gts) n += g.size();
  return n;
}

// False positives in the shortest score-ordered prefix reaching each recall level.
inline std::vector<std::optional<std::int64_t>> fp_at_recall_oracle(const DetectionsPerImage& dets,
                                                                    const BoxesPerImage& gts) {
  const auto tp = oracle_tp(dets, gts, 0.5);
  const std::size_t n = count_gts(gts);
  std::vector<std::optional<std::int64_t>> out;
  for (int level : kRecallLevels) {
    std::optional<std::int64_t> expect;
    if (n > 0) {
      for (std::size_t len = 0; len <= tp.size() && !expect; ++len) {
        const auto hits = std::count(tp.begin(), tp.begin() + static_cast<std::ptrdiff_t>(len), true);
        if (100 * hits >= level * static_cast<std::int64_t>(n)) expect = static_cast<std::int64_t>(len) - hits;
      }
    }
    out.push_back(expect);
  }
  return out;
}

// Every false positive at IoU 0.5 banded by its best gt overlap.
inline ErrorSplit error_split_oracle(const DetectionsPerImage& dets, const BoxesPerImage& gts) {
  const auto tp = oracle_tp(dets, gts, 0.5);
  const auto order = global_order(dets);
  ErrorSplit out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (tp[k]) continue;
    double best = 0;
    for (const auto& g : gts[order[k].image]) best = std::max(best, iou(dets[order[k].image][order[k].index].box, g));
    if (best >= 0.1 && best < 0.5) {
      ++out.loc;
    } else {
      ++out.cls;
    }
  }
  return out;
}

// Bilinear interpolation written as a sum of tent kernels over grid points.
inline double tent_sample(const std::vector<double>& plane, std::int64_t h, std::int64_t w, double x, double y) {
  double s = 0;
  for (std::int64_t py = 0; py < h; ++py) {
    for (std::int64_t px = 0; px < w; ++px) {
      const double wx = std::max(0.0, 1.0 - std::abs(x - static_cast<double>(px)));
      const double wy = std::max(0.0, 1.0 - std::abs(y - static_cast<double>(py)));
      s += wx * wy * plane[static_cast<std::size_t>(py * w + px)];
    }
  }
  return s;
}

// roi_align output laid out [R,C,bins,bins], one tent sample per bin centre.
inline std::vector<double> roi_align_oracle(const Tensord& f, const std::vector<RoI>& rois, int bins) {
  const auto c = f.dim(1), h = f.dim(2), w = f.dim(3);
  std::vector<double> out;
  for (const RoI& roi : rois) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const auto offset = (static_cast<std::int64_t>(roi.batch) * c + ch) * h * w;
      const std::vector<double> plane(f.data().begin() + offset, f.data().begin() + offset + h * w);
      for (int by = 0; by < bins; ++by) {
        for (int bx = 0; bx < bins; ++bx) {
          const double x = roi.x1 + (bx + 0.5) * (roi.x2 - roi.x1) / bins;
          const double y = roi.y1 + (by + 0.5) * (roi.y2 - roi.y1) / bins;
          out.push_back(tent_sample(plane, h, w, x, y));
        }
      }
    }
  }
  return out;
}

struct EvalInstance {
  DetectionsPerImage dets;
  BoxesPerImage gts;
};

// Small detection sets near the gts plus clutter; sometimes with tied scores.
inline EvalInstance random_eval_instance(std::mt19937_64& gen, int images = 3) {
  EvalInstance in;
  std::uniform_int_distribution<int> ng(0, 4), nd(0, 8);
  std::uniform_real_distribution<double> score(0, 1);
  std::uniform_int_distribution<int> coarse(1, 5);
  const bool tie_scores = score(gen) < 0.3;
  for (int i = 0; i < images; ++i) {
    std::vector<Box> g;
    for (int k = 0, n = ng(gen); k < n; ++k) g.push_back(random_box(gen, 64, 4, 24));
    std::vector<Detection> d;
    for (int k = 0, n = nd(gen); k < n; ++k) {
      const Box b = (!g.empty() && k % 3 != 2) ? jitter_box(gen, g[static_cast<std::size_t>(k) % g.size()], 0.25)
                                               : random_box(gen, 64, 4, 24);
      d.push_back({b, tie_scores ? coarse(gen) / 5.0 : score(gen), 0});
    }
    in.gts.push_back(std::move(g));
    in.dets.push_back(std::move(d));
  }
  return in;
}

}  // namespace cascadet::testing
