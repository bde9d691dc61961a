#include "cascadet/box.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cascadet {

double Box::scale() const { return std::sqrt(std::max(0.0, area())); }

Box clip(const Box& box, double width, double height) {
  return {std::clamp(box.x1, 0.0, width), std::clamp(box.y1, 0.0, height), std::clamp(box.x2, 0.0, width),
          std::clamp(box.y2, 0.0, height)};
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Delta encode(const Box& gt, const Box& anchor) {
  if (!(anchor.width() > 0 && anchor.height() > 0)) throw std::invalid_argument("encode: anchor has non-positive extent");
  if (!(gt.width() > 0 && gt.height() > 0)) throw std::invalid_argument("encode: ground truth has non-positive extent");
  return {(gt.cx() - anchor.cx()) / anchor.width(), (gt.cy() - anchor.cy()) / anchor.height(),
          std::log(gt.width() / anchor.width()), std::log(gt.height() / anchor.height())};
}

Box decode(const Delta& delta, const Box& anchor) {
  const double cx = anchor.cx() + delta[0] * anchor.width();
  const double cy = anchor.cy() + delta[1] * anchor.height();
  const double w = anchor.width() * std::exp(std::min(delta[2], kMaxLogScale));
  const double h = anchor.height() * std::exp(std::min(delta[3], kMaxLogScale));
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::vector<std::size_t> nms_indices(const std::vector<Detection>& dets, double overlap, int max_keep) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    if (max_keep >= 0 && kept.size() >= static_cast<std::size_t>(max_keep)) break;
    const Box& cand = dets[idx].box;
    bool keep = true;
    for (std::size_t k : kept) {
      if (iou(cand, dets[k].box) > overlap) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(idx);
  }
  return kept;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double overlap, int max_keep) {
  std::vector<Detection> out;
  for (std::size_t i : nms_indices(dets, overlap, max_keep)) out.push_back(dets[i]);
  return out;
}

void write_dump(std::ostream& os, const std::vector<DumpRecord>& records) {
  os << std::fixed << std::setprecision(6);
  for (const auto& r : records) {
    os << r.image_id << ' ' << r.box.x1 << ' ' << r.box.y1 << ' ' << r.box.x2 << ' ' << r.box.y2 << ' ' << r.score
       << '\n';
  }
}

std::vector<DumpRecord> read_dump(std::istream& is) {
  std::vector<DumpRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    DumpRecord r;
    if (!(ls >> r.image_id >> r.box.x1 >> r.box.y1 >> r.box.x2 >> r.box.y2 >> r.score)) {
      throw std::runtime_error("detection dump line " + std::to_string(line_no) + ": expected 6 fields");
    }
    out.push_back(r);
  }
  return out;
}

void write_boxes(std::ostream& os, int image_id, const std::vector<Box>& boxes) {
  os << std::fixed << std::setprecision(6);
  for (const auto& b : boxes) os << image_id << ' ' << b.x1 << ' ' << b.y1 << ' ' << b.x2 << ' ' << b.y2 << '\n';
}

}  // namespace cascadet
