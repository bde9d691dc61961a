#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace cascadet {

// Axis-aligned box in image pixels, corner form.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  // sqrt(w*h), the scale used by the size-dependent margin.
  double scale() const;
  bool valid() const { return x2 >= x1 && y2 >= y1; }

  bool operator==(const Box&) const = default;
};

Box clip(const Box& box, double width, double height);

// Intersection over union; 0 when the union is empty.
double iou(const Box& a, const Box& b);

using Delta = std::array<double, 4>;  // (dx, dy, dw, dh)

// decode() clamps dw and dh to this value (a 62.5x size change).
inline constexpr double kMaxLogScale = 4.135166556742356;  // log(1000 / 16)

// dx = (gx - ax) / aw, dy = (gy - ay) / ah, dw = log(gw / aw), dh = log(gh / ah)
// over box centres and extents. Throws for non-positive extents.
Delta encode(const Box& gt, const Box& anchor);
Box decode(const Delta& delta, const Box& anchor);

struct Detection {
  Box box;
  double score = 0;  // post-sigmoid probability
  int level = 0;
  bool operator==(const Detection&) const = default;
};

// Greedy suppression in descending score order (ties: lower input index
// first). A candidate is dropped when its IoU with a kept box exceeds
// `overlap`. Stops after `max_keep` survivors when max_keep >= 0.
std::vector<Detection> nms(const std::vector<Detection>& dets, double overlap = 0.4, int max_keep = -1);
// Same, returning indices into `dets`.
std::vector<std::size_t> nms_indices(const std::vector<Detection>& dets, double overlap, int max_keep = -1);

// Detection dump: one "image_id x1 y1 x2 y2 score" record per line, reals
// printed with six decimals.
struct DumpRecord {
  int image_id = 0;
  Box box;
  double score = 0;
  bool operator==(const DumpRecord&) const = default;
};

void write_dump(std::ostream& os, const std::vector<DumpRecord>& records);
std::vector<DumpRecord> read_dump(std::istream& is);

// Ground-truth sidecar: "image_id x1 y1 x2 y2" per line.
void write_boxes(std::ostream& os, int image_id, const std::vector<Box>& boxes);

}  // namespace cascadet
