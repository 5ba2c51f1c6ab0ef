#include "boxseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace boxseg {

double iou(const Box& a, const Box& b) {
  const double ix = std::min<double>(a.x_max, b.x_max) -
                    std::max<double>(a.x_min, b.x_min);
  const double iy = std::min<double>(a.y_max, b.y_max) -
                    std::max<double>(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double area_a = (static_cast<double>(a.x_max) - a.x_min) *
                        (static_cast<double>(a.y_max) - a.y_min);
  const double area_b = (static_cast<double>(b.x_max) - b.x_min) *
                        (static_cast<double>(b.y_max) - b.y_min);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

int clamp_cell(int v, int n) { return std::clamp(v, 0, n - 1); }

}  // namespace

CellRange box_to_cells(const Box& box, int h, int w) {
  require(h >= 1 && w >= 1, "box_to_cells: grid must be at least 1x1, got ", h,
          "x", w);
  CellRange r;
  r.x_lo = clamp_cell(static_cast<int>(std::floor(w * static_cast<double>(box.x_min))), w);
  r.x_hi = clamp_cell(static_cast<int>(std::ceil(w * static_cast<double>(box.x_max))) - 1, w);
  r.y_lo = clamp_cell(static_cast<int>(std::floor(h * static_cast<double>(box.y_min))), h);
  r.y_hi = clamp_cell(static_cast<int>(std::ceil(h * static_cast<double>(box.y_max))) - 1, h);
  if (r.x_lo > r.x_hi) {
    r.x_lo = r.x_hi = clamp_cell(
        static_cast<int>(std::floor(w * 0.5 * (box.x_min + box.x_max))), w);
  }
  if (r.y_lo > r.y_hi) {
    r.y_lo = r.y_hi = clamp_cell(
        static_cast<int>(std::floor(h * 0.5 * (box.y_min + box.y_max))), h);
  }
  return r;
}

std::vector<int> nms(const std::vector<Box>& boxes,
                     const std::vector<float>& scores, double thresh) {
  require(boxes.size() == scores.size(), "nms: ", boxes.size(), " boxes vs ",
          scores.size(), " scores");
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[a] > scores[b];
  });
  std::vector<int> keep;
  std::vector<bool> dead(boxes.size(), false);
  for (int i : order) {
    if (dead[i]) continue;
    keep.push_back(i);
    for (int j : order) {
      if (dead[j] || j == i) continue;
      if (iou(boxes[i], boxes[j]) > thresh) dead[j] = true;
    }
  }
  return keep;
}

MatchResult match_boxes(const std::vector<Box>& defaults,
                        const std::vector<Box>& gts, double thresh) {
  MatchResult r;
  r.gt_index.assign(defaults.size(), -1);
  r.gt_iou.assign(defaults.size(), 0.0f);
  r.forced.assign(defaults.size(), false);

  for (std::size_t d = 0; d < defaults.size(); ++d) {
    double best = 0.0;
    int best_g = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(defaults[d], gts[g]);
      if (v > best) {
        best = v;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0 && best > thresh) {
      r.gt_index[d] = best_g;
      r.gt_iou[d] = static_cast<float>(best);
    }
  }

  for (std::size_t g = 0; g < gts.size(); ++g) {
    double best = -1.0;
    int best_d = -1;
    for (std::size_t d = 0; d < defaults.size(); ++d) {
      const double v = iou(defaults[d], gts[g]);
      if (v > best) {
        best = v;
        best_d = static_cast<int>(d);
      }
    }
    if (best_d >= 0) {
      r.gt_index[best_d] = static_cast<int>(g);
      r.gt_iou[best_d] = static_cast<float>(std::max(best, 0.0));
      r.forced[best_d] = true;
    }
  }
  return r;
}

std::array<float, 4> encode_offsets(const Box& default_box, const Box& gt) {
  const double dw = default_box.w(), dh = default_box.h();
  const double gw = gt.w(), gh = gt.h();
  require(dw > 0.0 && dh > 0.0, "encode_offsets: degenerate default box");
  require(gw > 0.0 && gh > 0.0, "encode_offsets: degenerate ground-truth box");
  return {
      static_cast<float>((gt.cx() - static_cast<double>(default_box.cx())) / dw),
      static_cast<float>((gt.cy() - static_cast<double>(default_box.cy())) / dh),
      static_cast<float>(std::log(gw / dw)),
      static_cast<float>(std::log(gh / dh)),
  };
}

Box decode_offsets(const Box& default_box, const std::array<float, 4>& t) {
  const double dw = default_box.w(), dh = default_box.h();
  require(dw > 0.0 && dh > 0.0, "decode_offsets: degenerate default box");
  const double cx = static_cast<double>(default_box.cx()) + t[0] * dw;
  const double cy = static_cast<double>(default_box.cy()) + t[1] * dh;
  const double w = dw * std::exp(static_cast<double>(t[2]));
  const double h = dh * std::exp(static_cast<double>(t[3]));
  Box b;
  b.x_min = static_cast<float>(std::clamp(cx - 0.5 * w, 0.0, 1.0));
  b.y_min = static_cast<float>(std::clamp(cy - 0.5 * h, 0.0, 1.0));
  b.x_max = static_cast<float>(std::clamp(cx + 0.5 * w, 0.0, 1.0));
  b.y_max = static_cast<float>(std::clamp(cy + 0.5 * h, 0.0, 1.0));
  return b;
}

}  // namespace boxseg
