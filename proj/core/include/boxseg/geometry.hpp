#pragma once

#include <array>
#include <vector>

#include "boxseg/common.hpp"

namespace boxseg {

// Axis-aligned box in normalized image coordinates, corners in [0,1].
struct Box {
  float x_min = 0.0f, y_min = 0.0f, x_max = 0.0f, y_max = 0.0f;

  float w() const { return x_max - x_min; }
  float h() const { return y_max - y_min; }
  float cx() const { return 0.5f * (x_min + x_max); }
  float cy() const { return 0.5f * (y_min + y_max); }
  float area() const { return w() > 0.0f && h() > 0.0f ? w() * h() : 0.0f; }

  bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);

// Inclusive cell index range on an h x w grid.
struct CellRange {
  int y_lo = 0, y_hi = -1, x_lo = 0, x_hi = -1;

  bool empty() const { return y_lo > y_hi || x_lo > x_hi; }
  bool operator==(const CellRange&) const = default;
};

// Cells whose area overlaps the box at all: lo = floor(n*min),
// hi = ceil(n*max) - 1, clamped to the grid. A degenerate box falls back to
// the cell containing its center so the result is never empty.
CellRange box_to_cells(const Box& box, int h, int w);

// Greedy non-maximum suppression. Returns kept indices, highest score first;
// score ties break toward the lower index. A candidate is dropped when its
// IoU with any already-kept box exceeds thresh.
std::vector<int> nms(const std::vector<Box>& boxes,
                     const std::vector<float>& scores, double thresh);

struct MatchResult {
  std::vector<int> gt_index;   // per default box: matched gt, or -1
  std::vector<float> gt_iou;   // IoU with that gt (0 when unmatched)
  std::vector<bool> forced;    // true when assigned by the per-gt best pass
};

// Two-pass assignment: every default box takes its best gt when IoU > thresh,
// then every gt claims its single best default box outright so no gt is left
// without a positive. Ties break toward the lower index in both passes.
MatchResult match_boxes(const std::vector<Box>& defaults,
                        const std::vector<Box>& gts, double thresh);

// SSD-style box regression targets:
// (dcx/dw, dcy/dh, log(gw/dw), log(gh/dh)). Computed in double.
std::array<float, 4> encode_offsets(const Box& default_box, const Box& gt);

// Inverse of encode_offsets; the decoded box is clamped to [0,1].
Box decode_offsets(const Box& default_box, const std::array<float, 4>& t);

}  // namespace boxseg
