#pragma once

#include <vector>

#include "boxseg/detector.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/graph.hpp"
#include "boxseg/tensor.hpp"

namespace boxseg {

// Pyramid restricted to one class: each scale keeps its feature vectors only
// on cells covered by at least one class box; everything else is zero.
struct ClassSpecificPyramid {
  std::vector<Tensor> maps;   // same shapes as the source pyramid
  std::vector<Tensor> masks;  // per scale [1,H_k,W_k], values 0 or 1
  int label = 0;
};

std::vector<Box> select_class_boxes(const std::vector<Detection>& dets,
                                    int label);

// 0/1 grid covering the union of box_to_cells(b) over the given boxes.
Tensor rasterize_boxes(const std::vector<Box>& boxes, int h, int w);

// Zero every feature vector outside the union of the rasterized boxes; kept
// cells are bit-identical to the source. Empty box list zeroes everything.
// The masking is recorded on the graph, so backward applies the same mask.
ClassSpecificPyramid attend(Graph& g, const FeaturePyramid& f,
                            const std::vector<Box>& class_boxes, int label);

// Standalone masked backward (grad passes through kept cells, zero
// elsewhere). The graph path in attend() already does this; this entry point
// exists so the rule is testable in isolation.
std::vector<Tensor> attend_backward(const std::vector<Tensor>& grad_out,
                                    const std::vector<Tensor>& masks);

}  // namespace boxseg
