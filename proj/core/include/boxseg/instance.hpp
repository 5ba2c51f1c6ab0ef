#pragma once

#include <cstdint>
#include <vector>

#include "boxseg/geometry.hpp"
#include "boxseg/graph.hpp"
#include "boxseg/model_config.hpp"
#include "boxseg/param_store.hpp"
#include "boxseg/rng.hpp"

namespace boxseg {

struct PSConfig {
  int k = 7;                  // relative-position grid size
  int p = 2;                  // positives sampled per gt box
  int n = 4;                  // negatives sampled per gt box
  double match_thresh = 0.5;  // Jaccard overlap for positive/negative labels

  void validate() const {
    require(k >= 1 && p >= 1 && n >= 1,
            "PSConfig: k, p, n must all be >= 1 (k=", k, " p=", p, " n=", n,
            ")");
  }
};

// 1x1 conv head "instance.ps" from decoder top features to exactly 2*k*k
// score maps: channels [0,k*k) are inside scores for cell (i,j) at index
// i*k+j, channels [k*k,2*k*k) the matching outside scores.
void build_instance_params(ParamStore& params, Rng& rng,
                           const ModelConfig& cfg, const PSConfig& ps);

Tensor ps_head(Graph& g, const ParamStore& params, const Tensor& top);

// Per-ROI inside/outside maps gathered from the score maps: pixel at
// ROI-relative (y,x) in an (h,w) ROI copies the channels of cell
// (floor(k*y/h), floor(k*x/w)) at its absolute position. Pure gather, no
// arithmetic; backward scatter-adds along the same indices.
struct AssembledRoi {
  Tensor inside;   // [1,roi_h,roi_w]
  Tensor outside;  // [1,roi_h,roi_w]
  CellRange roi;   // absolute pixel rectangle on the map grid
};

AssembledRoi assemble_roi(Graph& g, const Tensor& maps, const Box& box, int k);
AssembledRoi assemble_roi_cells(Graph& g, const Tensor& maps,
                                const CellRange& roi, int k);

// Pooled pre-sigmoid score: mean over ROI pixels of max(inside, outside).
Tensor instance_score_logit(Graph& g, const AssembledRoi& roi);
// sigmoid(instance_score_logit), as a plain number.
double instance_score(const AssembledRoi& roi);

// Binary foreground mask on the full h x w grid: foreground where
// exp(inside)/(exp(inside)+exp(outside)) >= 0.5, i.e. inside >= outside;
// zero everywhere outside the ROI.
std::vector<std::uint8_t> instance_mask(const AssembledRoi& roi, int h, int w);

struct InstanceSample {
  Box box;
  int label = 0;     // 1 positive, 0 negative
  int gt_index = -1; // source gt for positives
};

// Per gt box: up to p positives by jittering the gt (per-axis scale in
// [0.7,1.3], center shift up to +-0.2 of its size), accepted when IoU with
// that gt clears match_thresh; up to n negatives from uniform random boxes
// that overlap no gt above match_thresh. At most 50 attempts per slot;
// exhausted slots are skipped without error.
std::vector<InstanceSample> sample_instance_boxes(const std::vector<Box>& gts,
                                                  const PSConfig& cfg,
                                                  Rng& rng);

// L = mean over all samples of sigmoid-CE(score logit, label)
//   + mean over positives of pixelwise two-way CE between the assembled
//     inside/outside softmax and the matched gt mask, over the sample's ROI.
// gt_masks[i] is the row-major binary mask of gt i on the maps' grid.
// With no positive samples only the score term remains.
Tensor instance_loss(Graph& g, const Tensor& maps,
                     const std::vector<InstanceSample>& samples,
                     const std::vector<std::vector<std::uint8_t>>& gt_masks,
                     int k);

}  // namespace boxseg
