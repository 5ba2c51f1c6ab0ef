#pragma once

#include <vector>

#include "boxseg/geometry.hpp"
#include "boxseg/graph.hpp"
#include "boxseg/model_config.hpp"
#include "boxseg/param_store.hpp"
#include "boxseg/tensor.hpp"

namespace boxseg {

// Multi-scale features f_1..f_m; resolution halves from one scale to the next.
struct FeaturePyramid {
  std::vector<Tensor> maps;

  int scales() const { return static_cast<int>(maps.size()); }
};

// Per-scale raw detector outputs: class scores [C+1,H_k,W_k] and box offsets
// [4,H_k,W_k], one default box per cell.
struct RawPredictions {
  std::vector<Tensor> scores;
  std::vector<Tensor> offsets;
};

struct Detection {
  Box box;
  int cls = 0;       // 1..C
  float score = 0.0f;
};

// Registers backbone trunk + per-scale head parameters under "detector.".
void build_detector_params(ParamStore& params, Rng& rng,
                           const ModelConfig& cfg);

// Trunk of 3x3 convs: two stride-2 layers reach f_1 at stride 4, then each
// further scale adds a stride-1 width-doubling layer and a stride-2 layer.
FeaturePyramid backbone_forward(Graph& g, const ParamStore& params,
                                const ModelConfig& cfg, const Tensor& image);

// One square default box per cell, centered on the cell, side box_scale(k).
std::vector<Box> build_default_boxes(const ModelConfig& cfg, int h_k, int w_k,
                                     int k);
// All scales concatenated, scale 1 first, row-major within a scale.
std::vector<Box> build_all_default_boxes(const ModelConfig& cfg);

RawPredictions head_forward(Graph& g, const ParamStore& params,
                            const ModelConfig& cfg, const FeaturePyramid& f);

// Hard-mined classification loss (negatives at neg_pos_ratio:1) plus
// smooth-L1 offset regression on positives, both normalized by the positive
// count. With no positives, classification runs on the top-k negatives alone.
Tensor detection_loss(Graph& g, const ModelConfig& cfg,
                      const RawPredictions& preds,
                      const std::vector<Box>& gt_boxes,
                      const std::vector<int>& gt_classes);

struct DetectOut {
  std::vector<Detection> detections;
  FeaturePyramid pyramid;  // reusable by the segmentation branches
};

// Decode + threshold + per-class NMS + global cap. Detections are sorted by
// descending score (ties: class, then default-box index). class_order, when
// given, permutes per-class processing; the result set must not depend on it.
DetectOut detect(const ParamStore& params, const ModelConfig& cfg,
                 const Tensor& image,
                 const std::vector<int>* class_order = nullptr);

}  // namespace boxseg
