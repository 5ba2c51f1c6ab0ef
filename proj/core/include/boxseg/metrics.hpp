#pragma once

#include <cstdint>
#include <vector>

#include "boxseg/pipeline.hpp"

namespace boxseg {

struct MiouResult {
  std::vector<double> per_class;  // index = class id, 0 is background
  std::vector<bool> counted;      // false if absent from both pred and gt
  double mean = 0.0;
};

// Intersection / union aggregated over all images, per class (background
// included). Classes that never occur in either prediction or ground truth
// are skipped when averaging.
MiouResult eval_miou(const std::vector<LabelMap>& pred,
                     const std::vector<LabelMap>& gt, int num_classes);

struct GtInstance {
  int cls = 0;
  std::vector<std::uint8_t> mask;
};

// Mean average precision over classes at the given mask-IoU thresholds.
// Predictions are ranked by score globally per class; each prediction
// greedily claims the best still-unclaimed ground-truth instance of its
// class in its image when the mask IoU clears the threshold. AP uses the
// all-points interpolation of the precision-recall curve.
std::vector<double> eval_map_r(
    const std::vector<std::vector<InstancePrediction>>& preds,
    const std::vector<std::vector<GtInstance>>& gts, int num_classes,
    const std::vector<double>& thresholds);

// IoU between two binary masks of equal size.
double mask_iou(const std::vector<std::uint8_t>& a,
                const std::vector<std::uint8_t>& b);

}  // namespace boxseg
