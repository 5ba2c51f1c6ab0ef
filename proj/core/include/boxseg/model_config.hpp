#pragma once

#include <vector>

#include "boxseg/common.hpp"

namespace boxseg {

// Shared architecture and inference settings. The defaults describe the
// full-size model; tests shrink image_size/base_width/scales for speed.
struct ModelConfig {
  int image_size = 64;
  int num_classes = 3;   // foreground classes, labeled 1..num_classes
  int scales = 3;        // pyramid depth m; f_k sits at stride 2^(k+1)
  int base_width = 16;   // channels of f_1; doubles per scale, capped at 4x

  double match_thresh = 0.5;
  int neg_pos_ratio = 3;
  int topk_neg_when_no_pos = 16;
  double smooth_l1_beta = 1.0;

  double score_thresh = 0.5;
  double nms_thresh = 0.45;
  int max_detections = 32;

  // Side of the square default box at scale k, as a fraction of the image.
  double box_scale(int k) const {
    require(k >= 1 && k <= scales, "box_scale: scale ", k, " out of range [1,",
            scales, "]");
    if (scales == 1) return 0.55;
    return 0.3 + 0.5 * static_cast<double>(k - 1) / (scales - 1);
  }

  int channels_at(int k) const {
    require(k >= 1 && k <= scales, "channels_at: scale ", k,
            " out of range [1,", scales, "]");
    return base_width << std::min(k - 1, 2);
  }

  int stride_at(int k) const { return 1 << (k + 1); }

  void validate() const {
    require(num_classes >= 1, "ModelConfig: num_classes must be >= 1, got ",
            num_classes);
    require(scales >= 2, "ModelConfig: scales must be >= 2, got ", scales);
    require(base_width >= 1, "ModelConfig: base_width must be >= 1");
    const int div = 1 << (scales + 1);
    require(image_size % div == 0, "ModelConfig: image_size ", image_size,
            " must be divisible by ", div);
  }
};

}  // namespace boxseg
