#pragma once

#include <cstdint>
#include <vector>

#include "boxseg/detector.hpp"
#include "boxseg/instance.hpp"
#include "boxseg/model_config.hpp"
#include "boxseg/param_store.hpp"

namespace boxseg {

// Per-pixel class labels, 0 = background, 1..C = foreground classes.
struct LabelMap {
  int h = 0, w = 0;
  std::vector<std::int32_t> data;

  std::int32_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

struct InstancePrediction {
  Box box;
  int cls = 0;
  float score = 0.0f;               // detection score x instance score
  std::vector<std::uint8_t> mask;   // full-image binary mask
};

// detect -> per detected class: attend on that class's boxes, decode, take
// the foreground softmax. A pixel gets the class with the highest foreground
// probability if that probability reaches 0.5, else background. Ties keep
// the lower class id.
LabelMap semantic_infer(const ParamStore& params, const ModelConfig& cfg,
                        const Tensor& image);

// detect -> per detected box: attend on that single box, decode, run the
// position-sensitive head, assemble its ROI. Score is detection score times
// instance score; results are sorted by that score, descending.
std::vector<InstancePrediction> instance_infer(const ParamStore& params,
                                               const ModelConfig& cfg,
                                               const PSConfig& ps,
                                               const Tensor& image);

}  // namespace boxseg
