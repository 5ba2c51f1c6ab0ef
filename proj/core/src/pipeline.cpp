#include "boxseg/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "boxseg/attention.hpp"
#include "boxseg/decoder.hpp"
#include "boxseg/ops.hpp"

namespace boxseg {

LabelMap semantic_infer(const ParamStore& params, const ModelConfig& cfg,
                        const Tensor& image) {
  const int h = image.dim(1), w = image.dim(2);
  LabelMap out;
  out.h = h;
  out.w = w;
  out.data.assign(static_cast<std::size_t>(h) * w, 0);

  const DetectOut det = detect(params, cfg, image);
  std::vector<float> best(static_cast<std::size_t>(h) * w, 0.0f);
  Graph g = Graph::inference();
  for (int l = 1; l <= cfg.num_classes; ++l) {
    const std::vector<Box> boxes = select_class_boxes(det.detections, l);
    if (boxes.empty()) continue;
    const ClassSpecificPyramid fl = attend(g, det.pyramid, boxes, l);
    const Tensor top = decode_top(g, params, cfg, fl);
    const Tensor probs =
        softmax_over_channels(g, semantic_logits(g, params, top));
    require(probs.dim(1) == h && probs.dim(2) == w,
            "semantic_infer: decoder output ", shape_str(probs.shape()),
            " does not match the ", h, "x", w, " image");
    // The class map has support only inside this class's boxes: the head is
    // supervised nowhere else, so its response on zeroed features is not
    // meaningful. Clamp the probability map to the rasterized box union.
    const Tensor support = rasterize_boxes(boxes, h, w);
    const float* keep = support.data().data();
    const float* fg = probs.data().data() + static_cast<long>(h) * w;
    for (long p = 0; p < static_cast<long>(h) * w; ++p) {
      if (keep[p] != 0.0f && fg[p] >= 0.5f && fg[p] > best[p]) {
        best[p] = fg[p];
        out.data[p] = l;
      }
    }
  }
  return out;
}

std::vector<InstancePrediction> instance_infer(const ParamStore& params,
                                               const ModelConfig& cfg,
                                               const PSConfig& ps,
                                               const Tensor& image) {
  const int h = image.dim(1), w = image.dim(2);
  const DetectOut det = detect(params, cfg, image);

  std::vector<InstancePrediction> out;
  Graph g = Graph::inference();
  for (const Detection& d : det.detections) {
    const ClassSpecificPyramid fl = attend(g, det.pyramid, {d.box}, d.cls);
    const Tensor top = decode_top(g, params, cfg, fl);
    const Tensor maps = ps_head(g, params, top);
    require(maps.dim(1) == h && maps.dim(2) == w,
            "instance_infer: score maps ", shape_str(maps.shape()),
            " do not match the ", h, "x", w, " image");
    const AssembledRoi roi = assemble_roi(g, maps, d.box, ps.k);
    InstancePrediction pred;
    pred.box = d.box;
    pred.cls = d.cls;
    pred.score = d.score * static_cast<float>(instance_score(roi));
    pred.mask = instance_mask(roi, h, w);
    out.push_back(std::move(pred));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const InstancePrediction& a, const InstancePrediction& b) {
                     return a.score > b.score;
                   });
  return out;
}

}  // namespace boxseg
