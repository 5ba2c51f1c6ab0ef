#include "boxseg/attention.hpp"

#include "boxseg/ops.hpp"

namespace boxseg {

std::vector<Box> select_class_boxes(const std::vector<Detection>& dets,
                                    int label) {
  std::vector<Box> out;
  for (const Detection& d : dets)
    if (d.cls == label) out.push_back(d.box);
  return out;
}

Tensor rasterize_boxes(const std::vector<Box>& boxes, int h, int w) {
  Tensor mask = Tensor::zeros({1, h, w});
  std::span<float> m = mask.data();
  for (const Box& b : boxes) {
    const CellRange r = box_to_cells(b, h, w);
    for (int y = r.y_lo; y <= r.y_hi; ++y)
      for (int x = r.x_lo; x <= r.x_hi; ++x) m[y * w + x] = 1.0f;
  }
  return mask;
}

ClassSpecificPyramid attend(Graph& g, const FeaturePyramid& f,
                            const std::vector<Box>& class_boxes, int label) {
  ClassSpecificPyramid out;
  out.label = label;
  for (const Tensor& fk : f.maps) {
    require(fk.rank() == 3, "attend: expected [C,H,W] scale, got ",
            shape_str(fk.shape()));
    Tensor mask = rasterize_boxes(class_boxes, fk.dim(1), fk.dim(2));
    out.masks.push_back(mask);
    out.maps.push_back(apply_spatial_mask(g, fk, mask));
  }
  return out;
}

std::vector<Tensor> attend_backward(const std::vector<Tensor>& grad_out,
                                    const std::vector<Tensor>& masks) {
  require(grad_out.size() == masks.size(), "attend_backward: ",
          grad_out.size(), " gradients vs ", masks.size(), " masks");
  std::vector<Tensor> out;
  Graph g = Graph::inference();
  for (std::size_t k = 0; k < grad_out.size(); ++k)
    out.push_back(apply_spatial_mask(g, grad_out[k], masks[k]));
  return out;
}

}  // namespace boxseg
