#include "boxseg/instance.hpp"

#include <algorithm>
#include <cmath>

#include "boxseg/ops.hpp"

namespace boxseg {

void build_instance_params(ParamStore& params, Rng& rng,
                           const ModelConfig& cfg, const PSConfig& ps) {
  ps.validate();
  const int out_ch = 2 * ps.k * ps.k;
  params.add_trainable("instance.ps.w",
                       init_conv_kernel(rng, out_ch, cfg.base_width, 1));
  params.create("instance.ps.b", {out_ch});
}

Tensor ps_head(Graph& g, const ParamStore& params, const Tensor& top) {
  return add_channel_bias(g, conv2d(g, top, params.at("instance.ps.w"), 1, 0),
                          params.at("instance.ps.b"));
}

AssembledRoi assemble_roi(Graph& g, const Tensor& maps, const Box& box,
                          int k) {
  require(maps.defined() && maps.rank() == 3,
          "assemble_roi: maps must be [2k^2,H,W], got ",
          maps.defined() ? shape_str(maps.shape()) : "<undefined>");
  return assemble_roi_cells(g, maps,
                            box_to_cells(box, maps.dim(1), maps.dim(2)), k);
}

AssembledRoi assemble_roi_cells(Graph& g, const Tensor& maps,
                                const CellRange& roi, int k) {
  require(maps.defined() && maps.rank() == 3 && maps.dim(0) == 2 * k * k,
          "assemble_roi: maps must have ", 2 * k * k, " channels, got shape ",
          maps.defined() ? shape_str(maps.shape()) : "<undefined>");
  const int h = maps.dim(1), w = maps.dim(2);
  require(!roi.empty(), "assemble_roi: ROI spans no pixels");
  require(roi.y_lo >= 0 && roi.x_lo >= 0 && roi.y_hi < h && roi.x_hi < w,
          "assemble_roi: ROI exceeds the ", h, "x", w, " grid");
  const int rh = roi.y_hi - roi.y_lo + 1;
  const int rw = roi.x_hi - roi.x_lo + 1;
  const long hw = static_cast<long>(h) * w;
  const int kk = k * k;

  AssembledRoi out;
  out.roi = roi;
  out.inside = Tensor::zeros({1, rh, rw});
  out.outside = Tensor::zeros({1, rh, rw});
  const float* m = maps.data().data();
  float* in = out.inside.data().data();
  float* os = out.outside.data().data();
  for (int ry = 0; ry < rh; ++ry) {
    const int ci = (k * ry) / rh;
    for (int rx = 0; rx < rw; ++rx) {
      const int cj = (k * rx) / rw;
      const int cell = ci * k + cj;
      const long abs_p = static_cast<long>(roi.y_lo + ry) * w + roi.x_lo + rx;
      in[ry * rw + rx] = m[cell * hw + abs_p];
      os[ry * rw + rx] = m[(kk + cell) * hw + abs_p];
    }
  }

  if (g.recording() && maps.requires_grad()) {
    out.inside.set_requires_grad(true);
    out.outside.set_requires_grad(true);
    Tensor maps_t = maps, in_t = out.inside, out_t = out.outside;
    CellRange r = roi;
    g.record("assemble_roi", [maps_t, in_t, out_t, r, k, kk, h, w, rh, rw,
                              hw]() mutable {
      std::span<float> gm = maps_t.grad();
      std::span<const float> gi = in_t.grad();
      std::span<const float> go = out_t.grad();
      for (int ry = 0; ry < rh; ++ry) {
        const int ci = (k * ry) / rh;
        for (int rx = 0; rx < rw; ++rx) {
          const int cj = (k * rx) / rw;
          const int cell = ci * k + cj;
          const long abs_p = static_cast<long>(r.y_lo + ry) * w + r.x_lo + rx;
          gm[cell * hw + abs_p] += gi[ry * rw + rx];
          gm[(kk + cell) * hw + abs_p] += go[ry * rw + rx];
        }
      }
    });
  }
  return out;
}

Tensor instance_score_logit(Graph& g, const AssembledRoi& roi) {
  return mean_all(g, maximum(g, roi.inside, roi.outside));
}

double instance_score(const AssembledRoi& roi) {
  Graph g = Graph::inference();
  const double logit = instance_score_logit(g, roi).item_f64();
  return 1.0 / (1.0 + std::exp(-logit));
}

std::vector<std::uint8_t> instance_mask(const AssembledRoi& roi, int h,
                                        int w) {
  require(roi.roi.y_hi < h && roi.roi.x_hi < w,
          "instance_mask: ROI exceeds the ", h, "x", w, " grid");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
  const int rh = roi.roi.y_hi - roi.roi.y_lo + 1;
  const int rw = roi.roi.x_hi - roi.roi.x_lo + 1;
  std::span<const float> in = roi.inside.data();
  std::span<const float> os = roi.outside.data();
  for (int ry = 0; ry < rh; ++ry)
    for (int rx = 0; rx < rw; ++rx) {
      if (in[ry * rw + rx] >= os[ry * rw + rx])
        mask[static_cast<std::size_t>(roi.roi.y_lo + ry) * w + roi.roi.x_lo +
             rx] = 1;
    }
  return mask;
}

namespace {

Box clamp_box(double cx, double cy, double w, double h) {
  Box b;
  b.x_min = static_cast<float>(std::clamp(cx - w / 2, 0.0, 1.0));
  b.x_max = static_cast<float>(std::clamp(cx + w / 2, 0.0, 1.0));
  b.y_min = static_cast<float>(std::clamp(cy - h / 2, 0.0, 1.0));
  b.y_max = static_cast<float>(std::clamp(cy + h / 2, 0.0, 1.0));
  return b;
}

}  // namespace

std::vector<InstanceSample> sample_instance_boxes(const std::vector<Box>& gts,
                                                  const PSConfig& cfg,
                                                  Rng& rng) {
  cfg.validate();
  require(!gts.empty(), "sample_instance_boxes: need at least one gt box");
  constexpr int kMaxAttempts = 50;
  std::vector<InstanceSample> out;
  for (std::size_t gi = 0; gi < gts.size(); ++gi) {
    const Box& gt = gts[gi];
    for (int slot = 0; slot < cfg.p; ++slot) {
      for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const double sx = rng.uniform(0.7, 1.3);
        const double sy = rng.uniform(0.7, 1.3);
        const double dx = rng.uniform(-0.2, 0.2) * gt.w();
        const double dy = rng.uniform(-0.2, 0.2) * gt.h();
        const Box cand = clamp_box(gt.cx() + dx, gt.cy() + dy, gt.w() * sx,
                                   gt.h() * sy);
        if (cand.w() <= 0.0f || cand.h() <= 0.0f) continue;
        if (iou(cand, gt) > cfg.match_thresh) {
          out.push_back({cand, 1, static_cast<int>(gi)});
          break;
        }
      }
    }
    for (int slot = 0; slot < cfg.n; ++slot) {
      for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        double x1 = rng.uniform(), x2 = rng.uniform();
        double y1 = rng.uniform(), y2 = rng.uniform();
        if (x2 < x1) std::swap(x1, x2);
        if (y2 < y1) std::swap(y1, y2);
        if (x2 - x1 < 0.05 || y2 - y1 < 0.05) continue;
        Box cand;
        cand.x_min = static_cast<float>(x1);
        cand.x_max = static_cast<float>(x2);
        cand.y_min = static_cast<float>(y1);
        cand.y_max = static_cast<float>(y2);
        bool overlaps = false;
        for (const Box& g2 : gts)
          overlaps = overlaps || iou(cand, g2) > cfg.match_thresh;
        if (!overlaps) {
          out.push_back({cand, 0, -1});
          break;
        }
      }
    }
  }
  return out;
}

Tensor instance_loss(Graph& g, const Tensor& maps,
                     const std::vector<InstanceSample>& samples,
                     const std::vector<std::vector<std::uint8_t>>& gt_masks,
                     int k) {
  require(!samples.empty(), "instance_loss: no samples");
  const int h = maps.dim(1), w = maps.dim(2);

  Tensor score_sum;
  Tensor seg_sum;
  int n_pos = 0;
  for (const InstanceSample& s : samples) {
    const AssembledRoi roi = assemble_roi(g, maps, s.box, k);
    Tensor ce = sigmoid_ce(g, instance_score_logit(g, roi),
                           static_cast<double>(s.label));
    score_sum = score_sum.defined() ? add(g, score_sum, ce) : ce;
    if (s.label != 1) continue;

    require(s.gt_index >= 0 &&
                s.gt_index < static_cast<int>(gt_masks.size()),
            "instance_loss: positive sample references gt ", s.gt_index,
            " but only ", gt_masks.size(), " masks were given");
    const std::vector<std::uint8_t>& gm = gt_masks[s.gt_index];
    require(gm.size() == static_cast<std::size_t>(h) * w,
            "instance_loss: gt mask has ", gm.size(), " pixels, maps expect ",
            h * w);
    const int rh = roi.roi.y_hi - roi.roi.y_lo + 1;
    const int rw = roi.roi.x_hi - roi.roi.x_lo + 1;
    std::vector<std::int32_t> targets(static_cast<std::size_t>(rh) * rw);
    for (int ry = 0; ry < rh; ++ry)
      for (int rx = 0; rx < rw; ++rx)
        targets[ry * rw + rx] =
            gm[static_cast<std::size_t>(roi.roi.y_lo + ry) * w + roi.roi.x_lo +
               rx]
                ? 1
                : 0;
    // channel 0 = outside (background), channel 1 = inside (foreground)
    Tensor logits = concat_channels(g, roi.outside, roi.inside);
    Tensor term = softmax_cross_entropy(
        g, logits, std::move(targets),
        std::vector<float>(static_cast<std::size_t>(rh) * rw, 1.0f),
        1.0 / (static_cast<double>(rh) * rw));
    seg_sum = seg_sum.defined() ? add(g, seg_sum, term) : term;
    ++n_pos;
  }

  Tensor loss = scale(g, score_sum, 1.0 / static_cast<double>(samples.size()));
  if (n_pos > 0)
    loss = add(g, loss, scale(g, seg_sum, 1.0 / static_cast<double>(n_pos)));
  return loss;
}

}  // namespace boxseg
