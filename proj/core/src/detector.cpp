#include "boxseg/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "boxseg/ops.hpp"

namespace boxseg {

namespace {

std::string trunk_name(int layer, const char* leaf) {
  return detail::cat("detector.trunk.", layer, ".", leaf);
}

std::string head_name(int k, const char* leaf) {
  return detail::cat("detector.head.", k, ".", leaf);
}

}  // namespace

void build_detector_params(ParamStore& params, Rng& rng,
                           const ModelConfig& cfg) {
  cfg.validate();
  int in_ch = 3;
  int layer = 1;
  // Each scale contributes two convs; the second one halves resolution
  // (scale 1's first conv also halves, putting f_1 at stride 4). The first
  // scale uses 5x5 kernels: its cells must judge objects comparable in size
  // to their default box, and 3x3 kernels leave the receptive field (15 px
  // at a 64 px input) smaller than that box.
  for (int k = 1; k <= cfg.scales; ++k) {
    const int out_ch = cfg.channels_at(k);
    const int ksize = k == 1 ? 5 : 3;
    for (int i = 0; i < 2; ++i) {
      params.add_trainable(trunk_name(layer, "w"),
                           init_conv_kernel(rng, out_ch, in_ch, ksize));
      params.create(trunk_name(layer, "b"), {out_ch});
      ++layer;
      in_ch = out_ch;
    }
  }
  for (int k = 1; k <= cfg.scales; ++k) {
    const int out_ch = cfg.num_classes + 1 + 4;
    params.add_trainable(head_name(k, "w"),
                         init_conv_kernel(rng, out_ch, cfg.channels_at(k), 3));
    params.create(head_name(k, "b"), {out_ch});
  }
}

FeaturePyramid backbone_forward(Graph& g, const ParamStore& params,
                                const ModelConfig& cfg, const Tensor& image) {
  cfg.validate();
  require(image.defined() && image.rank() == 3 && image.dim(0) == 3,
          "backbone_forward: expected a [3,H,W] image, got shape ",
          image.defined() ? shape_str(image.shape()) : "<undefined>");
  const int div = 1 << (cfg.scales + 1);
  require(image.dim(1) % div == 0 && image.dim(2) % div == 0,
          "backbone_forward: image dims ", image.dim(1), "x", image.dim(2),
          " must be divisible by ", div);

  FeaturePyramid f;
  Tensor x = image;
  int layer = 1;
  for (int k = 1; k <= cfg.scales; ++k) {
    const int inner_stride = k == 1 ? 2 : 1;
    const Tensor w1 = params.at(trunk_name(layer, "w"));
    x = relu(g, add_channel_bias(
                    g, conv2d(g, x, w1, inner_stride, w1.dim(2) / 2),
                    params.at(trunk_name(layer, "b"))));
    ++layer;
    const Tensor w2 = params.at(trunk_name(layer, "w"));
    x = relu(g,
             add_channel_bias(g, conv2d(g, x, w2, 2, w2.dim(2) / 2),
                              params.at(trunk_name(layer, "b"))));
    ++layer;
    f.maps.push_back(x);
  }
  return f;
}

std::vector<Box> build_default_boxes(const ModelConfig& cfg, int h_k, int w_k,
                                     int k) {
  const double side = cfg.box_scale(k);
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(h_k) * w_k);
  for (int y = 0; y < h_k; ++y) {
    for (int x = 0; x < w_k; ++x) {
      const double cx = (x + 0.5) / w_k;
      const double cy = (y + 0.5) / h_k;
      Box b;
      b.x_min = static_cast<float>(std::clamp(cx - side / 2, 0.0, 1.0));
      b.x_max = static_cast<float>(std::clamp(cx + side / 2, 0.0, 1.0));
      b.y_min = static_cast<float>(std::clamp(cy - side / 2, 0.0, 1.0));
      b.y_max = static_cast<float>(std::clamp(cy + side / 2, 0.0, 1.0));
      out.push_back(b);
    }
  }
  return out;
}

std::vector<Box> build_all_default_boxes(const ModelConfig& cfg) {
  std::vector<Box> all;
  for (int k = 1; k <= cfg.scales; ++k) {
    const int n = cfg.image_size / cfg.stride_at(k);
    std::vector<Box> scale_boxes = build_default_boxes(cfg, n, n, k);
    all.insert(all.end(), scale_boxes.begin(), scale_boxes.end());
  }
  return all;
}

RawPredictions head_forward(Graph& g, const ParamStore& params,
                            const ModelConfig& cfg, const FeaturePyramid& f) {
  require(f.scales() == cfg.scales, "head_forward: pyramid has ", f.scales(),
          " scales, config expects ", cfg.scales);
  RawPredictions out;
  for (int k = 1; k <= cfg.scales; ++k) {
    Tensor raw = add_channel_bias(
        g, conv2d(g, f.maps[k - 1], params.at(head_name(k, "w")), 1, 1),
        params.at(head_name(k, "b")));
    out.scores.push_back(slice_channels(g, raw, 0, cfg.num_classes + 1));
    out.offsets.push_back(
        slice_channels(g, raw, cfg.num_classes + 1, cfg.num_classes + 5));
  }
  return out;
}

namespace {

struct CellIndex {
  int scale;   // 0-based
  int offset;  // cell index within the scale (y*w + x)
};

// Background cross-entropy per cell, computed outside the graph; used only to
// pick hard negatives, so gradients never flow through these values.
std::vector<double> background_ce(const RawPredictions& preds, int n_classes) {
  std::vector<double> out;
  for (const Tensor& s : preds.scores) {
    const int c = s.dim(0);
    require(c == n_classes + 1, "detection_loss: score tensor has ", c,
            " channels, expected ", n_classes + 1);
    const long hw = static_cast<long>(s.dim(1)) * s.dim(2);
    const float* d = s.data().data();
    for (long p = 0; p < hw; ++p) {
      double m = d[p];
      for (int ch = 1; ch < c; ++ch)
        m = std::max(m, static_cast<double>(d[ch * hw + p]));
      double sum = 0.0;
      for (int ch = 0; ch < c; ++ch)
        sum += std::exp(static_cast<double>(d[ch * hw + p]) - m);
      out.push_back(m + std::log(sum) - static_cast<double>(d[p]));
    }
  }
  return out;
}

}  // namespace

Tensor detection_loss(Graph& g, const ModelConfig& cfg,
                      const RawPredictions& preds,
                      const std::vector<Box>& gt_boxes,
                      const std::vector<int>& gt_classes) {
  require(gt_boxes.size() == gt_classes.size(), "detection_loss: ",
          gt_boxes.size(), " boxes vs ", gt_classes.size(), " classes");
  for (int c : gt_classes)
    require(c >= 1 && c <= cfg.num_classes, "detection_loss: class ", c,
            " out of range [1,", cfg.num_classes, "]");

  std::vector<Box> defaults;
  std::vector<CellIndex> cells;
  for (int k = 1; k <= cfg.scales; ++k) {
    const Tensor& s = preds.scores[k - 1];
    std::vector<Box> scale_boxes =
        build_default_boxes(cfg, s.dim(1), s.dim(2), k);
    for (std::size_t i = 0; i < scale_boxes.size(); ++i)
      cells.push_back({k - 1, static_cast<int>(i)});
    defaults.insert(defaults.end(), scale_boxes.begin(), scale_boxes.end());
  }

  const MatchResult match = gt_boxes.empty()
                                ? MatchResult{std::vector<int>(defaults.size(), -1),
                                              std::vector<float>(defaults.size(), 0.0f),
                                              std::vector<bool>(defaults.size(), false)}
                                : match_boxes(defaults, gt_boxes,
                                              cfg.match_thresh);

  int n_pos = 0;
  for (int gi : match.gt_index)
    if (gi >= 0) ++n_pos;

  // hard-negative mining: highest background CE first, index breaks ties
  const std::vector<double> bg_ce = background_ce(preds, cfg.num_classes);
  std::vector<int> neg_order;
  for (std::size_t i = 0; i < defaults.size(); ++i)
    if (match.gt_index[i] < 0) neg_order.push_back(static_cast<int>(i));
  std::stable_sort(neg_order.begin(), neg_order.end(),
                   [&](int a, int b) { return bg_ce[a] > bg_ce[b]; });
  const std::size_t n_neg =
      n_pos > 0 ? std::min<std::size_t>(neg_order.size(),
                                        static_cast<std::size_t>(n_pos) *
                                            cfg.neg_pos_ratio)
                : std::min<std::size_t>(neg_order.size(),
                                        cfg.topk_neg_when_no_pos);
  neg_order.resize(n_neg);

  const double norm = n_pos > 0 ? static_cast<double>(n_pos)
                                : std::max<double>(1.0, static_cast<double>(n_neg));

  // per-scale target/weight buffers for the classification term
  std::vector<std::vector<std::int32_t>> cls_targets(cfg.scales);
  std::vector<std::vector<float>> cls_weights(cfg.scales);
  for (int k = 0; k < cfg.scales; ++k) {
    const Tensor& s = preds.scores[k];
    const std::size_t hw = static_cast<std::size_t>(s.dim(1)) * s.dim(2);
    cls_targets[k].assign(hw, 0);
    cls_weights[k].assign(hw, 0.0f);
  }
  for (std::size_t i = 0; i < defaults.size(); ++i) {
    if (match.gt_index[i] < 0) continue;
    const CellIndex c = cells[i];
    cls_targets[c.scale][c.offset] = gt_classes[match.gt_index[i]];
    cls_weights[c.scale][c.offset] = 1.0f;
  }
  for (int i : neg_order) {
    const CellIndex c = cells[i];
    cls_targets[c.scale][c.offset] = 0;
    cls_weights[c.scale][c.offset] = 1.0f;
  }

  Tensor total;
  for (int k = 0; k < cfg.scales; ++k) {
    Tensor term = softmax_cross_entropy(g, preds.scores[k], cls_targets[k],
                                        cls_weights[k], 1.0 / norm);
    total = total.defined() ? add(g, total, term) : term;
  }

  if (n_pos > 0) {
    for (int k = 0; k < cfg.scales; ++k) {
      const Tensor& off = preds.offsets[k];
      require(off.dim(0) == 4, "detection_loss: offset tensor has ",
              off.dim(0), " channels, expected 4");
      const std::size_t hw = static_cast<std::size_t>(off.dim(1)) * off.dim(2);
      std::vector<float> target(4 * hw, 0.0f);
      std::vector<float> weights(hw, 0.0f);
      bool any = false;
      for (std::size_t i = 0; i < defaults.size(); ++i) {
        if (match.gt_index[i] < 0 || cells[i].scale != k) continue;
        const int p = cells[i].offset;
        const std::array<float, 4> t =
            encode_offsets(defaults[i], gt_boxes[match.gt_index[i]]);
        for (int ch = 0; ch < 4; ++ch) target[ch * hw + p] = t[ch];
        weights[p] = 1.0f;
        any = true;
      }
      if (!any) continue;
      Tensor term = smooth_l1(g, off, std::move(target), std::move(weights),
                              1.0 / norm, cfg.smooth_l1_beta);
      total = add(g, total, term);
    }
  }
  return total;
}

DetectOut detect(const ParamStore& params, const ModelConfig& cfg,
                 const Tensor& image, const std::vector<int>* class_order) {
  Graph g = Graph::inference();
  DetectOut out;
  out.pyramid = backbone_forward(g, params, cfg, image);
  RawPredictions preds = head_forward(g, params, cfg, out.pyramid);

  std::vector<Tensor> probs;
  std::vector<std::vector<Box>> defaults(cfg.scales);
  for (int k = 0; k < cfg.scales; ++k) {
    probs.push_back(softmax_over_channels(g, preds.scores[k]));
    defaults[k] =
        build_default_boxes(cfg, preds.scores[k].dim(1),
                            preds.scores[k].dim(2), k + 1);
  }

  std::vector<int> order(cfg.num_classes);
  std::iota(order.begin(), order.end(), 1);
  if (class_order) {
    require(class_order->size() == order.size(),
            "detect: class_order must list every class exactly once");
    order = *class_order;
  }

  struct Candidate {
    Box box;
    float score;
    int global_idx;
  };
  std::vector<Detection> merged;
  std::vector<int> merged_idx;
  for (int cls : order) {
    require(cls >= 1 && cls <= cfg.num_classes, "detect: bad class ", cls,
            " in class_order");
    std::vector<Candidate> cands;
    int base = 0;
    for (int k = 0; k < cfg.scales; ++k) {
      const Tensor& pk = probs[k];
      const long hw = static_cast<long>(pk.dim(1)) * pk.dim(2);
      const float* pd = pk.data().data() + static_cast<long>(cls) * hw;
      const float* od = preds.offsets[k].data().data();
      for (long p = 0; p < hw; ++p) {
        if (!(pd[p] > cfg.score_thresh)) continue;
        const std::array<float, 4> t = {
            od[p], od[hw + p], od[2 * hw + p], od[3 * hw + p]};
        const Box b = decode_offsets(defaults[k][p], t);
        if (b.w() <= 0.0f || b.h() <= 0.0f) continue;
        cands.push_back({b, pd[p], base + static_cast<int>(p)});
      }
      base += static_cast<int>(hw);
    }
    std::vector<Box> boxes;
    std::vector<float> scores;
    for (const Candidate& c : cands) {
      boxes.push_back(c.box);
      scores.push_back(c.score);
    }
    for (int idx : nms(boxes, scores, cfg.nms_thresh)) {
      merged.push_back({cands[idx].box, cls, cands[idx].score});
      merged_idx.push_back(cands[idx].global_idx);
    }
  }

  std::vector<int> rank(merged.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::sort(rank.begin(), rank.end(), [&](int a, int b) {
    if (merged[a].score != merged[b].score)
      return merged[a].score > merged[b].score;
    if (merged[a].cls != merged[b].cls) return merged[a].cls < merged[b].cls;
    return merged_idx[a] < merged_idx[b];
  });
  const std::size_t cap =
      std::min<std::size_t>(rank.size(), cfg.max_detections);
  for (std::size_t i = 0; i < cap; ++i)
    out.detections.push_back(merged[rank[i]]);
  return out;
}

}  // namespace boxseg
