#include "boxseg/decoder.hpp"

#include "boxseg/ops.hpp"

namespace boxseg {

namespace {

std::string merge_name(int k, const char* part, const char* leaf) {
  return detail::cat("decoder.merge.", k, ".", part, ".", leaf);
}

std::string up_name(int i, const char* leaf) {
  return detail::cat("decoder.up.", i, ".", leaf);
}

Tensor up_block(Graph& g, const ParamStore& params, const Tensor& x,
                const std::string& w, const std::string& b) {
  return relu(g, add_channel_bias(
                     g, transposed_conv2d(g, x, params.at(w), 2, 1),
                     params.at(b)));
}

}  // namespace

void build_decoder_params(ParamStore& params, Rng& rng, const ModelConfig& cfg,
                          bool with_semantic_head) {
  cfg.validate();
  for (int k = cfg.scales - 1; k >= 1; --k) {
    const int from_ch = cfg.channels_at(k + 1);
    const int to_ch = cfg.channels_at(k);
    params.add_trainable(merge_name(k, "up", "w"),
                         init_tconv_kernel(rng, from_ch, to_ch, 4));
    params.create(merge_name(k, "up", "b"), {to_ch});
    params.add_trainable(merge_name(k, "conv", "w"),
                         init_conv_kernel(rng, to_ch, 2 * to_ch, 3));
    params.create(merge_name(k, "conv", "b"), {to_ch});
  }
  const int c1 = cfg.channels_at(1);
  params.add_trainable(up_name(1, "w"),
                       init_tconv_kernel(rng, c1, cfg.base_width, 4));
  params.create(up_name(1, "b"), {cfg.base_width});
  params.add_trainable(up_name(2, "w"),
                       init_tconv_kernel(rng, cfg.base_width, cfg.base_width, 4));
  params.create(up_name(2, "b"), {cfg.base_width});
  if (with_semantic_head) {
    params.add_trainable("decoder.head.w",
                         init_conv_kernel(rng, 2, cfg.base_width, 1));
    params.create("decoder.head.b", {2});
  }
}

Tensor decode_top(Graph& g, const ParamStore& params, const ModelConfig& cfg,
                  const ClassSpecificPyramid& fl) {
  require(static_cast<int>(fl.maps.size()) == cfg.scales,
          "decode_top: pyramid has ", fl.maps.size(), " scales, config expects ",
          cfg.scales);
  Tensor x = fl.maps[cfg.scales - 1];
  for (int k = cfg.scales - 1; k >= 1; --k) {
    Tensor up = up_block(g, params, x, merge_name(k, "up", "w"),
                         merge_name(k, "up", "b"));
    const Tensor& skip = fl.maps[k - 1];
    require(up.shape() == skip.shape(), "decode_top: upsampled scale ",
            shape_str(up.shape()), " does not match skip scale ",
            shape_str(skip.shape()));
    Tensor cat = concat_channels(g, up, skip);
    x = relu(g, add_channel_bias(
                    g, conv2d(g, cat, params.at(merge_name(k, "conv", "w")), 1, 1),
                    params.at(merge_name(k, "conv", "b"))));
  }
  x = up_block(g, params, x, up_name(1, "w"), up_name(1, "b"));
  x = up_block(g, params, x, up_name(2, "w"), up_name(2, "b"));
  return x;
}

Tensor semantic_logits(Graph& g, const ParamStore& params, const Tensor& top) {
  return add_channel_bias(g, conv2d(g, top, params.at("decoder.head.w"), 1, 0),
                          params.at("decoder.head.b"));
}

Tensor semantic_loss(Graph& g, const Tensor& logits,
                     const std::vector<std::uint8_t>& gt_mask,
                     const std::vector<Box>& boxes) {
  require(logits.defined() && logits.rank() == 3 && logits.dim(0) == 2,
          "semantic_loss: logits must be [2,H,W], got ",
          logits.defined() ? shape_str(logits.shape()) : "<undefined>");
  const int h = logits.dim(1), w = logits.dim(2);
  require(gt_mask.size() == static_cast<std::size_t>(h) * w,
          "semantic_loss: mask has ", gt_mask.size(), " pixels, logits expect ",
          h * w);
  require(!boxes.empty(),
          "semantic_loss: empty box set (class absent from image)");

  Tensor region = rasterize_boxes(boxes, h, w);
  std::vector<float> weights(region.data().begin(), region.data().end());
  long counted = 0;
  for (float v : weights) counted += v != 0.0f;
  require(counted > 0, "semantic_loss: box union rasterized to zero pixels");

  std::vector<std::int32_t> targets(gt_mask.size());
  for (std::size_t i = 0; i < gt_mask.size(); ++i)
    targets[i] = gt_mask[i] ? 1 : 0;
  return softmax_cross_entropy(g, logits, std::move(targets),
                               std::move(weights),
                               1.0 / static_cast<double>(counted));
}

}  // namespace boxseg
