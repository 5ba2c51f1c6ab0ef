#pragma once

#include <vector>

#include "boxseg/attention.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/graph.hpp"
#include "boxseg/model_config.hpp"
#include "boxseg/param_store.hpp"

namespace boxseg {

// Registers the top-down merge stack under "decoder.": per merge stage a x2
// transposed conv (channel-matched to the skip scale) and a post-concat 3x3
// conv, then two more x2 transposed convs up to image resolution. When
// with_semantic_head, also the 1x1 two-channel foreground/background head.
// One decoder serves every class; nothing here is class-indexed.
void build_decoder_params(ParamStore& params, Rng& rng, const ModelConfig& cfg,
                          bool with_semantic_head);

// f_m^l .. f_1^l -> full-resolution features [base_width, H, W].
Tensor decode_top(Graph& g, const ParamStore& params, const ModelConfig& cfg,
                  const ClassSpecificPyramid& fl);

// 1x1 head: [2,H,W] logits, channel 0 background, channel 1 foreground.
Tensor semantic_logits(Graph& g, const ParamStore& params, const Tensor& top);

// Mean two-way cross-entropy over pixels inside the union of the rasterized
// boxes; pixels outside contribute exactly zero loss and zero gradient.
// gt_mask is row-major H*W with values 0/1 (class-l foreground).
Tensor semantic_loss(Graph& g, const Tensor& logits,
                     const std::vector<std::uint8_t>& gt_mask,
                     const std::vector<Box>& boxes);

}  // namespace boxseg
