#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "boxseg/graph.hpp"
#include "boxseg/tensor.hpp"

namespace boxseg {

/// Differentiable tensor operations. Every op validates shapes, computes the
/// forward value, and (when the graph is recording and an input participates
/// in differentiation) appends one backward record to the graph.
///
/// Image tensors are CHW; a leading batch axis is accepted where noted.
/// All ops are pure over their inputs and safe to call concurrently on
/// distinct tensors.

/// 2-d convolution. input [N,C_in,H,W] or [C_in,H,W]; kernel
/// [C_out,C_in,KH,KW]. Output spatial dims: floor((H + 2*pad - KH)/stride)+1.
Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernel, int stride,
              int pad);

/// Adjoint of conv2d with the same kernel and geometry. input
/// [N,C_out,H,W] or [C_out,H,W]; kernel [C_out,C_in,KH,KW]; output spatial
/// dims: (H-1)*stride - 2*pad + KH.
Tensor transposed_conv2d(Graph& g, const Tensor& input, const Tensor& kernel,
                         int stride, int pad);

/// Adds bias[c] to every spatial position of channel c. x [*,C,H,W], bias [C].
Tensor add_channel_bias(Graph& g, const Tensor& x, const Tensor& bias);

Tensor relu(Graph& g, const Tensor& x);
Tensor sigmoid(Graph& g, const Tensor& x);
Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
Tensor scale(Graph& g, const Tensor& x, double s);
/// Elementwise max; on ties the gradient is routed to `a`.
Tensor maximum(Graph& g, const Tensor& a, const Tensor& b);

/// Concatenates along the channel axis. Inputs [C1,H,W] and [C2,H,W] (or
/// batched with equal N) with matching spatial dims.
Tensor concat_channels(Graph& g, const Tensor& a, const Tensor& b);

/// Copies channels [c0, c1) of x.
Tensor slice_channels(Graph& g, const Tensor& x, int c0, int c1);

/// Softmax across the channel axis at every spatial position.
Tensor softmax_over_channels(Graph& g, const Tensor& x);

/// Multiplies every channel of x [C,H,W] by mask [1,H,W] (values 0/1).
/// The backward pass is the same masking applied to the output gradient.
Tensor apply_spatial_mask(Graph& g, const Tensor& x, const Tensor& mask);

/// Sum / mean of all elements, accumulated in 64-bit. The result is a {1}
/// tensor whose item_f64() carries the full-precision value.
Tensor sum_all(Graph& g, const Tensor& x);
Tensor mean_all(Graph& g, const Tensor& x);

/// Weighted pixelwise cross-entropy under a per-pixel softmax over channels.
/// logits [C,H,W]; targets and weights are length H*W; pixels with weight 0
/// contribute exactly zero loss and zero gradient. Result is
/// inv_norm * sum_p weights[p] * CE(p), accumulated in 64-bit.
Tensor softmax_cross_entropy(Graph& g, const Tensor& logits,
                             std::vector<std::int32_t> targets,
                             std::vector<float> weights, double inv_norm);

/// Weighted smooth-L1: inv_norm * sum_{c,p} weights[p] * f(pred[c,p] -
/// target[c,p]) with f quadratic below beta. pred [C,H,W]; weights length
/// H*W apply to all channels of a pixel.
Tensor smooth_l1(Graph& g, const Tensor& pred, std::vector<float> target,
                 std::vector<float> weights, double inv_norm,
                 double beta = 1.0);

/// Binary cross-entropy on a single logit (numerically stable form).
Tensor sigmoid_ce(Graph& g, const Tensor& logit, double target);

}  // namespace boxseg
