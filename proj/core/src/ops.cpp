#include "boxseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gemm.hpp"

namespace boxseg {

namespace {

struct ImageDims {
  int n, c, h, w;
  bool batched;
};

ImageDims image_dims(const Tensor& t, const char* op) {
  require(t.defined(), op, ": undefined input tensor");
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2), false};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), true};
  fail(op, ": expected a CHW or NCHW tensor, got shape ", shape_str(t.shape()));
}

Shape image_shape(const ImageDims& d, int c, int h, int w) {
  if (d.batched) return {d.n, c, h, w};
  return {c, h, w};
}

int ceil_div(int a, int b) {
  // b > 0; works for negative a
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

// col is [C*kh*kw, h_out*w_out]; grid position (oy,ox) reads input pixel
// (oy*stride - pad + ky, ox*stride - pad + kx), zero outside the image.
void im2col(const float* x, int C, int H, int W, int kh, int kw, int stride,
            int pad, int h_out, int w_out, float* col) {
  const long n_out = static_cast<long>(h_out) * w_out;
  long r = 0;
  for (int c = 0; c < C; ++c) {
    const float* xc = x + static_cast<long>(c) * H * W;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx, ++r) {
        float* crow = col + r * n_out;
        const int ox_lo = std::max(0, ceil_div(pad - kx, stride));
        const int ox_hi = std::min(w_out - 1, (W - 1 - kx + pad) / stride);
        for (int oy = 0; oy < h_out; ++oy) {
          const int iy = oy * stride - pad + ky;
          float* dst = crow + static_cast<long>(oy) * w_out;
          if (iy < 0 || iy >= H || ox_lo > ox_hi) {
            std::fill(dst, dst + w_out, 0.0f);
            continue;
          }
          const float* src = xc + static_cast<long>(iy) * W + (kx - pad);
          std::fill(dst, dst + ox_lo, 0.0f);
          if (stride == 1) {
            std::memcpy(dst + ox_lo, src + ox_lo,
                        static_cast<std::size_t>(ox_hi - ox_lo + 1) *
                            sizeof(float));
          } else {
            for (int ox = ox_lo; ox <= ox_hi; ++ox)
              dst[ox] = src[static_cast<long>(ox) * stride];
          }
          std::fill(dst + ox_hi + 1, dst + w_out, 0.0f);
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds col back into the image buffer.
void col2im_acc(const float* col, int C, int H, int W, int kh, int kw,
                int stride, int pad, int h_out, int w_out, float* x) {
  const long n_out = static_cast<long>(h_out) * w_out;
  long r = 0;
  for (int c = 0; c < C; ++c) {
    float* xc = x + static_cast<long>(c) * H * W;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx, ++r) {
        const float* crow = col + r * n_out;
        const int ox_lo = std::max(0, ceil_div(pad - kx, stride));
        const int ox_hi = std::min(w_out - 1, (W - 1 - kx + pad) / stride);
        if (ox_lo > ox_hi) continue;
        for (int oy = 0; oy < h_out; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          const float* srow = crow + static_cast<long>(oy) * w_out;
          float* xrow = xc + static_cast<long>(iy) * W + (kx - pad);
          for (int ox = ox_lo; ox <= ox_hi; ++ox)
            xrow[static_cast<long>(ox) * stride] += srow[ox];
        }
      }
    }
  }
}

bool want_grad(const Graph& g, std::initializer_list<const Tensor*> inputs) {
  if (!g.recording()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), op, ": shape mismatch ",
          shape_str(a.shape()), " vs ", shape_str(b.shape()));
}

}  // namespace

Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernel, int stride,
              int pad) {
  const ImageDims in = image_dims(input, "conv2d");
  require(kernel.defined() && kernel.rank() == 4,
          "conv2d: kernel must be [C_out,C_in,KH,KW], got shape ",
          kernel.defined() ? shape_str(kernel.shape()) : "<undefined>");
  const int c_out = kernel.dim(0), c_in = kernel.dim(1);
  const int kh = kernel.dim(2), kw = kernel.dim(3);
  require(in.c == c_in, "conv2d: input channels ", in.c,
          " do not match kernel input channels ", c_in, " (input ",
          shape_str(input.shape()), ", kernel ", shape_str(kernel.shape()),
          ")");
  require(stride >= 1, "conv2d: stride must be >= 1, got ", stride);
  require(pad >= 0, "conv2d: pad must be >= 0, got ", pad);
  require(in.h + 2 * pad >= kh && in.w + 2 * pad >= kw,
          "conv2d: kernel ", shape_str(kernel.shape()),
          " does not fit padded input ", shape_str(input.shape()), " with pad ",
          pad);
  const int h_out = (in.h + 2 * pad - kh) / stride + 1;
  const int w_out = (in.w + 2 * pad - kw) / stride + 1;
  const long n_out = static_cast<long>(h_out) * w_out;
  const int ckk = c_in * kh * kw;

  Tensor out = Tensor::zeros(image_shape(in, c_out, h_out, w_out));
  {
    std::vector<float> col(static_cast<std::size_t>(ckk) * n_out);
    const float* kmat = kernel.data().data();
    for (int n = 0; n < in.n; ++n) {
      const float* x_n = input.data().data() + static_cast<long>(n) * in.c * in.h * in.w;
      float* y_n = out.data().data() + static_cast<long>(n) * c_out * n_out;
      im2col(x_n, in.c, in.h, in.w, kh, kw, stride, pad, h_out, w_out,
             col.data());
      detail::gemm_nn_acc(c_out, ckk, static_cast<int>(n_out), kmat, col.data(),
                          y_n);
    }
  }

  if (want_grad(g, {&input, &kernel})) {
    out.set_requires_grad(true);
    Tensor in_t = input, k_t = kernel, out_t = out;
    ImageDims d = in;
    g.record("conv2d", [in_t, k_t, out_t, d, c_out, kh, kw, stride, pad, h_out,
                        w_out, ckk, n_out]() mutable {
      std::vector<float> col(static_cast<std::size_t>(ckk) * n_out);
      std::span<const float> gout = out_t.grad();
      for (int n = 0; n < d.n; ++n) {
        const long in_off = static_cast<long>(n) * d.c * d.h * d.w;
        const float* gout_n = gout.data() + static_cast<long>(n) * c_out * n_out;
        if (k_t.requires_grad()) {
          im2col(in_t.data().data() + in_off, d.c, d.h, d.w, kh, kw, stride,
                 pad, h_out, w_out, col.data());
          detail::gemm_nt_acc(c_out, ckk, static_cast<int>(n_out), gout_n,
                              col.data(), k_t.grad().data());
        }
        if (in_t.requires_grad()) {
          std::vector<float> colg(static_cast<std::size_t>(ckk) * n_out, 0.0f);
          detail::gemm_tn_acc(c_out, ckk, static_cast<int>(n_out),
                              k_t.data().data(), gout_n, colg.data());
          col2im_acc(colg.data(), d.c, d.h, d.w, kh, kw, stride, pad, h_out,
                     w_out, in_t.grad().data() + in_off);
        }
      }
    });
  }
  return out;
}

Tensor transposed_conv2d(Graph& g, const Tensor& input, const Tensor& kernel,
                         int stride, int pad) {
  const ImageDims in = image_dims(input, "transposed_conv2d");
  require(kernel.defined() && kernel.rank() == 4,
          "transposed_conv2d: kernel must be [C_in,C_out,KH,KW], got shape ",
          kernel.defined() ? shape_str(kernel.shape()) : "<undefined>");
  const int c_in = kernel.dim(0), c_out = kernel.dim(1);
  const int kh = kernel.dim(2), kw = kernel.dim(3);
  require(in.c == c_in, "transposed_conv2d: input channels ", in.c,
          " do not match kernel leading channels ", c_in, " (input ",
          shape_str(input.shape()), ", kernel ", shape_str(kernel.shape()),
          ")");
  require(stride >= 1, "transposed_conv2d: stride must be >= 1, got ", stride);
  require(pad >= 0, "transposed_conv2d: pad must be >= 0, got ", pad);
  const int h_out = (in.h - 1) * stride - 2 * pad + kh;
  const int w_out = (in.w - 1) * stride - 2 * pad + kw;
  require(h_out >= 1 && w_out >= 1,
          "transposed_conv2d: output dims would be non-positive for input ",
          shape_str(input.shape()), " with stride ", stride, ", pad ", pad,
          ", kernel ", shape_str(kernel.shape()));
  const long n_in = static_cast<long>(in.h) * in.w;
  const int ckk = c_out * kh * kw;

  Tensor out = Tensor::zeros(image_shape(in, c_out, h_out, w_out));
  {
    std::vector<float> col(static_cast<std::size_t>(ckk) * n_in);
    for (int n = 0; n < in.n; ++n) {
      const float* x_n = input.data().data() + static_cast<long>(n) * c_in * n_in;
      float* y_n =
          out.data().data() + static_cast<long>(n) * c_out * h_out * w_out;
      std::fill(col.begin(), col.end(), 0.0f);
      detail::gemm_tn_acc(c_in, ckk, static_cast<int>(n_in),
                          kernel.data().data(), x_n, col.data());
      col2im_acc(col.data(), c_out, h_out, w_out, kh, kw, stride, pad, in.h,
                 in.w, y_n);
    }
  }

  if (want_grad(g, {&input, &kernel})) {
    out.set_requires_grad(true);
    Tensor in_t = input, k_t = kernel, out_t = out;
    ImageDims d = in;
    g.record("transposed_conv2d", [in_t, k_t, out_t, d, c_out, kh, kw, stride,
                                   pad, h_out, w_out, ckk, n_in]() mutable {
      std::vector<float> col(static_cast<std::size_t>(ckk) * n_in);
      std::span<const float> gout = out_t.grad();
      for (int n = 0; n < d.n; ++n) {
        const float* gout_n =
            gout.data() + static_cast<long>(n) * c_out * h_out * w_out;
        const long in_off = static_cast<long>(n) * d.c * n_in;
        im2col(gout_n, c_out, h_out, w_out, kh, kw, stride, pad, d.h, d.w,
               col.data());
        if (in_t.requires_grad()) {
          detail::gemm_nn_acc(d.c, ckk, static_cast<int>(n_in),
                              k_t.data().data(), col.data(),
                              in_t.grad().data() + in_off);
        }
        if (k_t.requires_grad()) {
          detail::gemm_nt_acc(d.c, ckk, static_cast<int>(n_in),
                              in_t.data().data() + in_off, col.data(),
                              k_t.grad().data());
        }
      }
    });
  }
  return out;
}

Tensor add_channel_bias(Graph& g, const Tensor& x, const Tensor& bias) {
  const ImageDims d = image_dims(x, "add_channel_bias");
  require(bias.defined() && bias.rank() == 1 && bias.dim(0) == d.c,
          "add_channel_bias: bias shape ",
          bias.defined() ? shape_str(bias.shape()) : "<undefined>",
          " does not match channel count of ", shape_str(x.shape()));
  Tensor out = Tensor::from_vector(x.shape(),
                                   {x.data().begin(), x.data().end()});
  const long hw = static_cast<long>(d.h) * d.w;
  float* o = out.data().data();
  const float* b = bias.data().data();
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c) {
      float* row = o + (static_cast<long>(n) * d.c + c) * hw;
      const float bc = b[c];
      for (long i = 0; i < hw; ++i) row[i] += bc;
    }

  if (want_grad(g, {&x, &bias})) {
    out.set_requires_grad(true);
    Tensor x_t = x, b_t = bias, out_t = out;
    g.record("add_channel_bias", [x_t, b_t, out_t, d, hw]() mutable {
      std::span<const float> gout = out_t.grad();
      if (x_t.requires_grad()) {
        std::span<float> gx = x_t.grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i];
      }
      if (b_t.requires_grad()) {
        std::span<float> gb = b_t.grad();
        for (int n = 0; n < d.n; ++n)
          for (int c = 0; c < d.c; ++c) {
            const float* row = gout.data() + (static_cast<long>(n) * d.c + c) * hw;
            float acc = 0.0f;
            for (long i = 0; i < hw; ++i) acc += row[i];
            gb[c] += acc;
          }
      }
    });
  }
  return out;
}

Tensor relu(Graph& g, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  std::span<const float> xi = x.data();
  std::span<float> o = out.data();
  for (std::size_t i = 0; i < xi.size(); ++i) o[i] = xi[i] > 0.0f ? xi[i] : 0.0f;
  if (want_grad(g, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    g.record("relu", [x_t, out_t]() mutable {
      std::span<const float> gout = out_t.grad();
      std::span<const float> y = out_t.data();
      std::span<float> gx = x_t.grad();
      for (std::size_t i = 0; i < gx.size(); ++i)
        if (y[i] > 0.0f) gx[i] += gout[i];
    });
  }
  return out;
}

Tensor sigmoid(Graph& g, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  std::span<const float> xi = x.data();
  std::span<float> o = out.data();
  for (std::size_t i = 0; i < xi.size(); ++i)
    o[i] = 1.0f / (1.0f + std::exp(-xi[i]));
  if (x.size() == 1) out.set_precise(1.0 / (1.0 + std::exp(-x.item_f64())));
  if (want_grad(g, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    g.record("sigmoid", [x_t, out_t]() mutable {
      std::span<const float> gout = out_t.grad();
      std::span<const float> y = out_t.data();
      std::span<float> gx = x_t.grad();
      for (std::size_t i = 0; i < gx.size(); ++i)
        gx[i] += gout[i] * y[i] * (1.0f - y[i]);
    });
  }
  return out;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  std::span<const float> ai = a.data(), bi = b.data();
  std::span<float> o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ai[i] + bi[i];
  if (a.size() == 1) out.set_precise(a.item_f64() + b.item_f64());
  if (want_grad(g, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor a_t = a, b_t = b, out_t = out;
    g.record("add", [a_t, b_t, out_t]() mutable {
      std::span<const float> gout = out_t.grad();
      if (a_t.requires_grad()) {
        std::span<float> ga = a_t.grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i];
      }
      if (b_t.requires_grad()) {
        std::span<float> gb = b_t.grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i];
      }
    });
  }
  return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  std::span<const float> ai = a.data(), bi = b.data();
  std::span<float> o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ai[i] * bi[i];
  if (want_grad(g, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor a_t = a, b_t = b, out_t = out;
    g.record("mul", [a_t, b_t, out_t]() mutable {
      std::span<const float> gout = out_t.grad();
      if (a_t.requires_grad()) {
        std::span<float> ga = a_t.grad();
        std::span<const float> bv = b_t.data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * bv[i];
      }
      if (b_t.requires_grad()) {
        std::span<float> gb = b_t.grad();
        std::span<const float> av = a_t.data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i] * av[i];
      }
    });
  }
  return out;
}

Tensor scale(Graph& g, const Tensor& x, double s) {
  Tensor out = Tensor::zeros(x.shape());
  const float sf = static_cast<float>(s);
  std::span<const float> xi = x.data();
  std::span<float> o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xi[i] * sf;
  if (x.size() == 1) out.set_precise(x.item_f64() * s);
  if (want_grad(g, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    g.record("scale", [x_t, out_t, sf]() mutable {
      std::span<const float> gout = out_t.grad();
      std::span<float> gx = x_t.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i] * sf;
    });
  }
  return out;
}

Tensor maximum(Graph& g, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "maximum");
  Tensor out = Tensor::zeros(a.shape());
  std::span<const float> ai = a.data(), bi = b.data();
  std::span<float> o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ai[i] >= bi[i] ? ai[i] : bi[i];
  if (want_grad(g, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor a_t = a, b_t = b, out_t = out;
    g.record("maximum", [a_t, b_t, out_t]() mutable {
      std::span<const float> gout = out_t.grad();
      std::span<const float> av = a_t.data(), bv = b_t.data();
      for (std::size_t i = 0; i < gout.size(); ++i) {
        if (av[i] >= bv[i]) {
          if (a_t.requires_grad()) a_t.grad()[i] += gout[i];
        } else if (b_t.requires_grad()) {
          b_t.grad()[i] += gout[i];
        }
      }
    });
  }
  return out;
}

Tensor concat_channels(Graph& g, const Tensor& a, const Tensor& b) {
  const ImageDims da = image_dims(a, "concat_channels");
  const ImageDims db = image_dims(b, "concat_channels");
  require(da.batched == db.batched && da.n == db.n && da.h == db.h &&
              da.w == db.w,
          "concat_channels: incompatible shapes ", shape_str(a.shape()),
          " vs ", shape_str(b.shape()));
  const long hw = static_cast<long>(da.h) * da.w;
  const int c_out = da.c + db.c;
  Tensor out = Tensor::zeros(image_shape(da, c_out, da.h, da.w));
  float* o = out.data().data();
  for (int n = 0; n < da.n; ++n) {
    std::memcpy(o + static_cast<long>(n) * c_out * hw,
                a.data().data() + static_cast<long>(n) * da.c * hw,
                static_cast<std::size_t>(da.c) * hw * sizeof(float));
    std::memcpy(o + (static_cast<long>(n) * c_out + da.c) * hw,
                b.data().data() + static_cast<long>(n) * db.c * hw,
                static_cast<std::size_t>(db.c) * hw * sizeof(float));
  }
  if (want_grad(g, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor a_t = a, b_t = b, out_t = out;
    g.record("concat_channels", [a_t, b_t, out_t, da, db, hw, c_out]() mutable {
      std::span<const float> gout = out_t.grad();
      for (int n = 0; n < da.n; ++n) {
        if (a_t.requires_grad()) {
          std::span<float> ga = a_t.grad();
          const float* src = gout.data() + static_cast<long>(n) * c_out * hw;
          float* dst = ga.data() + static_cast<long>(n) * da.c * hw;
          for (long i = 0; i < static_cast<long>(da.c) * hw; ++i) dst[i] += src[i];
        }
        if (b_t.requires_grad()) {
          std::span<float> gb = b_t.grad();
          const float* src =
              gout.data() + (static_cast<long>(n) * c_out + da.c) * hw;
          float* dst = gb.data() + static_cast<long>(n) * db.c * hw;
          for (long i = 0; i < static_cast<long>(db.c) * hw; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

Tensor slice_channels(Graph& g, const Tensor& x, int c0, int c1) {
  const ImageDims d = image_dims(x, "slice_channels");
  require(0 <= c0 && c0 < c1 && c1 <= d.c, "slice_channels: range [", c0, ",",
          c1, ") invalid for shape ", shape_str(x.shape()));
  const long hw = static_cast<long>(d.h) * d.w;
  const int cs = c1 - c0;
  Tensor out = Tensor::zeros(image_shape(d, cs, d.h, d.w));
  for (int n = 0; n < d.n; ++n) {
    std::memcpy(out.data().data() + static_cast<long>(n) * cs * hw,
                x.data().data() + (static_cast<long>(n) * d.c + c0) * hw,
                static_cast<std::size_t>(cs) * hw * sizeof(float));
  }
  if (want_grad(g, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    g.record("slice_channels", [x_t, out_t, d, hw, c0, cs]() mutable {
      std::span<const float> gout = out_t.grad();
      std::span<float> gx = x_t.grad();
      for (int n = 0; n < d.n; ++n) {
        const float* src = gout.data() + static_cast<long>(n) * cs * hw;
        float* dst = gx.data() + (static_cast<long>(n) * d.c + c0) * hw;
        for (long i = 0; i < static_cast<long>(cs) * hw; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor softmax_over_channels(Graph& g, const Tensor& x) {
  const ImageDims d = image_dims(x, "softmax_over_channels");
  const long hw = static_cast<long>(d.h) * d.w;
  Tensor out = Tensor::zeros(x.shape());
  const float* xi = x.data().data();
  float* o = out.data().data();
  for (int n = 0; n < d.n; ++n) {
    const float* xb = xi + static_cast<long>(n) * d.c * hw;
    float* ob = o + static_cast<long>(n) * d.c * hw;
    for (long p = 0; p < hw; ++p) {
      float m = xb[p];
      for (int c = 1; c < d.c; ++c) m = std::max(m, xb[c * hw + p]);
      float sum = 0.0f;
      for (int c = 0; c < d.c; ++c) {
        const float e = std::exp(xb[c * hw + p] - m);
        ob[c * hw + p] = e;
        sum += e;
      }
      const float inv = 1.0f / sum;
      for (int c = 0; c < d.c; ++c) ob[c * hw + p] *= inv;
    }
  }
  if (want_grad(g, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    g.record("softmax_over_channels", [x_t, out_t, d, hw]() mutable {
      std::span<const float> gout = out_t.grad();
      std::span<const float> y = out_t.data();
      std::span<float> gx = x_t.grad();
      for (int n = 0; n < d.n; ++n) {
        const long base = static_cast<long>(n) * d.c * hw;
        for (long p = 0; p < hw; ++p) {
          float dot = 0.0f;
          for (int c = 0; c < d.c; ++c) {
            const long i = base + c * hw + p;
            dot += gout[i] * y[i];
          }
          for (int c = 0; c < d.c; ++c) {
            const long i = base + c * hw + p;
            gx[i] += y[i] * (gout[i] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor apply_spatial_mask(Graph& g, const Tensor& x, const Tensor& mask) {
  const ImageDims d = image_dims(x, "apply_spatial_mask");
  require(!d.batched, "apply_spatial_mask: expected CHW input, got ",
          shape_str(x.shape()));
  require(mask.defined() && mask.rank() == 3 && mask.dim(0) == 1 &&
              mask.dim(1) == d.h && mask.dim(2) == d.w,
          "apply_spatial_mask: mask shape ",
          mask.defined() ? shape_str(mask.shape()) : "<undefined>",
          " does not match input ", shape_str(x.shape()));
  const long hw = static_cast<long>(d.h) * d.w;
  Tensor out = Tensor::zeros(x.shape());
  const float* xi = x.data().data();
  const float* m = mask.data().data();
  float* o = out.data().data();
  for (int c = 0; c < d.c; ++c)
    for (long p = 0; p < hw; ++p) o[c * hw + p] = xi[c * hw + p] * m[p];
  if (want_grad(g, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, m_t = mask, out_t = out;
    g.record("apply_spatial_mask", [x_t, m_t, out_t, d, hw]() mutable {
      std::span<const float> gout = out_t.grad();
      std::span<const float> m2 = m_t.data();
      std::span<float> gx = x_t.grad();
      for (int c = 0; c < d.c; ++c)
        for (long p = 0; p < hw; ++p)
          gx[c * hw + p] += gout[c * hw + p] * m2[p];
    });
  }
  return out;
}

namespace {

Tensor reduce_all(Graph& g, const Tensor& x, bool mean, const char* op) {
  double acc = 0.0;
  std::span<const float> xi = x.data();
  for (std::size_t i = 0; i < xi.size(); ++i) acc += xi[i];
  const double denom = mean ? static_cast<double>(x.size()) : 1.0;
  const double value = acc / denom;
  require(std::isfinite(value), op, ": non-finite result");
  Tensor out = Tensor::scalar(static_cast<float>(value));
  out.set_precise(value);
  if (want_grad(g, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    const float w = static_cast<float>(1.0 / denom);
    g.record(op, [x_t, out_t, w]() mutable {
      const float go = out_t.grad()[0] * w;
      std::span<float> gx = x_t.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go;
    });
  }
  return out;
}

}  // namespace

Tensor sum_all(Graph& g, const Tensor& x) {
  return reduce_all(g, x, false, "sum_all");
}

Tensor mean_all(Graph& g, const Tensor& x) {
  return reduce_all(g, x, true, "mean_all");
}

Tensor softmax_cross_entropy(Graph& g, const Tensor& logits,
                             std::vector<std::int32_t> targets,
                             std::vector<float> weights, double inv_norm) {
  require(logits.defined() && logits.rank() == 3,
          "softmax_cross_entropy: logits must be [C,H,W], got shape ",
          logits.defined() ? shape_str(logits.shape()) : "<undefined>");
  const int C = logits.dim(0);
  const long hw = static_cast<long>(logits.dim(1)) * logits.dim(2);
  require(static_cast<long>(targets.size()) == hw &&
              static_cast<long>(weights.size()) == hw,
          "softmax_cross_entropy: targets/weights length must be ", hw,
          ", got ", targets.size(), "/", weights.size());
  const float* l = logits.data().data();
  double acc = 0.0;
  for (long p = 0; p < hw; ++p) {
    const float w = weights[p];
    if (w == 0.0f) continue;
    const std::int32_t t = targets[p];
    require(t >= 0 && t < C, "softmax_cross_entropy: target ", t,
            " out of range [0,", C, ") at pixel ", p);
    double m = l[p];
    for (int c = 1; c < C; ++c) m = std::max(m, static_cast<double>(l[c * hw + p]));
    double sum = 0.0;
    for (int c = 0; c < C; ++c) sum += std::exp(static_cast<double>(l[c * hw + p]) - m);
    const double ce = m + std::log(sum) - static_cast<double>(l[t * hw + p]);
    acc += static_cast<double>(w) * ce;
  }
  const double value = acc * inv_norm;
  require(std::isfinite(value), "softmax_cross_entropy: non-finite loss");
  Tensor out = Tensor::scalar(static_cast<float>(value));
  out.set_precise(value);
  if (want_grad(g, {&logits})) {
    out.set_requires_grad(true);
    Tensor l_t = logits, out_t = out;
    g.record("softmax_cross_entropy",
             [l_t, out_t, targets = std::move(targets),
              weights = std::move(weights), inv_norm, C, hw]() mutable {
               const float go = out_t.grad()[0] * static_cast<float>(inv_norm);
               const float* lv = l_t.data().data();
               std::span<float> gl = l_t.grad();
               for (long p = 0; p < hw; ++p) {
                 const float w = weights[p];
                 if (w == 0.0f) continue;
                 float m = lv[p];
                 for (int c = 1; c < C; ++c) m = std::max(m, lv[c * hw + p]);
                 float sum = 0.0f;
                 for (int c = 0; c < C; ++c) sum += std::exp(lv[c * hw + p] - m);
                 const float inv = 1.0f / sum;
                 for (int c = 0; c < C; ++c) {
                   const float soft = std::exp(lv[c * hw + p] - m) * inv;
                   const float ind = (c == targets[p]) ? 1.0f : 0.0f;
                   gl[c * hw + p] += go * w * (soft - ind);
                 }
               }
             });
  }
  return out;
}

Tensor smooth_l1(Graph& g, const Tensor& pred, std::vector<float> target,
                 std::vector<float> weights, double inv_norm, double beta) {
  require(pred.defined() && pred.rank() == 3,
          "smooth_l1: pred must be [C,H,W], got shape ",
          pred.defined() ? shape_str(pred.shape()) : "<undefined>");
  require(beta > 0.0, "smooth_l1: beta must be positive, got ", beta);
  const int C = pred.dim(0);
  const long hw = static_cast<long>(pred.dim(1)) * pred.dim(2);
  require(static_cast<long>(target.size()) == C * hw,
          "smooth_l1: target length must be ", C * hw, ", got ", target.size());
  require(static_cast<long>(weights.size()) == hw,
          "smooth_l1: weights length must be ", hw, ", got ", weights.size());
  const float* pv = pred.data().data();
  double acc = 0.0;
  for (long p = 0; p < hw; ++p) {
    const float w = weights[p];
    if (w == 0.0f) continue;
    for (int c = 0; c < C; ++c) {
      const double d = static_cast<double>(pv[c * hw + p]) - target[c * hw + p];
      const double a = std::abs(d);
      acc += w * (a < beta ? 0.5 * d * d / beta : a - 0.5 * beta);
    }
  }
  const double value = acc * inv_norm;
  require(std::isfinite(value), "smooth_l1: non-finite loss");
  Tensor out = Tensor::scalar(static_cast<float>(value));
  out.set_precise(value);
  if (want_grad(g, {&pred})) {
    out.set_requires_grad(true);
    Tensor p_t = pred, out_t = out;
    g.record("smooth_l1", [p_t, out_t, target = std::move(target),
                           weights = std::move(weights), inv_norm, beta, C,
                           hw]() mutable {
      const float go = out_t.grad()[0] * static_cast<float>(inv_norm);
      const float* pv = p_t.data().data();
      std::span<float> gp = p_t.grad();
      const float bf = static_cast<float>(beta);
      for (long p = 0; p < hw; ++p) {
        const float w = weights[p];
        if (w == 0.0f) continue;
        for (int c = 0; c < C; ++c) {
          const float d = pv[c * hw + p] - target[c * hw + p];
          float dd;
          if (d > bf) dd = 1.0f;
          else if (d < -bf) dd = -1.0f;
          else dd = d / bf;
          gp[c * hw + p] += go * w * dd;
        }
      }
    });
  }
  return out;
}

Tensor sigmoid_ce(Graph& g, const Tensor& logit, double target) {
  require(logit.defined() && logit.size() == 1,
          "sigmoid_ce: logit must be a single-element tensor, got shape ",
          logit.defined() ? shape_str(logit.shape()) : "<undefined>");
  require(target >= 0.0 && target <= 1.0, "sigmoid_ce: target must be in [0,1], got ",
          target);
  const double x = logit.item_f64();
  const double value =
      std::max(x, 0.0) - x * target + std::log1p(std::exp(-std::abs(x)));
  require(std::isfinite(value), "sigmoid_ce: non-finite loss");
  Tensor out = Tensor::scalar(static_cast<float>(value));
  out.set_precise(value);
  if (want_grad(g, {&logit})) {
    out.set_requires_grad(true);
    Tensor l_t = logit, out_t = out;
    g.record("sigmoid_ce", [l_t, out_t, target]() mutable {
      const double x2 = static_cast<double>(l_t.data()[0]);
      const double s = 1.0 / (1.0 + std::exp(-x2));
      l_t.grad()[0] += out_t.grad()[0] * static_cast<float>(s - target);
    });
  }
  return out;
}

}  // namespace boxseg
