#include "boxseg/synth.hpp"

#include <array>
#include <cmath>

#include "boxseg/common.hpp"

namespace boxseg {
namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette = {{
    {230, 64, 64},
    {64, 200, 64},
    {80, 96, 230},
    {225, 225, 64},
    {210, 64, 215},
    {64, 210, 210},
}};

std::uint8_t clamp_u8(int v) {
  return static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
}

struct ShapeLayout {
  int cls = 0;
  double cx = 0, cy = 0, size = 0;  // pixels
  std::array<std::uint8_t, 3> color{};
};

// Pixel-center containment. Shape kind cycles with the class id so class
// counts beyond three still produce distinct (color, shape) pairs.
bool inside_shape(const ShapeLayout& sh, double px, double py) {
  double half = sh.size / 2;
  switch ((sh.cls - 1) % 3) {
    case 0: {  // disk
      double dx = px - sh.cx, dy = py - sh.cy;
      return dx * dx + dy * dy <= half * half;
    }
    case 1:  // square
      return std::abs(px - sh.cx) <= half && std::abs(py - sh.cy) <= half;
    default: {  // triangle, apex up
      double hh = 0.866 * half;
      if (py < sh.cy - hh || py > sh.cy + hh) return false;
      double frac = (py - (sh.cy - hh)) / (2 * hh);
      return std::abs(px - sh.cx) <= frac * half;
    }
  }
}

// Image plus per-pixel instance index (0 = background). Keeping the two
// together lets every geometric transform move them through the same
// resampling, so instance masks stay disjoint by construction.
struct Frame {
  ImageU8 img;
  std::vector<std::int32_t> imap;
};

Frame to_frame(const SynthSample& s) {
  Frame f;
  f.img = s.image;
  f.imap.assign(static_cast<std::size_t>(s.h()) * s.w(), 0);
  for (std::size_t i = 0; i < s.instances.size(); ++i) {
    const auto& mask = s.instances[i].mask;
    for (std::size_t p = 0; p < f.imap.size(); ++p)
      if (mask[p]) f.imap[p] = static_cast<std::int32_t>(i) + 1;
  }
  return f;
}

SynthSample from_frame(const SynthSample& src, Frame f) {
  SynthSample out;
  out.image = std::move(f.img);
  out.has_mask = src.has_mask;
  int h = out.h(), w = out.w();
  for (std::size_t i = 0; i < src.instances.size(); ++i) {
    SynthInstance inst;
    inst.cls = src.instances[i].cls;
    inst.mask.assign(static_cast<std::size_t>(h) * w, 0);
    int count = 0;
    for (std::size_t p = 0; p < f.imap.size(); ++p)
      if (f.imap[p] == static_cast<std::int32_t>(i) + 1) {
        inst.mask[p] = 1;
        ++count;
      }
    if (count == 0) continue;
    inst.box = mask_tight_box(inst.mask, h, w);
    out.instances.push_back(std::move(inst));
  }
  return out;
}

// Nearest-neighbor resample, integer arithmetic only.
Frame resize_frame(const Frame& in, int in_h, int in_w, int out_h, int out_w) {
  Frame out;
  out.img = ImageU8::filled(3, out_h, out_w, 0);
  out.imap.assign(static_cast<std::size_t>(out_h) * out_w, 0);
  for (int y = 0; y < out_h; ++y) {
    int sy = static_cast<int>((2LL * y + 1) * in_h / (2LL * out_h));
    for (int x = 0; x < out_w; ++x) {
      int sx = static_cast<int>((2LL * x + 1) * in_w / (2LL * out_w));
      for (int c = 0; c < 3; ++c)
        out.img.at(y, x, c) = in.img.at(sy, sx, c);
      out.imap[static_cast<std::size_t>(y) * out_w + x] =
          in.imap[static_cast<std::size_t>(sy) * in_w + sx];
    }
  }
  return out;
}

}  // namespace

std::array<std::uint8_t, 3> class_color(int cls) {
  if (cls < 1) throw Error(detail::cat("class_color: class id ", cls, " < 1"));
  return kPalette[static_cast<std::size_t>(cls - 1) % kPalette.size()];
}

Box mask_tight_box(const std::vector<std::uint8_t>& mask, int h, int w) {
  int x_lo = w, x_hi = -1, y_lo = h, y_hi = -1;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask[static_cast<std::size_t>(y) * w + x]) {
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
  if (x_hi < 0) throw Error("mask_tight_box: empty mask");
  Box b;
  b.x_min = static_cast<float>(x_lo) / static_cast<float>(w);
  b.x_max = static_cast<float>(x_hi + 1) / static_cast<float>(w);
  b.y_min = static_cast<float>(y_lo) / static_cast<float>(h);
  b.y_max = static_cast<float>(y_hi + 1) / static_cast<float>(h);
  return b;
}

LabelMap SynthSample::semantic_labels() const {
  LabelMap lm;
  lm.h = h();
  lm.w = w();
  lm.data.assign(static_cast<std::size_t>(lm.h) * lm.w, 0);
  for (const auto& inst : instances)
    for (std::size_t p = 0; p < inst.mask.size(); ++p)
      if (inst.mask[p]) lm.data[p] = inst.cls;
  return lm;
}

ImageU8 SynthSample::instance_map() const {
  if (instances.size() > 255)
    throw Error("instance_map: more than 255 instances");
  ImageU8 m = ImageU8::filled(1, h(), w(), 0);
  for (std::size_t i = 0; i < instances.size(); ++i)
    for (std::size_t p = 0; p < instances[i].mask.size(); ++p)
      if (instances[i].mask[p])
        m.data[p] = static_cast<std::uint8_t>(i + 1);
  return m;
}

SynthSample generate_sample(std::uint64_t seed, const DatasetConfig& cfg) {
  if (cfg.image_size < 8)
    throw Error(detail::cat("generate_sample: image_size ", cfg.image_size,
                            " too small"));
  if (cfg.num_classes < 1)
    throw Error("generate_sample: num_classes must be positive");
  if (cfg.min_instances < 1 || cfg.max_instances < cfg.min_instances)
    throw Error("generate_sample: bad instance count range");
  if (!(cfg.min_size > 0.0) || cfg.max_size > 1.0 ||
      cfg.max_size < cfg.min_size)
    throw Error("generate_sample: bad size range");

  Rng rng(seed);
  int n = cfg.image_size;
  std::array<std::uint8_t, 3> bg;
  for (auto& c : bg)
    c = static_cast<std::uint8_t>(rng.uniform_int(16, 64));
  int n_inst = rng.uniform_int(cfg.min_instances, cfg.max_instances);

  // Occlusion can hide an earlier object completely; in that case the whole
  // layout is resampled so every labelled instance stays visible.
  std::vector<ShapeLayout> layout(static_cast<std::size_t>(n_inst));
  std::vector<std::int32_t> imap;
  bool placed = false;
  for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
    for (auto& sh : layout) {
      sh.cls = rng.uniform_int(1, cfg.num_classes);
      sh.size = rng.uniform(cfg.min_size, cfg.max_size) * n;
      double lo = sh.size / 2 + 0.5;
      double hi = std::max(lo, n - sh.size / 2 - 0.5);
      sh.cx = rng.uniform(lo, hi);
      sh.cy = rng.uniform(lo, hi);
      auto base = class_color(sh.cls);
      for (int c = 0; c < 3; ++c)
        sh.color[c] = clamp_u8(base[c] + rng.uniform_int(-24, 24));
    }
    imap.assign(static_cast<std::size_t>(n) * n, 0);
    std::vector<int> visible(layout.size(), 0);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        for (int i = n_inst - 1; i >= 0; --i)
          if (inside_shape(layout[static_cast<std::size_t>(i)], x + 0.5,
                           y + 0.5)) {
            imap[static_cast<std::size_t>(y) * n + x] = i + 1;
            ++visible[static_cast<std::size_t>(i)];
            break;
          }
    placed = true;
    for (int v : visible)
      if (v == 0) placed = false;
  }
  if (!placed)
    throw Error("generate_sample: could not place all instances in 64 tries");

  SynthSample s;
  s.image = ImageU8::filled(3, n, n, 0);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      int id = imap[static_cast<std::size_t>(y) * n + x];
      for (int c = 0; c < 3; ++c) {
        int v = id > 0 ? layout[static_cast<std::size_t>(id - 1)].color[c]
                       : bg[c] + static_cast<int>(std::lround(rng.normal() * 6));
        s.image.at(y, x, c) = clamp_u8(v);
      }
    }
  for (int i = 0; i < n_inst; ++i) {
    SynthInstance inst;
    inst.cls = layout[static_cast<std::size_t>(i)].cls;
    inst.mask.assign(static_cast<std::size_t>(n) * n, 0);
    for (std::size_t p = 0; p < inst.mask.size(); ++p)
      if (imap[p] == i + 1) inst.mask[p] = 1;
    inst.box = mask_tight_box(inst.mask, n, n);
    s.instances.push_back(std::move(inst));
  }
  return s;
}

SynthSample flip_sample(const SynthSample& s) {
  Frame in = to_frame(s);
  Frame out;
  out.img = ImageU8::filled(3, s.h(), s.w(), 0);
  out.imap.assign(in.imap.size(), 0);
  int w = s.w();
  for (int y = 0; y < s.h(); ++y)
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c)
        out.img.at(y, x, c) = in.img.at(y, w - 1 - x, c);
      out.imap[static_cast<std::size_t>(y) * w + x] =
          in.imap[static_cast<std::size_t>(y) * w + (w - 1 - x)];
    }
  return from_frame(s, std::move(out));
}

SynthSample expand_sample(const SynthSample& s, Rng& rng) {
  int h = s.h(), w = s.w();
  double r = rng.uniform(1.1, 1.5);
  int big_h = static_cast<int>(std::lround(h * r));
  int big_w = static_cast<int>(std::lround(w * r));
  std::array<std::uint8_t, 3> bg;
  for (auto& c : bg)
    c = static_cast<std::uint8_t>(rng.uniform_int(16, 64));
  int oy = rng.uniform_int(0, big_h - h);
  int ox = rng.uniform_int(0, big_w - w);

  Frame src = to_frame(s);
  Frame canvas;
  canvas.img = ImageU8::filled(3, big_h, big_w, 0);
  for (int y = 0; y < big_h; ++y)
    for (int x = 0; x < big_w; ++x)
      for (int c = 0; c < 3; ++c)
        canvas.img.at(y, x, c) = bg[c];
  canvas.imap.assign(static_cast<std::size_t>(big_h) * big_w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c)
        canvas.img.at(oy + y, ox + x, c) = src.img.at(y, x, c);
      canvas.imap[static_cast<std::size_t>(oy + y) * big_w + ox + x] =
          src.imap[static_cast<std::size_t>(y) * w + x];
    }
  SynthSample out =
      from_frame(s, resize_frame(canvas, big_h, big_w, h, w));
  if (out.instances.empty()) return s;  // nothing survived the downscale
  return out;
}

SynthSample crop_sample(const SynthSample& s, Rng& rng) {
  int h = s.h(), w = s.w();
  Frame src = to_frame(s);
  for (int attempt = 0; attempt < 20; ++attempt) {
    double f = rng.uniform(0.5, 0.9);
    int ch = std::min(h, std::max(8, static_cast<int>(std::lround(h * f))));
    int cw = std::min(w, std::max(8, static_cast<int>(std::lround(w * f))));
    int oy = rng.uniform_int(0, h - ch);
    int ox = rng.uniform_int(0, w - cw);
    bool keeps_center = false;
    for (const auto& inst : s.instances) {
      double px = inst.box.cx() * w, py = inst.box.cy() * h;
      if (px >= ox && px < ox + cw && py >= oy && py < oy + ch) {
        keeps_center = true;
        break;
      }
    }
    if (!keeps_center) continue;
    Frame win;
    win.img = ImageU8::filled(3, ch, cw, 0);
    win.imap.assign(static_cast<std::size_t>(ch) * cw, 0);
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) {
        for (int c = 0; c < 3; ++c)
          win.img.at(y, x, c) = src.img.at(oy + y, ox + x, c);
        win.imap[static_cast<std::size_t>(y) * cw + x] =
            src.imap[static_cast<std::size_t>(oy + y) * w + ox + x];
      }
    return from_frame(s, resize_frame(win, ch, cw, h, w));
  }
  return s;  // no window kept an instance center
}

SynthSample noise_sample(const SynthSample& s, Rng& rng) {
  SynthSample out = s;
  for (auto& byte : out.image.data)
    byte = clamp_u8(byte + static_cast<int>(std::lround(rng.normal() * 8)));
  return out;
}

SynthSample augment(const SynthSample& s, Rng& rng) {
  SynthSample out = s;
  if (rng.coin()) out = flip_sample(out);
  if (rng.coin()) out = expand_sample(out, rng);
  if (rng.coin()) out = crop_sample(out, rng);
  if (rng.coin()) out = noise_sample(out, rng);
  return out;
}

}  // namespace boxseg
