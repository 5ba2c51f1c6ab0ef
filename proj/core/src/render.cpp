#include "boxseg/render.hpp"

#include "boxseg/common.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/synth.hpp"

namespace boxseg {
namespace {

std::uint8_t blend(std::uint8_t base, std::uint8_t tint) {
  return static_cast<std::uint8_t>((static_cast<int>(base) + tint) / 2);
}

}  // namespace

ImageU8 render_semantic(const ImageU8& image, const LabelMap& labels) {
  if (image.channels != 3)
    throw Error(detail::cat("render_semantic: image has ", image.channels,
                            " channels, expected 3"));
  if (labels.h != image.h || labels.w != image.w)
    throw Error(detail::cat("render_semantic: label map is ", labels.w, "x",
                            labels.h, " but image is ", image.w, "x",
                            image.h));
  ImageU8 out = image;
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x) {
      int cls = labels.at(y, x);
      if (cls <= 0) continue;
      auto color = class_color(cls);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = blend(out.at(y, x, c), color[c]);
    }
  return out;
}

ImageU8 render_instances(const ImageU8& image,
                         const std::vector<InstancePrediction>& preds) {
  if (image.channels != 3)
    throw Error(detail::cat("render_instances: image has ", image.channels,
                            " channels, expected 3"));
  ImageU8 out = image;
  std::size_t npix = static_cast<std::size_t>(image.h) * image.w;
  for (const auto& pred : preds) {
    if (pred.mask.size() != npix)
      throw Error(detail::cat("render_instances: mask has ", pred.mask.size(),
                              " pixels, image has ", npix));
    auto color = class_color(pred.cls);
    for (int y = 0; y < image.h; ++y)
      for (int x = 0; x < image.w; ++x)
        if (pred.mask[static_cast<std::size_t>(y) * image.w + x])
          for (int c = 0; c < 3; ++c)
            out.at(y, x, c) = blend(out.at(y, x, c), color[c]);
    CellRange r = box_to_cells(pred.box, image.h, image.w);
    for (int x = r.x_lo; x <= r.x_hi; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(r.y_lo, x, c) = color[c];
        out.at(r.y_hi, x, c) = color[c];
      }
    }
    for (int y = r.y_lo; y <= r.y_hi; ++y) {
      for (int c = 0; c < 3; ++c) {
        out.at(y, r.x_lo, c) = color[c];
        out.at(y, r.x_hi, c) = color[c];
      }
    }
  }
  return out;
}

}  // namespace boxseg
