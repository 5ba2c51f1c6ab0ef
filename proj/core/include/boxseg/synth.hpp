#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "boxseg/geometry.hpp"
#include "boxseg/image_io.hpp"
#include "boxseg/pipeline.hpp"
#include "boxseg/rng.hpp"

namespace boxseg {

// One labelled object. The mask covers the full canvas (h*w bytes, 0/1) and
// marks only the visible pixels; `box` is the tight bounding box of the mask
// in normalized coordinates.
struct SynthInstance {
  int cls = 0;
  Box box;
  std::vector<std::uint8_t> mask;
};

struct SynthSample {
  ImageU8 image;  // RGB
  std::vector<SynthInstance> instances;
  bool has_mask = false;

  int h() const { return image.h; }
  int w() const { return image.w; }
  Tensor image_tensor() const { return image_to_tensor(image); }
  // Per-pixel class id, 0 for background.
  LabelMap semantic_labels() const;
  // Per-pixel instance index + 1, 0 for background. Masks are disjoint.
  ImageU8 instance_map() const;
};

struct DatasetConfig {
  int image_size = 64;
  int num_classes = 3;
  int min_instances = 1;
  int max_instances = 4;
  double min_size = 0.2;   // object extent as a fraction of image size
  double max_size = 0.45;
};

// Fill color associated with a class id (cycles through a fixed palette).
std::array<std::uint8_t, 3> class_color(int cls);

// Deterministic function of (seed, cfg). Objects are colored geometric
// shapes (disk / square / triangle by class) on a noisy dark background;
// later instances occlude earlier ones and occluded pixels are removed from
// the earlier instance's mask, with its box retightened.
SynthSample generate_sample(std::uint64_t seed, const DatasetConfig& cfg);

// Tight bounding box of a canvas mask; requires at least one set pixel.
Box mask_tight_box(const std::vector<std::uint8_t>& mask, int h, int w);

// Augmentation primitives. Every geometric op rebuilds each instance mask
// and recomputes its box from the result, dropping instances that end up
// with no visible pixels.
SynthSample flip_sample(const SynthSample& s);
SynthSample expand_sample(const SynthSample& s, Rng& rng);  // zoom out
SynthSample crop_sample(const SynthSample& s, Rng& rng);    // zoom in
SynthSample noise_sample(const SynthSample& s, Rng& rng);

// Applies flip, expand, crop, noise, each with probability 1/2.
SynthSample augment(const SynthSample& s, Rng& rng);

}  // namespace boxseg
