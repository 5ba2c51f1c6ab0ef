#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "boxseg/instance.hpp"
#include "boxseg/model_config.hpp"
#include "boxseg/param_store.hpp"
#include "boxseg/synth.hpp"

namespace boxseg {

struct TrainConfig {
  int steps = 500;
  int batch = 8;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  int log_every = 25;  // 0 disables progress lines
};

// Base rate, then /10 after 60% of the steps and /100 after 90%.
double lr_at(const TrainConfig& tc, int step);

// Each function runs `steps` optimizer updates over batches of `batch`
// augmented samples drawn with replacement and returns the per-step mean
// loss. Parameters are updated in place; only tensors marked trainable move.

// Expects "detector.*" in params.
std::vector<double> train_detector(ParamStore& params, const ModelConfig& cfg,
                                   const std::vector<SynthSample>& data,
                                   const TrainConfig& tc,
                                   std::ostream* log = nullptr);

// Expects "detector.*" (typically frozen) and a decoder with the semantic
// head. Trains on mask-carrying samples only: per sample one labelled class
// is drawn, attention runs on a random non-empty subset of its boxes, and
// the box union supervises the foreground/background head.
std::vector<double> train_semantic(ParamStore& params, const ModelConfig& cfg,
                                   const std::vector<SynthSample>& data,
                                   const TrainConfig& tc,
                                   std::ostream* log = nullptr);

// Expects "detector.*" (typically frozen), a decoder without the semantic
// head, and "instance.ps.*". Trains on mask-carrying samples: attention runs
// on all boxes of one labelled class, and jittered/background ROIs around
// them supervise the position-sensitive head.
std::vector<double> train_instance(ParamStore& params, const ModelConfig& cfg,
                                   const PSConfig& ps,
                                   const std::vector<SynthSample>& data,
                                   const TrainConfig& tc,
                                   std::ostream* log = nullptr);

}  // namespace boxseg
