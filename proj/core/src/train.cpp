#include "boxseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "boxseg/decoder.hpp"
#include "boxseg/detector.hpp"
#include "boxseg/common.hpp"
#include "boxseg/ops.hpp"

namespace boxseg {

double lr_at(const TrainConfig& tc, int step) {
  if (10LL * step >= 9LL * tc.steps) return tc.lr * 0.01;
  if (10LL * step >= 6LL * tc.steps) return tc.lr * 0.1;
  return tc.lr;
}

namespace {

void check_train_config(const TrainConfig& tc) {
  require(tc.steps >= 1, "training needs at least one step, got ", tc.steps);
  require(tc.batch >= 1, "batch size must be positive, got ", tc.batch);
  require(tc.lr > 0.0, "learning rate must be positive, got ", tc.lr);
}

void log_step(std::ostream* log, const TrainConfig& tc, int step, double lr,
              double loss) {
  if (!log || tc.log_every <= 0) return;
  if (step % tc.log_every != 0 && step != tc.steps - 1) return;
  char buf[96];
  std::snprintf(buf, sizeof buf, "step=%d lr=%g loss=%.6f\n", step, lr, loss);
  *log << buf;
}

// Indices of samples usable for mask-supervised stages.
std::vector<std::size_t> mask_pool(const std::vector<SynthSample>& data) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].has_mask && !data[i].instances.empty()) pool.push_back(i);
  require(!pool.empty(), "no mask-carrying samples in the dataset");
  return pool;
}

// Sorted distinct class ids of a sample.
std::vector<int> sample_classes(const SynthSample& s) {
  std::set<int> cs;
  for (const auto& inst : s.instances) cs.insert(inst.cls);
  return {cs.begin(), cs.end()};
}

// All-class foreground mask for one class (union over its instances).
std::vector<std::uint8_t> class_union_mask(const SynthSample& s, int cls) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(s.h()) * s.w(), 0);
  for (const auto& inst : s.instances) {
    if (inst.cls != cls) continue;
    for (std::size_t p = 0; p < inst.mask.size(); ++p)
      if (inst.mask[p]) m[p] = 1;
  }
  return m;
}

}  // namespace

std::vector<double> train_detector(ParamStore& params, const ModelConfig& cfg,
                                   const std::vector<SynthSample>& data,
                                   const TrainConfig& tc, std::ostream* log) {
  check_train_config(tc);
  cfg.validate();
  require(!data.empty(), "empty dataset");
  Rng rng(tc.seed);
  SgdMomentum opt(tc.momentum);
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(tc.steps));
  for (int step = 0; step < tc.steps; ++step) {
    double lr = lr_at(tc, step);
    double loss_sum = 0.0;
    for (int b = 0; b < tc.batch; ++b) {
      const SynthSample& base =
          data[static_cast<std::size_t>(rng.uniform_int(
              0, static_cast<int>(data.size()) - 1))];
      SynthSample s = augment(base, rng);
      std::vector<Box> boxes;
      std::vector<int> classes;
      for (const auto& inst : s.instances) {
        boxes.push_back(inst.box);
        classes.push_back(inst.cls);
      }
      Graph g;
      FeaturePyramid f = backbone_forward(g, params, cfg, s.image_tensor());
      RawPredictions preds = head_forward(g, params, cfg, f);
      Tensor loss = detection_loss(g, cfg, preds, boxes, classes);
      g.backward(scale(g, loss, 1.0 / tc.batch));
      loss_sum += loss.item_f64();
    }
    double avg = loss_sum / tc.batch;
    require(std::isfinite(avg), "detector loss diverged at step ", step);
    opt.step(params, lr);
    losses.push_back(avg);
    log_step(log, tc, step, lr, avg);
  }
  return losses;
}

std::vector<double> train_semantic(ParamStore& params, const ModelConfig& cfg,
                                   const std::vector<SynthSample>& data,
                                   const TrainConfig& tc, std::ostream* log) {
  check_train_config(tc);
  cfg.validate();
  std::vector<std::size_t> pool = mask_pool(data);
  Rng rng(tc.seed);
  SgdMomentum opt(tc.momentum);
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(tc.steps));
  for (int step = 0; step < tc.steps; ++step) {
    double lr = lr_at(tc, step);
    double loss_sum = 0.0;
    for (int b = 0; b < tc.batch; ++b) {
      const SynthSample& base = data[pool[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(pool.size()) - 1))]];
      SynthSample s = augment(base, rng);
      std::vector<int> classes = sample_classes(s);
      int label = classes[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(classes.size()) - 1))];
      std::vector<Box> class_boxes;
      for (const auto& inst : s.instances)
        if (inst.cls == label) class_boxes.push_back(inst.box);
      // Random non-empty subset, so the decoder sees varying unions.
      std::vector<Box> subset;
      for (const auto& b2 : class_boxes)
        if (rng.coin()) subset.push_back(b2);
      if (subset.empty())
        subset.push_back(class_boxes[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<int>(class_boxes.size()) - 1))]);

      Graph g;
      FeaturePyramid f = backbone_forward(g, params, cfg, s.image_tensor());
      ClassSpecificPyramid fl = attend(g, f, subset, label);
      Tensor top = decode_top(g, params, cfg, fl);
      Tensor logits = semantic_logits(g, params, top);
      Tensor loss = semantic_loss(g, logits, class_union_mask(s, label), subset);
      g.backward(scale(g, loss, 1.0 / tc.batch));
      loss_sum += loss.item_f64();
    }
    double avg = loss_sum / tc.batch;
    require(std::isfinite(avg), "semantic loss diverged at step ", step);
    opt.step(params, lr);
    losses.push_back(avg);
    log_step(log, tc, step, lr, avg);
  }
  return losses;
}

std::vector<double> train_instance(ParamStore& params, const ModelConfig& cfg,
                                   const PSConfig& ps,
                                   const std::vector<SynthSample>& data,
                                   const TrainConfig& tc, std::ostream* log) {
  check_train_config(tc);
  cfg.validate();
  ps.validate();
  std::vector<std::size_t> pool = mask_pool(data);
  Rng rng(tc.seed);
  SgdMomentum opt(tc.momentum);
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(tc.steps));
  for (int step = 0; step < tc.steps; ++step) {
    double lr = lr_at(tc, step);
    double loss_sum = 0.0;
    for (int b = 0; b < tc.batch; ++b) {
      std::vector<InstanceSample> roi_samples;
      SynthSample s;
      int label = 0;
      std::vector<Box> class_gts;
      // A draw can yield no usable ROIs (jitter may miss the overlap bar);
      // redraw rather than feed an empty unit to the loss.
      for (int attempt = 0; attempt < 16 && roi_samples.empty(); ++attempt) {
        const SynthSample& base = data[pool[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(pool.size()) - 1))]];
        s = augment(base, rng);
        std::vector<int> classes = sample_classes(s);
        label = classes[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(classes.size()) - 1))];
        class_gts.clear();
        for (const auto& inst : s.instances)
          if (inst.cls == label) class_gts.push_back(inst.box);
        roi_samples = sample_instance_boxes(class_gts, ps, rng);
      }
      require(!roi_samples.empty(),
              "could not sample any training ROI in 16 tries at step ", step);
      std::vector<std::vector<std::uint8_t>> gt_masks;
      for (const auto& inst : s.instances)
        if (inst.cls == label) gt_masks.push_back(inst.mask);

      Graph g;
      FeaturePyramid f = backbone_forward(g, params, cfg, s.image_tensor());
      ClassSpecificPyramid fl = attend(g, f, class_gts, label);
      Tensor top = decode_top(g, params, cfg, fl);
      Tensor maps = ps_head(g, params, top);
      Tensor loss = instance_loss(g, maps, roi_samples, gt_masks, ps.k);
      g.backward(scale(g, loss, 1.0 / tc.batch));
      loss_sum += loss.item_f64();
    }
    double avg = loss_sum / tc.batch;
    require(std::isfinite(avg), "instance loss diverged at step ", step);
    opt.step(params, lr);
    losses.push_back(avg);
    log_step(log, tc, step, lr, avg);
  }
  return losses;
}

}  // namespace boxseg
