#include "boxseg/decoder.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "boxseg/ops.hpp"
#include "boxseg/rng.hpp"
#include "testing_util.hpp"

namespace boxseg {
namespace {

ModelConfig tiny_config(int image_size = 16, int scales = 2,
                        int base_width = 4) {
  ModelConfig cfg;
  cfg.image_size = image_size;
  cfg.num_classes = 2;
  cfg.scales = scales;
  cfg.base_width = base_width;
  cfg.validate();
  return cfg;
}

FeaturePyramid pyramid_for(Rng& rng, const ModelConfig& cfg) {
  FeaturePyramid f;
  for (int k = 1; k <= cfg.scales; ++k) {
    const int n = cfg.image_size / cfg.stride_at(k);
    f.maps.push_back(testing::rand_tensor(rng, {cfg.channels_at(k), n, n}));
  }
  return f;
}

ClassSpecificPyramid attend_full(Graph& g, const FeaturePyramid& f) {
  return attend(g, f, {{0.0f, 0.0f, 1.0f, 1.0f}}, 1);
}

TEST(Decoder, TopFeaturesReachImageResolution) {
  for (int scales : {2, 3}) {
    ModelConfig cfg = tiny_config(scales == 2 ? 16 : 32, scales);
    Rng rng(1);
    ParamStore p;
    build_decoder_params(p, rng, cfg, true);
    FeaturePyramid f = pyramid_for(rng, cfg);
    Graph g = Graph::inference();
    Tensor top = decode_top(g, p, cfg, attend_full(g, f));
    EXPECT_EQ(top.shape(),
              (Shape{cfg.base_width, cfg.image_size, cfg.image_size}));
    Tensor logits = semantic_logits(g, p, top);
    EXPECT_EQ(logits.shape(), (Shape{2, cfg.image_size, cfg.image_size}));
  }
}

TEST(Decoder, ScaleCountMismatchIsAnError) {
  ModelConfig cfg = tiny_config();
  Rng rng(2);
  ParamStore p;
  build_decoder_params(p, rng, cfg, true);
  FeaturePyramid f = pyramid_for(rng, cfg);
  f.maps.pop_back();
  Graph g = Graph::inference();
  ClassSpecificPyramid one;
  one.maps = f.maps;
  EXPECT_THROW(decode_top(g, p, cfg, one), Error);
}

TEST(SemanticLoss, UniformLogitsCostLogTwo) {
  // Fresh biases are zero, so an all-zero pyramid must decode to all-zero
  // logits: two-way softmax is uniform and every counted pixel costs ln 2.
  ModelConfig cfg = tiny_config();
  Rng rng(3);
  ParamStore p;
  build_decoder_params(p, rng, cfg, true);
  FeaturePyramid f;
  for (int k = 1; k <= cfg.scales; ++k) {
    const int n = cfg.image_size / cfg.stride_at(k);
    f.maps.push_back(Tensor::zeros({cfg.channels_at(k), n, n}));
  }
  Graph g;
  Tensor logits = semantic_logits(g, p, decode_top(g, p, cfg, attend_full(g, f)));
  for (float v : logits.data()) ASSERT_EQ(v, 0.0f);

  std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(cfg.image_size) * cfg.image_size, 0);
  for (std::size_t i = 0; i < mask.size() / 2; ++i) mask[i] = 1;
  Tensor loss =
      semantic_loss(g, logits, mask, {{0.0f, 0.0f, 1.0f, 1.0f}});
  EXPECT_NEAR(loss.item_f64(), std::log(2.0), 1e-12);
}

TEST(SemanticLoss, PixelsOutsideTheBoxesAreInert) {
  const int n = 8;
  Rng rng(4);
  Tensor logits = testing::rand_tensor(rng, {2, n, n});
  logits.set_requires_grad(true);
  std::vector<std::uint8_t> mask(n * n);
  for (auto& m : mask) m = rng.coin() ? 1 : 0;
  // left half of the image only
  std::vector<Box> boxes = {{0.0f, 0.0f, 0.5f, 1.0f}};
  Graph g;
  Tensor loss = semantic_loss(g, logits, mask, boxes);
  g.backward(loss);

  // independent recomputation over counted pixels
  double want = 0.0;
  long counted = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const std::size_t p = static_cast<std::size_t>(y * n + x);
      const bool inside = x < n / 2;
      const float g0 = logits.data()[p];
      const float g1 = logits.data()[n * n + p];
      if (!inside) {
        EXPECT_EQ(logits.grad()[p], 0.0f);
        EXPECT_EQ(logits.grad()[n * n + p], 0.0f);
        continue;
      }
      ++counted;
      const double m = std::max(g0, g1);
      const double lse = m + std::log(std::exp(g0 - m) + std::exp(g1 - m));
      want += lse - (mask[p] ? g1 : g0);
    }
  want /= static_cast<double>(counted);
  EXPECT_NEAR(loss.item_f64(), want, 1e-12);
}

TEST(SemanticLoss, InvalidInputsAreRejected) {
  Tensor logits = Tensor::zeros({2, 4, 4});
  std::vector<std::uint8_t> mask(16, 0);
  Graph g;
  EXPECT_THROW(semantic_loss(g, logits, mask, {}), Error);
  std::vector<std::uint8_t> short_mask(15, 0);
  EXPECT_THROW(
      semantic_loss(g, logits, short_mask, {{0.f, 0.f, 1.f, 1.f}}), Error);
  Tensor bad = Tensor::zeros({3, 4, 4});
  EXPECT_THROW(semantic_loss(g, bad, mask, {{0.f, 0.f, 1.f, 1.f}}), Error);
}

TEST(SemanticLoss, GradsMatchFiniteDifferences) {
  const int n = 8;
  Rng rng(5);
  Tensor logits = testing::rand_tensor(rng, {2, n, n});
  std::vector<std::uint8_t> mask(n * n);
  for (auto& m : mask) m = rng.coin() ? 1 : 0;
  std::vector<Box> boxes = {{0.0f, 0.1f, 0.6f, 0.9f}, {0.4f, 0.4f, 1.0f, 1.0f}};
  testing::expect_grads_match(
      [&](Graph& g) { return semantic_loss(g, logits, mask, boxes); },
      {{"logits", logits}});
}

TEST(Decoder, GradsFlowThroughMergeStackAndHead) {
  ModelConfig cfg = tiny_config(16, 2, 2);
  Rng rng(6);
  ParamStore p;
  build_decoder_params(p, rng, cfg, true);
  FeaturePyramid f = pyramid_for(rng, cfg);
  std::vector<Box> boxes = {{0.05f, 0.05f, 0.7f, 0.8f}};
  std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(cfg.image_size) * cfg.image_size);
  for (auto& m : mask) m = rng.coin() ? 1 : 0;

  auto make_loss = [&](Graph& g) {
    ClassSpecificPyramid fl = attend(g, f, boxes, 1);
    Tensor logits = semantic_logits(g, p, decode_top(g, p, cfg, fl));
    return semantic_loss(g, logits, mask, boxes);
  };
  testing::expect_grads_match(make_loss,
                              {{"merge.up", p.at("decoder.merge.1.up.w")},
                               {"merge.conv", p.at("decoder.merge.1.conv.w")},
                               {"up2", p.at("decoder.up.2.w")},
                               {"head", p.at("decoder.head.w")},
                               {"skip", f.maps[0]},
                               {"deep", f.maps[1]}},
                              1e-3, 2e-3, 32);
}

TEST(Decoder, LearnsToReproduceAFixedMask) {
  ModelConfig cfg = tiny_config(16, 2, 4);
  Rng rng(7);
  ParamStore p;
  build_decoder_params(p, rng, cfg, true);
  FeaturePyramid f = pyramid_for(rng, cfg);
  std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(cfg.image_size) * cfg.image_size, 0);
  for (int y = 0; y < cfg.image_size; ++y)
    for (int x = 0; x < cfg.image_size / 2; ++x)
      mask[static_cast<std::size_t>(y * cfg.image_size + x)] = 1;
  std::vector<Box> boxes = {{0.0f, 0.0f, 1.0f, 1.0f}};

  SgdMomentum opt(0.9);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 120; ++step) {
    Graph g;
    ClassSpecificPyramid fl = attend(g, f, boxes, 1);
    Tensor logits = semantic_logits(g, p, decode_top(g, p, cfg, fl));
    Tensor loss = semantic_loss(g, logits, mask, boxes);
    g.backward(loss);
    opt.step(p, 0.05);
    if (step == 0) first = loss.item_f64();
    last = loss.item_f64();
  }
  EXPECT_LT(last, 0.1);
  EXPECT_LT(last, first / 4);

  Graph g = Graph::inference();
  Tensor fitted =
      semantic_logits(g, p, decode_top(g, p, cfg, attend_full(g, f)));
  const int hw = cfg.image_size * cfg.image_size;
  int agree = 0;
  for (int i = 0; i < hw; ++i) {
    const bool fg = fitted.data()[static_cast<std::size_t>(hw + i)] >
                    fitted.data()[static_cast<std::size_t>(i)];
    agree += fg == (mask[static_cast<std::size_t>(i)] != 0);
  }
  EXPECT_GT(agree, hw * 9 / 10);
}

}  // namespace
}  // namespace boxseg
