#include "boxseg/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "boxseg/rng.hpp"
#include "oracles.hpp"

namespace boxseg {
namespace {

LabelMap map_from(std::initializer_list<std::int32_t> vals, int h, int w) {
  LabelMap m;
  m.h = h;
  m.w = w;
  m.data.assign(vals);
  return m;
}

TEST(Miou, PerfectPredictionScoresOne) {
  LabelMap gt = map_from({0, 1, 1, 2}, 2, 2);
  MiouResult r = eval_miou({gt}, {gt}, 2);
  EXPECT_DOUBLE_EQ(r.mean, 1.0);
  for (int c = 0; c <= 2; ++c) {
    EXPECT_TRUE(r.counted[static_cast<std::size_t>(c)]);
    EXPECT_DOUBLE_EQ(r.per_class[static_cast<std::size_t>(c)], 1.0);
  }
}

TEST(Miou, HandComputedCase) {
  // 10 pixels, classes {0,1}. gt: class 1 on first 6 pixels.
  // pred: class 1 on pixels 2..7 -> intersection 4, union 8 for class 1;
  // background: intersection 2, union 6.
  LabelMap gt = map_from({1, 1, 1, 1, 1, 1, 0, 0, 0, 0}, 1, 10);
  LabelMap pred = map_from({0, 0, 1, 1, 1, 1, 1, 1, 0, 0}, 1, 10);
  MiouResult r = eval_miou({pred}, {gt}, 1);
  EXPECT_DOUBLE_EQ(r.per_class[1], 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.mean, (0.5 + 1.0 / 3.0) / 2.0);
}

TEST(Miou, ClassAbsentEverywhereIsSkipped) {
  LabelMap gt = map_from({0, 1, 1, 0}, 2, 2);
  MiouResult r = eval_miou({gt}, {gt}, 3);
  EXPECT_TRUE(r.counted[0]);
  EXPECT_TRUE(r.counted[1]);
  EXPECT_FALSE(r.counted[2]);
  EXPECT_FALSE(r.counted[3]);
  EXPECT_DOUBLE_EQ(r.mean, 1.0);
}

TEST(Miou, AggregatesAcrossImagesBeforeDividing) {
  // Image A: class 1 predicted perfectly (1 px). Image B: 1 px gt missed,
  // 1 px false positive. Aggregated: inter 1, union 3 -> 1/3, not the
  // average of per-image IoUs.
  LabelMap gt_a = map_from({1}, 1, 1);
  LabelMap gt_b = map_from({1, 0}, 1, 2);
  LabelMap pr_b = map_from({0, 1}, 1, 2);
  MiouResult r = eval_miou({gt_a, pr_b}, {gt_a, gt_b}, 1);
  EXPECT_DOUBLE_EQ(r.per_class[1], 1.0 / 3.0);
}

TEST(Miou, ShapeMismatchIsAnError) {
  LabelMap a = map_from({0}, 1, 1);
  LabelMap b = map_from({0, 0}, 1, 2);
  EXPECT_THROW(eval_miou({a}, {b}, 1), Error);
  EXPECT_THROW(eval_miou({a, a}, {a}, 1), Error);
}

TEST(MaskIou, HandCase) {
  std::vector<std::uint8_t> a = {1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  std::vector<std::uint8_t> b = {0, 0, 1, 1, 1, 1, 1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(mask_iou(a, b), 0.5);
  EXPECT_DOUBLE_EQ(mask_iou(a, a), 1.0);
  std::vector<std::uint8_t> z(10, 0);
  EXPECT_DOUBLE_EQ(mask_iou(a, z), 0.0);
  EXPECT_DOUBLE_EQ(mask_iou(z, z), 0.0);
}

// Builders for instance-level cases: the image is a row of 8 disjoint
// 4-pixel tiles; gt i occupies tile i.
std::vector<std::uint8_t> tile_mask(int tile) {
  std::vector<std::uint8_t> m(32, 0);
  for (int i = 0; i < 4; ++i) m[static_cast<std::size_t>(tile * 4 + i)] = 1;
  return m;
}

std::vector<std::uint8_t> partial_tile_mask(int tile, int pixels) {
  std::vector<std::uint8_t> m(32, 0);
  for (int i = 0; i < pixels; ++i) m[static_cast<std::size_t>(tile * 4 + i)] = 1;
  return m;
}

TEST(EvalMap, PerfectPredictionsScoreOne) {
  std::vector<GtInstance> gts = {{1, tile_mask(0)}, {1, tile_mask(1)},
                                 {2, tile_mask(2)}};
  std::vector<InstancePrediction> preds;
  for (const auto& g : gts)
    preds.push_back({Box{}, g.cls, 0.9f, g.mask});
  auto res = eval_map_r({preds}, {gts}, 2, {0.5, 0.7});
  EXPECT_DOUBLE_EQ(res[0], 1.0);
  EXPECT_DOUBLE_EQ(res[1], 1.0);
}

TEST(EvalMap, ThresholdStraddle) {
  // Predicted mask covers 3 of 4 gt pixels plus nothing else: IoU = 0.75.
  std::vector<GtInstance> gts = {{1, tile_mask(0)}};
  std::vector<InstancePrediction> preds = {
      {Box{}, 1, 0.9f, partial_tile_mask(0, 3)}};
  auto res = eval_map_r({preds}, {gts}, 1, {0.5, 0.75, 0.8});
  EXPECT_DOUBLE_EQ(res[0], 1.0);  // TP at 0.5
  EXPECT_DOUBLE_EQ(res[1], 1.0);  // boundary counts (>= threshold)
  EXPECT_DOUBLE_EQ(res[2], 0.0);  // FP at 0.8
}

TEST(EvalMap, DuplicateDetectionIsFalsePositive) {
  std::vector<GtInstance> gts = {{1, tile_mask(0)}};
  std::vector<InstancePrediction> preds = {
      {Box{}, 1, 0.9f, tile_mask(0)},
      {Box{}, 1, 0.8f, tile_mask(0)},  // same gt already claimed
  };
  auto res = eval_map_r({preds}, {gts}, 1, {0.5});
  // Full recall reached before the duplicate, so AP stays 1.
  EXPECT_DOUBLE_EQ(res[0], 1.0);
}

TEST(EvalMap, LowScoredTruePositiveBehindFalsePositive) {
  std::vector<GtInstance> gts = {{1, tile_mask(0)}};
  std::vector<InstancePrediction> preds = {
      {Box{}, 1, 0.9f, tile_mask(5)},  // miss
      {Box{}, 1, 0.4f, tile_mask(0)},  // hit, ranked second
  };
  auto res = eval_map_r({preds}, {gts}, 1, {0.5});
  EXPECT_DOUBLE_EQ(res[0], 0.5);  // precision 1/2 at full recall
}

TEST(EvalMap, ClassesAreSeparated) {
  // A class-2 prediction cannot claim a class-1 gt.
  std::vector<GtInstance> gts = {{1, tile_mask(0)}};
  std::vector<InstancePrediction> preds = {{Box{}, 2, 0.9f, tile_mask(0)}};
  auto res = eval_map_r({preds}, {gts}, 2, {0.5});
  EXPECT_DOUBLE_EQ(res[0], 0.0);
}

TEST(EvalMap, MatchesIndependentApOnRandomCases) {
  Rng rng(77);
  for (int it = 0; it < 1200; ++it) {
    const int n_gt = rng.uniform_int(1, 5);
    std::vector<GtInstance> gts;
    for (int g = 0; g < n_gt; ++g) gts.push_back({1, tile_mask(g)});
    // Predictions either nail one distinct gt or hit an empty tile.
    const int n_pred = rng.uniform_int(0, 7);
    std::vector<InstancePrediction> preds;
    std::vector<int> hits;  // gt index or -1
    std::vector<bool> used(static_cast<std::size_t>(n_gt), false);
    for (int i = 0; i < n_pred; ++i) {
      int pick = rng.uniform_int(-2, n_gt - 1);
      if (pick >= 0 && !used[static_cast<std::size_t>(pick)]) {
        used[static_cast<std::size_t>(pick)] = true;
        hits.push_back(pick);
        preds.push_back({Box{}, 1, 0.0f, tile_mask(pick)});
      } else {
        hits.push_back(-1);
        preds.push_back({Box{}, 1, 0.0f, tile_mask(6 + (i & 1))});
      }
      // Distinct scores so the ranking is unambiguous.
      preds.back().score = 1.0f - 0.01f * static_cast<float>(i);
    }
    auto res = eval_map_r({preds}, {gts}, 1, {0.5});
    std::vector<int> tp_ranked;
    for (int h : hits) tp_ranked.push_back(h >= 0 ? 1 : 0);
    double want = oracle::ap_ref(tp_ranked, n_gt);
    EXPECT_NEAR(res[0], want, 1e-9) << "case " << it;
  }
}

TEST(EvalMap, MonotoneInThreshold) {
  Rng rng(78);
  for (int it = 0; it < 300; ++it) {
    const int n_gt = rng.uniform_int(1, 4);
    std::vector<GtInstance> gts;
    for (int g = 0; g < n_gt; ++g) gts.push_back({1, tile_mask(g)});
    std::vector<InstancePrediction> preds;
    const int n_pred = rng.uniform_int(1, 6);
    for (int i = 0; i < n_pred; ++i) {
      int tile = rng.uniform_int(0, 7);
      preds.push_back({Box{}, 1, rng.uniform(0.1f, 1.0f),
                       partial_tile_mask(tile, rng.uniform_int(1, 4))});
    }
    auto res = eval_map_r({preds}, {gts}, 1, {0.25, 0.5, 0.75, 1.0});
    for (std::size_t t = 1; t < res.size(); ++t)
      EXPECT_LE(res[t], res[t - 1] + 1e-12) << "case " << it;
  }
}

}  // namespace
}  // namespace boxseg
