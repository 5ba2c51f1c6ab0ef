#include "boxseg/metrics.hpp"

#include <algorithm>

#include "boxseg/common.hpp"

namespace boxseg {

double mask_iou(const std::vector<std::uint8_t>& a,
                const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size())
    throw Error(detail::cat("mask_iou: size mismatch ", a.size(), " vs ",
                            b.size()));
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool pa = a[i] != 0, pb = b[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MiouResult eval_miou(const std::vector<LabelMap>& pred,
                     const std::vector<LabelMap>& gt, int num_classes) {
  if (pred.size() != gt.size())
    throw Error(detail::cat("eval_miou: ", pred.size(), " predictions vs ",
                            gt.size(), " ground truths"));
  if (pred.empty()) throw Error("eval_miou: no images");
  std::vector<long> inter(static_cast<std::size_t>(num_classes) + 1, 0);
  std::vector<long> uni(static_cast<std::size_t>(num_classes) + 1, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const LabelMap& p = pred[i];
    const LabelMap& g = gt[i];
    if (p.h != g.h || p.w != g.w)
      throw Error(detail::cat("eval_miou: image ", i, " is ", p.w, "x", p.h,
                              " predicted vs ", g.w, "x", g.h, " labelled"));
    for (std::size_t k = 0; k < p.data.size(); ++k) {
      int pc = p.data[k], gc = g.data[k];
      if (pc < 0 || pc > num_classes || gc < 0 || gc > num_classes)
        throw Error(detail::cat("eval_miou: label out of range on image ", i));
      if (pc == gc) {
        ++inter[static_cast<std::size_t>(pc)];
        ++uni[static_cast<std::size_t>(pc)];
      } else {
        ++uni[static_cast<std::size_t>(pc)];
        ++uni[static_cast<std::size_t>(gc)];
      }
    }
  }
  MiouResult r;
  r.per_class.assign(static_cast<std::size_t>(num_classes) + 1, 0.0);
  r.counted.assign(static_cast<std::size_t>(num_classes) + 1, false);
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c <= num_classes; ++c) {
    auto ci = static_cast<std::size_t>(c);
    if (uni[ci] == 0) continue;
    r.per_class[ci] = static_cast<double>(inter[ci]) / static_cast<double>(uni[ci]);
    r.counted[ci] = true;
    sum += r.per_class[ci];
    ++counted;
  }
  r.mean = counted > 0 ? sum / counted : 0.0;
  return r;
}

namespace {

struct RankedPred {
  float score;
  std::size_t image, index;
};

double average_precision(const std::vector<std::uint8_t>& tp, long n_gt) {
  if (n_gt == 0) return 0.0;
  std::size_t n = tp.size();
  std::vector<double> prec(n), rec(n);
  long cum_tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cum_tp += tp[i];
    prec[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(cum_tp) / static_cast<double>(n_gt);
  }
  // All-points interpolation: integrate recall steps against the running
  // maximum of precision to the right.
  double ap = 0.0, best = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    best = std::max(best, prec[i]);
    double prev_rec = i == 0 ? 0.0 : rec[i - 1];
    ap += (rec[i] - prev_rec) * best;
  }
  return ap;
}

}  // namespace

std::vector<double> eval_map_r(
    const std::vector<std::vector<InstancePrediction>>& preds,
    const std::vector<std::vector<GtInstance>>& gts, int num_classes,
    const std::vector<double>& thresholds) {
  if (preds.size() != gts.size())
    throw Error(detail::cat("eval_map_r: ", preds.size(), " predictions vs ",
                            gts.size(), " ground truths"));
  if (thresholds.empty()) throw Error("eval_map_r: no thresholds");
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double thresh : thresholds) {
    double ap_sum = 0.0;
    int classes_counted = 0;
    for (int cls = 1; cls <= num_classes; ++cls) {
      std::vector<RankedPred> ranked;
      long n_gt = 0;
      for (std::size_t img = 0; img < preds.size(); ++img) {
        for (std::size_t k = 0; k < preds[img].size(); ++k)
          if (preds[img][k].cls == cls)
            ranked.push_back({preds[img][k].score, img, k});
        for (const auto& g : gts[img]) n_gt += g.cls == cls;
      }
      if (n_gt == 0) continue;  // recall undefined for this class
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const RankedPred& a, const RankedPred& b) {
                         return a.score > b.score;
                       });
      std::vector<std::vector<bool>> claimed(gts.size());
      for (std::size_t img = 0; img < gts.size(); ++img)
        claimed[img].assign(gts[img].size(), false);
      std::vector<std::uint8_t> tp(ranked.size(), 0);
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& rp = ranked[i];
        const auto& mask = preds[rp.image][rp.index].mask;
        double best = 0.0;
        std::size_t best_gt = gts[rp.image].size();
        for (std::size_t g = 0; g < gts[rp.image].size(); ++g) {
          if (gts[rp.image][g].cls != cls || claimed[rp.image][g]) continue;
          double iou = mask_iou(mask, gts[rp.image][g].mask);
          if (iou > best) {
            best = iou;
            best_gt = g;
          }
        }
        if (best_gt < gts[rp.image].size() && best >= thresh) {
          tp[i] = 1;
          claimed[rp.image][best_gt] = true;
        }
      }
      ap_sum += average_precision(tp, n_gt);
      ++classes_counted;
    }
    out.push_back(classes_counted > 0 ? ap_sum / classes_counted : 0.0);
  }
  return out;
}

}  // namespace boxseg
