#include "lsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsr/error.hpp"

namespace lsr {

double l1_metric(const NormalizedImage& pred, const NormalizedImage& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ConfigError("l1_metric: shape mismatch " + std::to_string(pred.rows()) + "x" +
                      std::to_string(pred.cols()) + " vs " + std::to_string(truth.rows()) + "x" +
                      std::to_string(truth.cols()));
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i)
    acc += std::abs(static_cast<double>(pred.data[i]) - truth.data[i]);
  return acc / static_cast<double>(pred.data.size());
}

RocCurve roc_from_scores(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw ConfigError("roc: score/label size mismatch");
  const std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    throw ConfigError("roc: degenerate evaluation set (" + std::to_string(pos) + " positives, " +
                      std::to_string(neg) + " negatives)");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  RocCurve curve;
  curve.points.push_back({scores[order[0]] + 1.0, 0.0, 0.0});  // above every score
  std::size_t tp = 0, fp = 0;
  double auc = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == s) {
      if (labels[order[j]]) ++tp; else ++fp;
      ++j;
    }
    const double fpr = static_cast<double>(fp) / neg;
    const double tpr = static_cast<double>(tp) / pos;
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
    curve.points.push_back({s, fpr, tpr});
    prev_fpr = fpr;
    prev_tpr = tpr;
    i = j;
  }
  curve.auc = auc;
  return curve;
}

RocCurve roc_auc(const VoxelGrid& pred, const VoxelGrid& truth) {
  if (!pred.config().congruent(truth.config()))
    throw ConfigError("roc: grids are not congruent (origin/resolution/dims differ)");

  std::vector<double> scores;
  std::vector<bool> labels;
  const GridConfig& cfg = truth.config();
  for (int z = 0; z < static_cast<int>(cfg.nz); ++z)
    for (int y = 0; y < static_cast<int>(cfg.ny); ++y)
      for (int x = 0; x < static_cast<int>(cfg.nx); ++x) {
        const VoxelIndex v{x, y, z};
        const VoxelState ts = truth.state(v);
        if (ts == VoxelState::Unknown) continue;
        scores.push_back(pred.occupancy(v));  // untouched reads 0.5
        labels.push_back(ts == VoxelState::Occupied);
      }
  return roc_from_scores(scores, labels);
}

double removed_points_pct(const McResult& result) {
  std::size_t positive = 0, removed = 0;
  for (std::size_t i = 0; i < result.mean.data.size(); ++i) {
    if (result.mean.data[i] > 0.0f) {
      ++positive;
      if (result.final.data[i] == 0.0f) ++removed;
    }
  }
  if (positive == 0) return 0.0;  // callers warn; nothing was predicted
  return 100.0 * static_cast<double>(removed) / static_cast<double>(positive);
}

}  // namespace lsr
