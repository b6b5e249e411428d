#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lsr/geometry.hpp"
#include "lsr/upscale.hpp"
#include "lsr/voxel_grid.hpp"

namespace lsr {

// Mean absolute error over all pixels, in normalized units.
double l1_metric(const NormalizedImage& pred, const NormalizedImage& truth);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), thresholds descending
  double auc = 0.0;
};

// Occupied-vs-free classification of the prediction grid against the truth
// grid. Voxels with unknown truth state are excluded (they admit no label);
// unknown predicted voxels score 0.5. Ties share one sweep step; AUC by the
// trapezoidal rule. Throws on degenerate truth (no positives or negatives).
RocCurve roc_auc(const VoxelGrid& pred, const VoxelGrid& truth);

// Same sweep over explicit (score, label) pairs; used by grid ROC and tests.
RocCurve roc_from_scores(const std::vector<double>& scores, const std::vector<bool>& labels);

double removed_points_pct(const McResult& result);

struct MethodMetrics {
  std::string method;
  std::optional<double> l1;           // normalized units; absent for baseline
  std::optional<double> removed_pct;  // nn-mc only
  std::optional<double> auc;
  std::optional<double> ms_per_image;
  int scan_count = 0;
};

}  // namespace lsr
