#pragma once

#include <string>
#include <vector>

#include "fite/scan.hpp"
#include "fite/types.hpp"

namespace fite {

// Symmetric Chamfer-L2: mean squared nearest-neighbor distance in both
// directions. Reported values are scaled by 1e5.
double chamfer_l2(const PointCloudN& a, const PointCloudN& b);

// Symmetric mean cosine between matched unit normals (matching by nearest
// point, both directions, averaged).
double cosine_similarity(const PointCloudN& a, const PointCloudN& b);

struct FrameEval {
  int frame_index = 0;
  std::string outfit;
  double d_cham = 0;  // raw (squared meters)
  double s_cos = 0;
  bool missing = false;
};

struct EvalReport {
  std::vector<FrameEval> frames;
  struct OutfitSummary {
    std::string outfit;
    double mean_d_cham = 0;
    double mean_s_cos = 0;
    long count = 0;
  };
  std::vector<OutfitSummary> outfits;
  double mean_d_cham = 0;
  double mean_s_cos = 0;
  std::vector<int> missing_frames;
};

// Predictions directory holds frame_%04d.ply files matched by index against
// the manifest's test frames (falls back to all frames when no test split
// exists). Missing predictions are listed and excluded from means.
EvalReport evaluate_run(const std::string& predictions_dir, const std::string& gt_manifest_path);

void save_report(const std::string& path, const EvalReport& report);

}  // namespace fite
