#include "fite/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "fite/errors.hpp"
#include "fite/neighbors.hpp"

namespace fite {

namespace fs = std::filesystem;

double chamfer_l2(const PointCloudN& a, const PointCloudN& b) {
  if (a.points.empty() || b.points.empty()) throw InvalidInputError("chamfer: empty cloud");
  GridNN nn_b(b.points), nn_a(a.points);
  double ab = 0, ba = 0;
  for (const Vec3& p : a.points) ab += nn_b.nearest(p).dist2;
  for (const Vec3& p : b.points) ba += nn_a.nearest(p).dist2;
  return ab / double(a.points.size()) + ba / double(b.points.size());
}

double cosine_similarity(const PointCloudN& a, const PointCloudN& b) {
  if (a.points.empty() || b.points.empty()) throw InvalidInputError("cosine: empty cloud");
  GridNN nn_b(b.points), nn_a(a.points);
  double sab = 0, sba = 0;
  for (size_t i = 0; i < a.points.size(); ++i)
    sab += a.normals[i].dot(b.normals[nn_b.nearest(a.points[i]).index]);
  for (size_t i = 0; i < b.points.size(); ++i)
    sba += b.normals[i].dot(a.normals[nn_a.nearest(b.points[i]).index]);
  return 0.5 * (sab / double(a.points.size()) + sba / double(b.points.size()));
}

EvalReport evaluate_run(const std::string& predictions_dir, const std::string& manifest_path) {
  DatasetManifest manifest = load_manifest(manifest_path);
  std::string base = manifest_dir(manifest_path);

  // test split when present, otherwise every frame
  std::vector<FrameEntry> targets;
  for (const FrameEntry& e : manifest.frames)
    if (!e.train) targets.push_back(e);
  if (targets.empty()) targets = manifest.frames;

  EvalReport report;
  std::map<std::string, EvalReport::OutfitSummary> by_outfit;
  double sum_d = 0, sum_s = 0;
  long counted = 0;
  for (const FrameEntry& e : targets) {
    FrameEval fe;
    fe.frame_index = e.index;
    fe.outfit = outfit_kind_name(e.outfit_kind);
    char name[64];
    std::snprintf(name, sizeof(name), "frame_%04d.ply", e.index);
    fs::path pred_path = fs::path(predictions_dir) / name;
    if (!fs::exists(pred_path)) {
      fe.missing = true;
      report.missing_frames.push_back(e.index);
      report.frames.push_back(fe);
      continue;
    }
    PlyData pred = load_ply(pred_path.string());
    PointCloudN pred_cloud;
    pred_cloud.points = pred.positions;
    pred_cloud.normals = pred.normals;
    for (Vec3& n : pred_cloud.normals) {
      double len = n.norm();
      if (len > 0) n /= len;
    }
    ScanFrame gt = load_frame((fs::path(base) / e.dir).string());
    fe.d_cham = chamfer_l2(pred_cloud, gt.cloud);
    fe.s_cos = cosine_similarity(pred_cloud, gt.cloud);
    report.frames.push_back(fe);

    auto& summary = by_outfit[fe.outfit];
    summary.outfit = fe.outfit;
    summary.mean_d_cham += fe.d_cham;
    summary.mean_s_cos += fe.s_cos;
    summary.count++;
    sum_d += fe.d_cham;
    sum_s += fe.s_cos;
    counted++;
  }
  for (auto& [name, summary] : by_outfit) {
    summary.mean_d_cham /= double(summary.count);
    summary.mean_s_cos /= double(summary.count);
    report.outfits.push_back(summary);
  }
  if (counted > 0) {
    report.mean_d_cham = sum_d / double(counted);
    report.mean_s_cos = sum_s / double(counted);
  }
  return report;
}

void save_report(const std::string& path, const EvalReport& report) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write report: " + path);
  char buf[256];
  for (const FrameEval& fe : report.frames) {
    if (fe.missing) {
      std::snprintf(buf, sizeof(buf), "frame %04d outfit %s MISSING\n", fe.frame_index,
                    fe.outfit.c_str());
    } else {
      std::snprintf(buf, sizeof(buf), "frame %04d outfit %s d_cham_x1e5 %.6f s_cos %.6f\n",
                    fe.frame_index, fe.outfit.c_str(), fe.d_cham * 1e5, fe.s_cos);
    }
    f << buf;
  }
  f << "summary\n";
  for (const auto& s : report.outfits) {
    std::snprintf(buf, sizeof(buf),
                  "outfit %s frames %ld mean_d_cham_x1e5 %.6f mean_s_cos %.6f\n",
                  s.outfit.c_str(), s.count, s.mean_d_cham * 1e5, s.mean_s_cos);
    f << buf;
  }
  std::snprintf(buf, sizeof(buf), "overall mean_d_cham_x1e5 %.6f mean_s_cos %.6f missing %zu\n",
                report.mean_d_cham * 1e5, report.mean_s_cos, report.missing_frames.size());
  f << buf;
}

}  // namespace fite
