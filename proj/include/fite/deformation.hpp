#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "fite/neighbors.hpp"
#include "fite/nn/module.hpp"
#include "fite/nn/unet.hpp"
#include "fite/posemap.hpp"
#include "fite/scan.hpp"

namespace fite {

struct SharedNetsConfig {
  int c_pose = 16;
  int c_geom = 64;
  int unet_base = 8;
  int decoder_width = 256;
  int decoder_layers = 8;
  int corrector_width = 128;
  int corrector_layers = 4;
  int image_size = 128;
  double tilt = 15.0 * M_PI / 180.0;
};

// Networks shared across outfits: pose-agnostic template corrector C,
// per-view encoders U_d, deformation decoder D. The decoder emits the
// pose-dependent offset and a residual to the canonical template normal.
struct SharedNets {
  SharedNetsConfig cfg;
  std::unique_ptr<nn::Sequential> corrector;                  // c_geom -> 3
  std::array<std::unique_ptr<nn::UNetEncoder>, 4> encoders;   // 3 -> c_pose, one per view
  std::unique_ptr<nn::Sequential> decoder;                    // 4*c_pose + c_geom -> 6

  SharedNets(const SharedNetsConfig& config, uint64_t seed);

  void zero_params();
  std::vector<nn::ParamSegment> segments();
  uint64_t param_hash();
  void save(const std::string& path);
  static SharedNets load(const std::string& path);
};

struct OutfitAvatar {
  int outfit_id = 0;
  TemplateMesh template_mesh;
  std::vector<Vec3> template_points;   // p^c_k sampled on the template
  std::vector<Vec3> template_normals;  // canonical surface normals at p^c_k
  MatXR point_skinning;                // N_c x J
  MatXR geo_features;                  // N_c x c_geom, learnable
  MatXR geo_grads;                     // gradient buffer, same shape

  long point_count() const { return long(template_points.size()); }
  std::vector<nn::ParamSegment> feature_segments();
  void validate() const;
};

OutfitAvatar make_avatar(const TemplateMesh& tmpl, const SkinningField& field, long n_points,
                         int c_geom, int outfit_id, uint64_t seed);

void save_avatar(const std::string& dir, const OutfitAvatar& avatar);
OutfitAvatar load_avatar(const std::string& dir);

struct PredictedCloud {
  std::vector<Vec3> points;    // q_k
  std::vector<Vec3> normals;   // unit n_k
  std::vector<Vec3> correction;       // c_k diagnostics
  std::vector<Vec3> residual_canonical;  // r^c_k
  std::vector<Vec3> residual;         // r_k
};

// Position maps of the avatar template for one pose, plus the shared view
// setup (derived from the template bounds, pose-independent).
struct RenderedPoseMaps {
  ViewConfig views;
  std::vector<PositionMap> maps;  // 4
};

RenderedPoseMaps render_pose_maps(const OutfitAvatar& avatar, const Skeleton& skeleton,
                                  const Pose& pose, int image_size, double tilt);

// Full prediction pipeline (Eq. structure: warp corrected template points,
// add rotated pose-dependent residuals). Maps may be passed in when cached.
PredictedCloud predict(const OutfitAvatar& avatar, SharedNets& nets, const Skeleton& skeleton,
                       const Pose& pose, const RenderedPoseMaps* cached_maps = nullptr);

struct LossWeights {
  double point = 1e4;
  double normal = 1.0;
  double correction_reg = 1e3;
  double residual_reg = 1e3;
  double feature_reg = 1.0;
};

// Point loss: mean squared normal-projected distance from predictions to
// their (Euclidean) nearest ground-truth points, plus mean squared distance
// from ground truth to nearest predictions.
double loss_point(const PredictedCloud& pred, const PointCloudN& gt);
double loss_point(const std::vector<Vec3>& pred_points, const PointCloudN& gt,
                  const GridNN& gt_index);

// Mean L1 difference between predicted normals and the normals of their
// nearest ground-truth points.
double loss_normal(const PredictedCloud& pred, const PointCloudN& gt);

struct LossBreakdown {
  double point = 0, normal = 0, correction = 0, residual = 0, feature = 0;
  double total = 0;
};

// One training-ready frame: avatar reference, pose, resampled ground truth
// with its spatial index, and the pre-rendered (pose-fixed) position maps.
struct Stage2Frame {
  int avatar_index = 0;
  Pose pose;
  PointCloudN gt;
  std::shared_ptr<GridNN> gt_index;
  std::shared_ptr<RenderedPoseMaps> maps;
};

Stage2Frame prepare_stage2_frame(const std::vector<OutfitAvatar>& avatars,
                                 const std::vector<int>& avatar_by_outfit_id,
                                 const ScanFrame& frame, const Skeleton& skeleton,
                                 const SharedNetsConfig& cfg, long gt_samples, uint64_t seed);

// Forward + full backward of the weighted loss on a subset of template
// points. Accumulates gradients into the nets and the avatar's geo feature
// buffer; returns the loss breakdown. Gradients do not flow through the
// rasterized maps.
LossBreakdown stage2_step_gradients(const OutfitAvatar& avatar, MatXR& geo_grads,
                                    SharedNets& nets, const Skeleton& skeleton,
                                    const Stage2Frame& frame,
                                    const std::vector<long>& point_subset,
                                    const LossWeights& weights);

struct Stage2Schedule {
  long epochs = 25;
  long point_batch = 1024;
  double lr = 1e-3;      // shared nets
  double lr_geo = 1e-2;  // per-point features
  LossWeights loss;
  uint64_t seed = 1;
};

struct Stage2Result {
  std::vector<double> loss_curve;  // mean total loss per epoch
  double final_loss = 0;
};

// Multi-outfit training: epoch loop over frames (seeded shuffle); each step
// updates the shared nets and the active frame's avatar features. The
// optional callback runs after every epoch (checkpointing).
Stage2Result train_stage2(std::vector<OutfitAvatar>& avatars, SharedNets& nets,
                          const Skeleton& skeleton, const std::vector<Stage2Frame>& frames,
                          const Stage2Schedule& schedule,
                          const std::function<void(long epoch)>& epoch_callback = {});

struct FitResult {
  MatXR features;
  double initial_point_loss = 0;
  double final_point_loss = 0;
  uint64_t nets_hash_before = 0;
  uint64_t nets_hash_after = 0;
};

// Novel-scan fitting: networks frozen, a fresh zero-initialized feature matrix
// is optimized against a single scan.
FitResult fit_novel_scan(SharedNets& nets, const OutfitAvatar& base_avatar,
                         const ScanFrame& scan, const Skeleton& skeleton, long steps,
                         double lr, long point_batch, const LossWeights& weights,
                         uint64_t seed);

}  // namespace fite
