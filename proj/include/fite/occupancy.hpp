#pragma once

#include <memory>
#include <vector>

#include "fite/nn/module.hpp"
#include "fite/scan.hpp"
#include "fite/skinning_field.hpp"

namespace fite {

struct OccupancyNetConfig {
  int hidden = 128;
  int layers = 6;  // hidden layers; softplus activations, sigmoid output
};

// Pose-conditioned canonical occupancy field f(p, theta) in (0,1). The network
// consumes raw coordinates concatenated with the raw pose vector.
class OccupancyField {
 public:
  OccupancyField(int joint_count, const OccupancyNetConfig& config, uint64_t seed);

  int joint_count() const { return joints_; }
  int pose_embedding_dim() const { return 3 * joints_; }
  const OccupancyNetConfig& config() const { return cfg_; }
  nn::Sequential& net() { return *net_; }

  MatXR make_inputs(const std::vector<Vec3>& points, const Pose& pose) const;
  VecX logits(const std::vector<Vec3>& points, const Pose& pose);
  double evaluate(const Vec3& p, const Pose& pose);  // strictly in (0,1)

  void save(const std::string& path);
  static OccupancyField load(const std::string& path);

 private:
  int joints_;
  OccupancyNetConfig cfg_;
  std::unique_ptr<nn::Sequential> net_;
};

struct TrainSample {
  Vec3 canonical;
  int label;  // 0/1
};

// Canonical points (Gaussian-perturbed canonical-surface anchors plus uniform
// draws in the field bbox) warped by the diffused weights and labeled against
// the frame's posed mesh.
std::vector<TrainSample> sample_training_batch(const ScanFrame& frame,
                                               const MeshOccupancy& frame_occupancy,
                                               const Skeleton& skeleton,
                                               const SkinningField& field,
                                               const PointCloudN& canonical_anchor,
                                               long near_count, long uniform_count,
                                               double near_sigma, uint64_t seed);

struct Stage1Schedule {
  long steps = 5000;
  long batch = 512;
  double lr = 1e-3;
  double near_fraction = 0.5;
  double near_sigma = 0.05;  // meters
  long log_every = 250;
  uint64_t seed = 1;
};

struct TrainedStage1 {
  std::shared_ptr<OccupancyField> field;
  std::vector<double> loss_curve;  // mean batch BCE at log points
  double final_bce = 0;
};

// Stage-one training: pure occupancy regression with the skinning fixed.
// Frames are canonically reordered internally, so the caller's frame order
// does not affect the result. Throws TrainingError when the loss goes
// non-finite.
TrainedStage1 train_occupancy(const std::vector<ScanFrame>& frames, const Skeleton& skeleton,
                              const SkinningField& field, const PointCloudN& canonical_anchor,
                              const OccupancyNetConfig& net_config,
                              const Stage1Schedule& schedule);

// Argmin of the joint-rotation L1 norm; ties break to the lowest index.
Pose select_canonical_pose(const std::vector<Pose>& poses);
int select_canonical_pose_index(const std::vector<Pose>& poses);

struct TemplateMesh {
  TriMesh mesh;
  MatXR vertex_skinning;  // V x J, rows sum to 1

  void validate() const;
};

// Evaluate f(., theta0) on a dense grid over the skinning-field bbox, extract
// the 1/2 level set, keep the largest component, attach queried skinning.
TemplateMesh extract_template(OccupancyField& f, const Pose& canonical_pose,
                              const SkinningField& field, int resolution);

TemplateMesh attach_skinning(const TriMesh& mesh, const SkinningField& field);

void save_template(const std::string& ply_path, const TemplateMesh& tmpl);
TemplateMesh load_template(const std::string& ply_path);

// Intersection-over-union of thresholded predictions against labels.
double occupancy_iou(OccupancyField& f, const Pose& pose, const std::vector<TrainSample>& samples);

}  // namespace fite
