#include <doctest.h>

#include "fite/deformation.hpp"
#include "fite/diffusion.hpp"
#include "fite/scan.hpp"
#include "fite/synthetic_body.hpp"

using namespace fite;

namespace {

// end-to-end stage-2 fixture on the humanoid with tight scans; the template is
// the body itself with diffused skinning (stage one substituted by truth)
struct TrainFixture {
  CapsuleRig rig;
  SkinnedBody body;
  SkinningField field;
  TemplateMesh tmpl;
  SharedNetsConfig cfg;
  OutfitSpec outfit;
  std::vector<ScanFrame> frames;

  TrainFixture() {
    rig = humanoid_rig();
    BodyConfig body_cfg;
    body_cfg.mesh_resolution = 56;
    body = build_synthetic_body(body_cfg);
    GridDims dims{40, 40, 40};
    DiffusionSolver solver(body, {}, dims, skinning_field_bbox(body.mesh.bounds()),
                           10 * long(body.mesh.vertices.size()), 3);
    field = solver.solve();
    tmpl.mesh = body.mesh;
    tmpl.vertex_skinning.resize(body.mesh.vertices.size(), 10);
    for (size_t v = 0; v < body.mesh.vertices.size(); ++v)
      tmpl.vertex_skinning.row(v) = field.query(body.mesh.vertices[v]).transpose();

    cfg.c_pose = 8;
    cfg.c_geom = 16;
    cfg.unet_base = 4;
    cfg.decoder_width = 64;
    cfg.decoder_layers = 4;
    cfg.corrector_width = 32;
    cfg.corrector_layers = 3;
    cfg.image_size = 64;

    outfit.kind = OutfitKind::Tight;
    ScanGenConfig gen;
    gen.mesh_resolution = 64;
    gen.cloud_samples = 4096;
    std::vector<Pose> poses;
    poses.push_back(Pose::zero(10));
    Rng rng(40);
    for (int i = 0; i < 3; ++i) {
      Pose pose = Pose::zero(10);
      pose.joint_rotations[3] = Vec3(0, 0, rng.uniform(0.3, 0.5));
      pose.joint_rotations[5] = Vec3(0, 0, -rng.uniform(0.3, 0.5));
      pose.joint_rotations[7] = Vec3(rng.uniform(0.25, 0.45), 0, 0);
      pose.joint_rotations[9] = Vec3(rng.uniform(0.25, 0.45), 0, 0);
      poses.push_back(pose);
    }
    frames = generate_clothed_scans(rig, outfit, poses, gen, 41);
  }
};

TrainFixture& fixture() {
  static TrainFixture f;
  return f;
}

double baseline_point_loss(const OutfitAvatar& avatar, const SharedNetsConfig& cfg,
                           const Skeleton& skeleton, const Stage2Frame& frame) {
  SharedNets zero(cfg, 1);
  zero.zero_params();
  PredictedCloud lbs = predict(avatar, zero, skeleton, frame.pose, frame.maps.get());
  return loss_point(lbs.points, frame.gt, *frame.gt_index);
}

}  // namespace

TEST_SUITE("stage2") {

TEST_CASE("short training beats the zero-net LBS baseline") {
  TrainFixture& f = fixture();
  std::vector<OutfitAvatar> avatars;
  avatars.push_back(make_avatar(f.tmpl, f.field, 2048, f.cfg.c_geom, 0, 61));
  SharedNets nets(f.cfg, 62);
  std::vector<int> avatar_by_outfit = {0};

  std::vector<Stage2Frame> s2frames;
  for (const auto& frame : f.frames)
    s2frames.push_back(prepare_stage2_frame(avatars, avatar_by_outfit, frame, f.rig.skeleton,
                                            f.cfg, 2048, 63 + s2frames.size()));

  double base = 0;
  for (auto& s2f : s2frames) base += baseline_point_loss(avatars[0], f.cfg, f.rig.skeleton, s2f);
  base /= double(s2frames.size());

  Stage2Schedule schedule;
  schedule.epochs = 30;  // 4 frames -> 120 steps
  schedule.point_batch = 512;
  schedule.seed = 64;
  Stage2Result result = train_stage2(avatars, nets, f.rig.skeleton, s2frames, schedule);
  CHECK(result.loss_curve.size() == 30);

  double trained = 0;
  for (auto& s2f : s2frames) {
    PredictedCloud cloud = predict(avatars[0], nets, f.rig.skeleton, s2f.pose, s2f.maps.get());
    trained += loss_point(cloud.points, s2f.gt, *s2f.gt_index);
  }
  trained /= double(s2frames.size());
  CHECK(trained < base);

  // wrinkle recovery: the learned pose-dependent residual correlates with the
  // exact generator displacement on a bent training pose
  const Stage2Frame& bent = s2frames[1];
  PredictedCloud cloud = predict(avatars[0], nets, f.rig.skeleton, bent.pose, bent.maps.get());
  double dot = 0, nr = 0, nw = 0;
  for (long k = 0; k < avatars[0].point_count(); ++k) {
    Vec3 w = wrinkle_displacement_posed(f.outfit, f.rig, 0.17, bent.pose,
                                        avatars[0].template_points[k]);
    dot += cloud.residual[k].dot(w);
    nr += cloud.residual[k].squaredNorm();
    nw += w.squaredNorm();
  }
  double cos_sim = dot / std::max(1e-12, std::sqrt(nr * nw));
  MESSAGE("wrinkle cosine similarity: ", cos_sim);
  CHECK(cos_sim >= 0.7);
}

TEST_CASE("global-rotation consistency") {
  TrainFixture& f = fixture();
  OutfitAvatar avatar = make_avatar(f.tmpl, f.field, 2048, f.cfg.c_geom, 0, 71);

  Pose identity = Pose::zero(10);
  Pose rotated = Pose::zero(10);
  rotated.joint_rotations[0] = Vec3(0, M_PI, 0);  // 180 degrees about y
  Mat3 r = rodrigues(rotated.joint_rotations[0]);

  // zero nets: exact equivariance
  {
    SharedNets zero(f.cfg, 2);
    zero.zero_params();
    PredictedCloud a = predict(avatar, zero, f.rig.skeleton, identity);
    PredictedCloud b = predict(avatar, zero, f.rig.skeleton, rotated);
    for (long k = 0; k < avatar.point_count(); ++k)
      CHECK((b.points[k] - r * a.points[k]).norm() < 1e-9);
  }

  // small random nets: the point loss against rotated ground truth matches the
  // identity-pose loss within the position-map resampling tolerance
  {
    SharedNets nets(f.cfg, 3);
    for (auto& seg : nets.segments())
      for (long i = 0; i < seg.size; ++i) seg.values[i] *= 0.3;

    PointCloudN gt = sample_surface(f.frames[0].mesh, 4096, 81);
    PointCloudN gt_rot = gt;
    for (Vec3& p : gt_rot.points) p = r * p;
    for (Vec3& n : gt_rot.normals) n = r * n;

    PredictedCloud a = predict(avatar, nets, f.rig.skeleton, identity);
    PredictedCloud b = predict(avatar, nets, f.rig.skeleton, rotated);
    GridNN nn_a(gt.points), nn_b(gt_rot.points);
    double la = loss_point(a.points, gt, nn_a);
    double lb = loss_point(b.points, gt_rot, nn_b);
    ViewConfig views = ViewConfig::make_default(avatar.template_mesh.mesh.bounds(),
                                                f.cfg.image_size);
    double pixel_world = views.views[0].scale;
    CHECK(std::abs(std::sqrt(la) - std::sqrt(lb)) <= 2 * pixel_world);
  }
}

TEST_CASE("novel-scan fitting reduces the point loss with frozen nets") {
  TrainFixture& f = fixture();
  OutfitAvatar avatar = make_avatar(f.tmpl, f.field, 2048, f.cfg.c_geom, 0, 91);
  SharedNets nets(f.cfg, 92);

  // novel scan: same generator, unseen wrinkle phase and pose
  OutfitSpec novel = f.outfit;
  novel.wrinkle_phase = 1.234;
  Pose pose = Pose::zero(10);
  pose.joint_rotations[3] = Vec3(0, 0, 0.42);
  pose.joint_rotations[5] = Vec3(0, 0, -0.37);
  pose.joint_rotations[7] = Vec3(0.33, 0, 0);
  pose.joint_rotations[9] = Vec3(0.41, 0, 0);
  ScanGenConfig gen;
  gen.mesh_resolution = 64;
  gen.cloud_samples = 4096;
  auto novel_frames = generate_clothed_scans(f.rig, novel, {pose}, gen, 93);

  FitResult fit = fit_novel_scan(nets, avatar, novel_frames[0], f.rig.skeleton, 150, 1e-2, 512,
                                 {}, 94);
  CHECK(fit.nets_hash_before == fit.nets_hash_after);
  MESSAGE("fit: ", fit.initial_point_loss, " -> ", fit.final_point_loss);
  CHECK(fit.final_point_loss <= 0.7 * fit.initial_point_loss);
}

}  // TEST_SUITE
