#include <doctest.h>

#include "fite/deformation.hpp"
#include "fite/diffusion.hpp"
#include "fite/errors.hpp"
#include "fite/synthetic_body.hpp"
#include "oracles.hpp"

using namespace fite;

namespace {

// shared small fixture: 2-bone chain body, its diffused field and a template
struct Fixture {
  CapsuleRig rig;
  SkinnedBody body;
  SkinningField field;
  TemplateMesh tmpl;
  SharedNetsConfig cfg;

  Fixture() {
    rig.skeleton.joint_count = 2;
    rig.skeleton.parent = {-1, 0};
    rig.skeleton.rest_positions = {Vec3(0, 0, 0), Vec3(0.3, 0, 0)};
    rig.capsules = {{Vec3(0, 0, 0), Vec3(0.3, 0, 0), 0.1},
                    {Vec3(0.3, 0, 0), Vec3(0.6, 0, 0), 0.08}};
    body = build_capsule_body(rig, 40, 0.1);

    DiffusionWeights lambdas;
    GridDims dims{40, 40, 40};
    Aabb box = skinning_field_bbox(body.mesh.bounds());
    DiffusionSolver solver(body, lambdas, dims, box, 10 * long(body.mesh.vertices.size()), 3);
    field = solver.solve();

    tmpl.mesh = body.mesh;
    tmpl.vertex_skinning.resize(body.mesh.vertices.size(), 2);
    for (size_t v = 0; v < body.mesh.vertices.size(); ++v)
      tmpl.vertex_skinning.row(v) = field.query(body.mesh.vertices[v]).transpose();

    cfg.c_pose = 4;
    cfg.c_geom = 8;
    cfg.unet_base = 4;
    cfg.decoder_width = 32;
    cfg.decoder_layers = 3;
    cfg.corrector_width = 16;
    cfg.corrector_layers = 2;
    cfg.image_size = 32;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

PointCloudN cloud_from(const std::vector<Vec3>& pts, const std::vector<Vec3>& normals) {
  PointCloudN c;
  c.points = pts;
  c.normals = normals;
  return c;
}

}  // namespace

TEST_SUITE("deformation") {

TEST_CASE("zero nets reproduce the plain LBS warp") {
  Fixture& f = fixture();
  OutfitAvatar avatar = make_avatar(f.tmpl, f.field, 1200, f.cfg.c_geom, 0, 5);
  SharedNets nets(f.cfg, 1);
  nets.zero_params();

  Pose pose = Pose::zero(2);
  pose.joint_rotations[1] = Vec3(0, 0.5, 0.3);
  PredictedCloud cloud = predict(avatar, nets, f.rig.skeleton, pose);

  auto transforms = forward_kinematics(f.rig.skeleton, pose);
  for (long k = 0; k < avatar.point_count(); ++k) {
    Vec3 expect = lbs_warp(avatar.template_points[k], row_span(avatar.point_skinning, k),
                           transforms);
    CHECK((cloud.points[k] - expect).norm() < 1e-12);
    CHECK(cloud.correction[k].norm() == 0.0);
    CHECK(cloud.residual[k].norm() == 0.0);
    CHECK(std::abs(cloud.normals[k].norm() - 1.0) < 1e-12);
  }

  // identity pose: q = p
  PredictedCloud id_cloud = predict(avatar, nets, f.rig.skeleton, Pose::zero(2));
  for (long k = 0; k < avatar.point_count(); ++k)
    CHECK((id_cloud.points[k] - avatar.template_points[k]).norm() < 1e-12);
}

TEST_CASE("root-only rotation rotates the canonical points exactly") {
  Fixture& f = fixture();
  OutfitAvatar avatar = make_avatar(f.tmpl, f.field, 1200, f.cfg.c_geom, 0, 6);
  SharedNets nets(f.cfg, 2);
  nets.zero_params();
  Pose pose = Pose::zero(2);
  pose.joint_rotations[0] = Vec3(0.4, -0.2, 0.9);
  Mat3 r = rodrigues(pose.joint_rotations[0]);
  PredictedCloud cloud = predict(avatar, nets, f.rig.skeleton, pose);
  for (long k = 0; k < avatar.point_count(); ++k)
    CHECK((cloud.points[k] - r * avatar.template_points[k]).norm() < 1e-9);
}

TEST_CASE("loss_point hand-computed example and brute force") {
  PredictedCloud pred;
  pred.points = {Vec3(1, 0, 0)};
  pred.normals = {Vec3(0, 0, 1)};
  PointCloudN gt = cloud_from({Vec3(0, 0, 0)}, {Vec3(0, 0, 1)});
  // point-to-plane term 0, reverse term 1
  CHECK(loss_point(pred, gt) == doctest::Approx(1.0).epsilon(1e-15));

  // identical clouds: zero
  PredictedCloud same;
  same.points = gt.points;
  same.normals = gt.normals;
  CHECK(loss_point(same, gt) == 0.0);

  // 200-point brute force
  Rng rng(17);
  PredictedCloud p2;
  PointCloudN g2;
  for (int i = 0; i < 200; ++i) {
    p2.points.push_back(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    p2.normals.push_back(Vec3(0, 0, 1));
    g2.points.push_back(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    Vec3 n(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    g2.normals.push_back(n.normalized());
  }
  double brute = 0;
  for (const Vec3& q : p2.points) {
    int j = oracle::brute_nearest(g2.points, q);
    double e = (q - g2.points[j]).dot(g2.normals[j]);
    brute += e * e / p2.points.size();
  }
  for (const Vec3& p : g2.points) {
    double d2;
    oracle::brute_nearest(p2.points, p, &d2);
    brute += d2 / g2.points.size();
  }
  CHECK(loss_point(p2, g2) == doctest::Approx(brute).epsilon(1e-13));
}

TEST_CASE("loss_normal examples and brute force") {
  PredictedCloud pred;
  pred.points = {Vec3(0.1, 0, 0)};
  pred.normals = {Vec3(0, 0, 1)};
  PointCloudN gt = cloud_from({Vec3(0, 0, 0)}, {Vec3(0, 0, -1)});
  CHECK(loss_normal(pred, gt) == doctest::Approx(2.0).epsilon(1e-15));

  PredictedCloud same;
  same.points = gt.points;
  same.normals = gt.normals;
  CHECK(loss_normal(same, gt) == 0.0);

  Rng rng(18);
  PredictedCloud p2;
  PointCloudN g2;
  for (int i = 0; i < 200; ++i) {
    p2.points.push_back(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    Vec3 n(rng.uniform(-1, 1), rng.uniform(-1, 1), 1);
    p2.normals.push_back(n.normalized());
    g2.points.push_back(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    Vec3 m(rng.uniform(-1, 1), rng.uniform(-1, 1), 1);
    g2.normals.push_back(m.normalized());
  }
  double brute = 0;
  for (size_t k = 0; k < p2.points.size(); ++k) {
    int j = oracle::brute_nearest(g2.points, p2.points[k]);
    brute += (p2.normals[k] - g2.normals[j]).cwiseAbs().sum() / p2.points.size();
  }
  CHECK(loss_normal(p2, g2) == doctest::Approx(brute).epsilon(1e-13));
}

TEST_CASE("stage2 gradients match finite differences through the full pipeline") {
  Fixture& f = fixture();
  std::vector<OutfitAvatar> avatars;
  avatars.push_back(make_avatar(f.tmpl, f.field, 1024, f.cfg.c_geom, 0, 7));
  OutfitAvatar& avatar = avatars[0];
  // small random features so the corrector path is active
  Rng frng(8);
  for (long i = 0; i < avatar.geo_features.size(); ++i)
    avatar.geo_features.data()[i] = frng.uniform(-0.3, 0.3);

  SharedNets nets(f.cfg, 3);

  // a synthetic ground-truth frame: the posed body sampled
  Pose pose = Pose::zero(2);
  pose.joint_rotations[1] = Vec3(0, 0, 0.4);
  std::vector<int> avatar_by_outfit = {0};
  ScanFrame frame;
  frame.pose = pose;
  frame.outfit_id = 0;
  {
    auto transforms = forward_kinematics(f.rig.skeleton, pose);
    frame.mesh.faces = f.body.mesh.faces;
    frame.mesh.vertices.resize(f.body.mesh.vertices.size());
    for (size_t v = 0; v < f.body.mesh.vertices.size(); ++v)
      frame.mesh.vertices[v] = lbs_warp(f.body.mesh.vertices[v],
                                        row_span(f.body.vertex_weights, long(v)), transforms);
  }
  Stage2Frame s2f = prepare_stage2_frame(avatars, avatar_by_outfit, frame, f.rig.skeleton,
                                         f.cfg, 800, 11);

  LossWeights weights;
  weights.point = 10.0;  // keep magnitudes gentle for finite differences
  weights.normal = 0.5;
  weights.correction_reg = 2.0;
  weights.residual_reg = 2.0;
  weights.feature_reg = 1.0;

  std::vector<long> subset;
  for (long i = 0; i < 64; ++i) subset.push_back(i * 7 % avatar.point_count());

  LossBreakdown base = stage2_step_gradients(avatar, avatar.geo_grads, nets, f.rig.skeleton,
                                             s2f, subset, weights);
  CHECK(base.total > 0);
  MatXR grads = avatar.geo_grads;

  // probe a handful of feature entries belonging to subset points
  Rng rng(12);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 8; ++trial) {
    long k = subset[rng.below(subset.size())];
    long c = long(rng.below(uint64_t(f.cfg.c_geom)));
    double g = grads(k, c);
    if (std::abs(g) < 1e-4) continue;  // skip uninformative entries
    double saved = avatar.geo_features(k, c);
    avatar.geo_features(k, c) = saved + h;
    LossBreakdown lp = stage2_step_gradients(avatar, avatar.geo_grads, nets, f.rig.skeleton,
                                             s2f, subset, weights);
    avatar.geo_features(k, c) = saved - h;
    LossBreakdown lm = stage2_step_gradients(avatar, avatar.geo_grads, nets, f.rig.skeleton,
                                             s2f, subset, weights);
    avatar.geo_features(k, c) = saved;
    double numeric = (lp.total - lm.total) / (2 * h);
    double rel = std::abs(numeric - g) / std::max({std::abs(numeric), std::abs(g), 1e-3});
    CHECK(rel < 1e-3);
    ++checked;
  }
  CHECK(checked >= 3);
}

TEST_CASE("pose-agnostic correction: c_k identical across poses") {
  Fixture& f = fixture();
  OutfitAvatar avatar = make_avatar(f.tmpl, f.field, 1024, f.cfg.c_geom, 0, 9);
  Rng rng(10);
  for (long i = 0; i < avatar.geo_features.size(); ++i)
    avatar.geo_features.data()[i] = rng.uniform(-0.5, 0.5);
  SharedNets nets(f.cfg, 4);

  PredictedCloud first = predict(avatar, nets, f.rig.skeleton, Pose::zero(2));
  for (int trial = 0; trial < 4; ++trial) {
    Pose pose = Pose::zero(2);
    pose.joint_rotations[0] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    pose.joint_rotations[1] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    PredictedCloud other = predict(avatar, nets, f.rig.skeleton, pose);
    for (long k = 0; k < avatar.point_count(); ++k) {
      CHECK(std::memcmp(first.correction[k].data(), other.correction[k].data(),
                        3 * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("gradients flow only to the active outfit's features") {
  Fixture& f = fixture();
  std::vector<OutfitAvatar> avatars;
  avatars.push_back(make_avatar(f.tmpl, f.field, 1024, f.cfg.c_geom, 0, 21));
  avatars.push_back(make_avatar(f.tmpl, f.field, 1024, f.cfg.c_geom, 1, 22));
  SharedNets nets(f.cfg, 5);

  ScanFrame frame;
  frame.pose = Pose::zero(2);
  frame.outfit_id = 1;
  frame.mesh = f.body.mesh;
  std::vector<int> avatar_by_outfit = {0, 1};
  Stage2Frame s2f = prepare_stage2_frame(avatars, avatar_by_outfit, frame, f.rig.skeleton,
                                         f.cfg, 600, 23);

  MatXR before0 = avatars[0].geo_features;
  Stage2Schedule schedule;
  schedule.epochs = 1;
  schedule.point_batch = 256;
  schedule.seed = 77;
  train_stage2(avatars, nets, f.rig.skeleton, {s2f}, schedule);
  CHECK((avatars[0].geo_features - before0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(avatars[1].geo_features.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("loss_total linearity in the weights") {
  Fixture& f = fixture();
  std::vector<OutfitAvatar> avatars;
  avatars.push_back(make_avatar(f.tmpl, f.field, 1024, f.cfg.c_geom, 0, 31));
  SharedNets nets(f.cfg, 6);
  nets.zero_params();

  ScanFrame frame;
  frame.pose = Pose::zero(2);
  frame.outfit_id = 0;
  frame.mesh = f.body.mesh;
  std::vector<int> avatar_by_outfit = {0};
  Stage2Frame s2f = prepare_stage2_frame(avatars, avatar_by_outfit, frame, f.rig.skeleton,
                                         f.cfg, 600, 33);
  std::vector<long> subset;
  for (long i = 0; i < 128; ++i) subset.push_back(i);

  // zero offsets and features: regularizers vanish
  LossWeights all;
  LossBreakdown zero_nets = stage2_step_gradients(avatars[0], avatars[0].geo_grads, nets,
                                                  f.rig.skeleton, s2f, subset, all);
  CHECK(zero_nets.correction == 0.0);
  CHECK(zero_nets.residual == 0.0);
  CHECK(zero_nets.feature == 0.0);

  // lambdas all zero except the point weight: total = w_p * L_p
  LossWeights only_p;
  only_p.point = 3.5;
  only_p.normal = only_p.correction_reg = only_p.residual_reg = only_p.feature_reg = 0;
  LossBreakdown lb = stage2_step_gradients(avatars[0], avatars[0].geo_grads, nets,
                                           f.rig.skeleton, s2f, subset, only_p);
  CHECK(lb.total == doctest::Approx(3.5 * lb.point).epsilon(1e-12));
}

TEST_CASE("fit_novel_scan: zero steps equals zero-feature forward; nets frozen") {
  Fixture& f = fixture();
  OutfitAvatar avatar = make_avatar(f.tmpl, f.field, 1024, f.cfg.c_geom, 0, 41);
  SharedNets nets(f.cfg, 7);

  ScanFrame scan;
  scan.pose = Pose::zero(2);
  scan.outfit_id = 0;
  scan.mesh = f.body.mesh;

  uint64_t hash_before = nets.param_hash();
  FitResult fit = fit_novel_scan(nets, avatar, scan, f.rig.skeleton, 0, 1e-2, 256, {}, 3);
  CHECK(fit.nets_hash_before == hash_before);
  CHECK(fit.nets_hash_after == hash_before);
  CHECK(fit.features.cwiseAbs().maxCoeff() == 0.0);  // zero steps: untouched features
  CHECK(fit.final_point_loss == doctest::Approx(fit.initial_point_loss));
}

TEST_CASE("training determinism under a fixed seed") {
  Fixture& f = fixture();
  auto run = [&] {
    std::vector<OutfitAvatar> avatars;
    avatars.push_back(make_avatar(f.tmpl, f.field, 1024, f.cfg.c_geom, 0, 51));
    SharedNets nets(f.cfg, 8);
    ScanFrame frame;
    frame.pose = Pose::zero(2);
    frame.outfit_id = 0;
    frame.mesh = f.body.mesh;
    std::vector<int> avatar_by_outfit = {0};
    Stage2Frame s2f = prepare_stage2_frame(avatars, avatar_by_outfit, frame, f.rig.skeleton,
                                           f.cfg, 500, 53);
    Stage2Schedule schedule;
    schedule.epochs = 2;
    schedule.point_batch = 128;
    schedule.seed = 99;
    train_stage2(avatars, nets, f.rig.skeleton, {s2f}, schedule);
    return nets.param_hash() ^ fnv1a(avatars[0].geo_features.data(),
                                     avatars[0].geo_features.size() * sizeof(double));
  };
  CHECK(run() == run());
}

}  // TEST_SUITE
