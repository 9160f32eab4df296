#include "fite/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fite/deformation.hpp"
#include "fite/diffusion.hpp"
#include "fite/errors.hpp"
#include "fite/metrics.hpp"
#include "fite/nn/adam.hpp"
#include "fite/nn/gradcheck.hpp"
#include "fite/occupancy.hpp"
#include "fite/parallel.hpp"
#include "fite/pipeline.hpp"
#include "fite/png_io.hpp"
#include "fite/posemap.hpp"
#include "fite/scan.hpp"
#include "fite/synthetic_body.hpp"

namespace fite {

namespace fs = std::filesystem;

namespace {

void log(const std::string& msg) { std::fprintf(stderr, "[fite] %s\n", msg.c_str()); }

void apply_threads(const PipelineConfig& cfg) {
  if (cfg.threads > 0) set_thread_count(int(cfg.threads));
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

OutfitSpec outfit_spec_from_config(const PipelineConfig& cfg, OutfitKind kind, int id) {
  OutfitSpec spec;
  spec.kind = kind;
  spec.outfit_id = id;
  spec.offset = cfg.data_outfit_offset;
  spec.wrinkle_freq = cfg.data_wrinkle_freq;
  spec.wrinkle_amp_per_rad = cfg.data_wrinkle_amp;
  spec.wrinkle_phase = 0.4 * id;
  return spec;
}

SharedNetsConfig nets_config_from(const PipelineConfig& cfg) {
  SharedNetsConfig nc;
  nc.c_pose = int(cfg.nn_c_pose);
  nc.c_geom = int(cfg.nn_c_geom);
  nc.unet_base = int(cfg.nn_unet_base);
  nc.image_size = int(cfg.pm_size);
  nc.tilt = cfg.pm_tilt_deg * M_PI / 180.0;
  return nc;
}

LossWeights loss_weights_from(const PipelineConfig& cfg) {
  LossWeights w;
  w.point = cfg.loss_point_w;
  w.normal = cfg.loss_normal_w;
  w.correction_reg = cfg.loss_correction_reg;
  w.residual_reg = cfg.loss_residual_reg;
  w.feature_reg = cfg.loss_feature_reg;
  return w;
}

struct OutfitFrames {
  int outfit_id;
  OutfitKind kind;
  std::vector<ScanFrame> train_frames;
};

std::vector<OutfitFrames> load_train_frames(const DatasetManifest& manifest,
                                            const std::string& base) {
  std::vector<OutfitFrames> out;
  for (const FrameEntry& e : manifest.frames) {
    if (!e.train) continue;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const OutfitFrames& o) { return o.outfit_id == e.outfit_id; });
    if (it == out.end()) {
      out.push_back({e.outfit_id, e.outfit_kind, {}});
      it = out.end() - 1;
    }
    it->train_frames.push_back(load_frame((fs::path(base) / e.dir).string()));
  }
  return out;
}

}  // namespace

std::vector<Pose> make_dataset_poses(int joint_count, long count, double max_bend,
                                     uint64_t seed) {
  std::vector<Pose> poses;
  poses.push_back(Pose::zero(joint_count));  // canonical anchor frame
  for (long i = 1; i < count; ++i) {
    Rng rng(hash_combine(seed, 0x705e5 + uint64_t(i)));
    Pose pose = Pose::zero(joint_count);
    double lo = 0.35 * max_bend;
    // elbows bend in the image plane, opposite signs per side
    pose.joint_rotations[3] = Vec3(0, 0, rng.uniform(lo, max_bend));
    pose.joint_rotations[5] = Vec3(0, 0, -rng.uniform(lo, max_bend));
    // knees bend backward
    pose.joint_rotations[7] = Vec3(rng.uniform(lo, max_bend), 0, 0);
    pose.joint_rotations[9] = Vec3(rng.uniform(lo, max_bend), 0, 0);
    // small shoulder/hip variation
    pose.joint_rotations[2] = Vec3(0, 0, rng.uniform(-0.25, 0.25) * max_bend);
    pose.joint_rotations[4] = Vec3(0, 0, rng.uniform(-0.25, 0.25) * max_bend);
    pose.joint_rotations[6] = Vec3(rng.uniform(-0.2, 0.2) * max_bend, 0, 0);
    pose.joint_rotations[8] = Vec3(rng.uniform(-0.2, 0.2) * max_bend, 0, 0);
    poses.push_back(pose);
  }
  return poses;
}

int cmd_gen_data(PipelineConfig cfg, const std::string& out_dir) {
  apply_threads(cfg);
  fs::create_directories(out_dir);
  cfg.save_echo(out_dir + "/config_used.txt");
  write_run_manifest(out_dir + "/run_manifest.txt", cfg, "gen-data");

  log("building synthetic body");
  BodyConfig body_cfg;
  body_cfg.mesh_resolution = int(cfg.body_mesh_res);
  body_cfg.weight_falloff = cfg.body_falloff;
  body_cfg.seed = uint64_t(cfg.seed);
  CapsuleRig rig = humanoid_rig();
  SkinnedBody body = build_synthetic_body(body_cfg);
  save_obj(out_dir + "/body.obj", body.mesh);
  PlyData weights_ply;
  weights_ply.positions = body.mesh.vertices;
  weights_ply.weights = body.vertex_weights;
  weights_ply.faces = body.mesh.faces;
  save_ply(out_dir + "/body_weights.ply", weights_ply);
  save_skeleton(out_dir + "/skeleton.txt", body.skeleton);

  std::vector<Pose> poses = make_dataset_poses(body.skeleton.joint_count, cfg.data_frames,
                                               cfg.data_max_bend, uint64_t(cfg.seed));

  DatasetManifest manifest;
  manifest.body_path = "body.obj";
  manifest.weights_path = "body_weights.ply";
  manifest.skeleton_path = "skeleton.txt";

  std::vector<std::string> outfit_names = split_csv(cfg.data_outfits);
  ScanGenConfig gen_cfg;
  gen_cfg.mesh_resolution = int(cfg.data_scan_mesh_res);
  gen_cfg.cloud_samples = cfg.data_cloud_samples;
  gen_cfg.weight_falloff = cfg.body_falloff;

  int frame_index = 0;
  for (size_t oi = 0; oi < outfit_names.size(); ++oi) {
    OutfitKind kind = parse_outfit_kind(outfit_names[oi]);
    OutfitSpec spec = outfit_spec_from_config(cfg, kind, int(oi));
    log("generating scans for outfit " + outfit_names[oi]);
    std::vector<ScanFrame> frames = generate_clothed_scans(
        rig, spec, poses, gen_cfg, hash_combine(uint64_t(cfg.seed), 0xda7a + oi));
    for (size_t i = 0; i < frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%04d", frame_index);
      save_frame((fs::path(out_dir) / name).string(), frames[i]);
      FrameEntry entry;
      entry.index = frame_index;
      entry.dir = name;
      entry.train = long(i) < cfg.data_frames - cfg.data_test_frames;
      entry.outfit_id = int(oi);
      entry.outfit_kind = kind;
      manifest.frames.push_back(entry);
      frame_index++;
    }
  }
  save_manifest(out_dir + "/dataset.txt", manifest);
  log("wrote " + std::to_string(frame_index) + " frames");
  return 0;
}

int cmd_skinning(PipelineConfig cfg, const std::string& body_path,
                 const std::string& weights_path, const std::string& out_path) {
  apply_threads(cfg);
  log("loading body");
  TriMesh mesh = load_obj(body_path);
  PlyData weights = load_ply(weights_path);
  if (weights.weights.size() == 0)
    throw InvalidInputError("weights PLY has no w_ properties: " + weights_path);
  if (weights.positions.size() != mesh.vertices.size())
    throw DimensionError("weights PLY vertex count != body mesh vertex count");

  SkinnedBody body;
  body.mesh = std::move(mesh);
  body.vertex_weights = weights.weights;
  for (long i = 0; i < body.vertex_weights.rows(); ++i) {
    double s = body.vertex_weights.row(i).sum();
    if (s > 1e-12) body.vertex_weights.row(i) /= s;
  }
  // the solver only consumes the channel count; a chain skeleton stands in
  // when the body file has no rig attached
  int joints = int(body.vertex_weights.cols());
  std::string skeleton_path =
      (fs::path(body_path).parent_path() / "skeleton.txt").string();
  if (fs::exists(skeleton_path)) {
    body.skeleton = load_skeleton(skeleton_path);
  } else {
    body.skeleton.joint_count = joints;
    body.skeleton.parent.assign(joints, 0);
    body.skeleton.parent[0] = -1;
    for (int j = 1; j < joints; ++j) body.skeleton.parent[j] = j - 1;
    body.skeleton.rest_positions.assign(joints, Vec3::Zero());
  }
  body.validate();

  log("solving diffusion at " + std::to_string(cfg.skin_res) + "^3");
  DiffusionWeights lambdas;
  lambdas.lambda_point = cfg.skin_lambda_point;
  lambdas.lambda_grad = cfg.skin_lambda_grad;
  lambdas.lambda_reg = cfg.skin_lambda_reg;
  CgParams cg;
  cg.tolerance = cfg.skin_cg_tol;
  cg.max_iterations = cfg.skin_cg_max_iters;
  DiffusionReport report;
  SkinningField field = assemble_and_solve(
      body, lambdas, int(cfg.skin_res),
      cfg.skin_samples_per_vertex * long(body.mesh.vertices.size()), uint64_t(cfg.seed), cg,
      &report);
  field.save(out_path);
  cfg.save_echo(out_path + ".config.txt");
  write_run_manifest(out_path + ".manifest.txt", cfg, "skinning");
  long max_it = 0;
  for (auto& c : report.channels) max_it = std::max(max_it, c.iterations);
  log("energy solution " + std::to_string(report.energy_solution) + " baseline " +
      std::to_string(report.energy_baseline) + " max iters " + std::to_string(max_it));
  return 0;
}

int cmd_stage1(PipelineConfig cfg, const std::string& manifest_path,
               const std::string& field_path, const std::string& out_dir) {
  apply_threads(cfg);
  fs::create_directories(out_dir);
  cfg.save_echo(out_dir + "/config_used.txt");
  write_run_manifest(out_dir + "/run_manifest.txt", cfg, "stage1");

  DatasetManifest manifest = load_manifest(manifest_path);
  std::string base = manifest_dir(manifest_path);
  Skeleton skeleton = load_skeleton((fs::path(base) / manifest.skeleton_path).string());
  SkinningField field = SkinningField::load(field_path);

  std::vector<OutfitFrames> outfits = load_train_frames(manifest, base);
  if (outfits.empty()) throw InvalidInputError("stage1: manifest has no training frames");

  for (const OutfitFrames& outfit : outfits) {
    log("stage1: outfit " + std::to_string(outfit.outfit_id) + " with " +
        std::to_string(outfit.train_frames.size()) + " frames");
    std::vector<Pose> poses;
    for (const auto& f : outfit.train_frames) poses.push_back(f.pose);
    int canonical_index = select_canonical_pose_index(poses);
    Pose canonical_pose = poses[canonical_index];

    PointCloudN anchor =
        sample_surface(outfit.train_frames[canonical_index].mesh, cfg.stage1_anchor_samples,
                       hash_combine(uint64_t(cfg.seed), 0xa4c401));

    Stage1Schedule schedule;
    schedule.steps = cfg.stage1_steps;
    schedule.batch = cfg.stage1_batch;
    schedule.lr = cfg.stage1_lr;
    schedule.near_sigma = cfg.stage1_near_sigma;
    schedule.seed = hash_combine(uint64_t(cfg.seed), 0x57a6e1 + uint64_t(outfit.outfit_id));
    OccupancyNetConfig net_cfg{int(cfg.stage1_hidden), int(cfg.stage1_layers)};

    TrainedStage1 trained = train_occupancy(outfit.train_frames, skeleton, field, anchor,
                                            net_cfg, schedule);
    log("stage1: final BCE " + std::to_string(trained.final_bce));

    std::string suffix = "outfit" + std::to_string(outfit.outfit_id);
    trained.field->save(out_dir + "/occupancy_" + suffix + ".ckpt");
    {
      std::ofstream lf(out_dir + "/loss_" + suffix + ".txt");
      for (size_t i = 0; i < trained.loss_curve.size(); ++i)
        lf << i << " " << trained.loss_curve[i] << "\n";
    }

    TemplateMesh tmpl =
        extract_template(*trained.field, canonical_pose, field, int(cfg.stage1_mc_res));
    save_template(out_dir + "/template_" + suffix + ".ply", tmpl);
    save_obj(out_dir + "/template_" + suffix + ".obj", tmpl.mesh);
    log("stage1: template " + suffix + " has " + std::to_string(tmpl.mesh.vertices.size()) +
        " vertices, chi " + std::to_string(tmpl.mesh.euler_characteristic()));
  }
  return 0;
}

int cmd_posemap(PipelineConfig cfg, const std::string& template_path,
                const std::string& skeleton_path, const std::string& pose_path,
                const std::string& out_dir) {
  apply_threads(cfg);
  fs::create_directories(out_dir);
  cfg.save_echo(out_dir + "/config_used.txt");
  write_run_manifest(out_dir + "/run_manifest.txt", cfg, "posemap");

  TemplateMesh tmpl = load_template(template_path);
  Skeleton skeleton = load_skeleton(skeleton_path);
  Pose pose = load_pose(pose_path);
  ViewConfig views = ViewConfig::make_default(tmpl.mesh.bounds(), int(cfg.pm_size),
                                              cfg.pm_tilt_deg * M_PI / 180.0);
  std::vector<Vec3> posed = pose_template(tmpl, skeleton, pose);
  for (size_t v = 0; v < views.views.size(); ++v) {
    PositionMap map = rasterize_position_map(tmpl.mesh, posed, views.views[v]);
    std::string stem = out_dir + "/view" + std::to_string(v);
    save_position_map(stem + ".bin", map);
    save_position_map_png(stem + ".png", map);
  }
  log("wrote 4 position maps");
  return 0;
}

int cmd_stage2(PipelineConfig cfg, const std::string& manifest_path,
               const std::string& field_path, const std::string& templates_dir,
               const std::string& out_dir) {
  apply_threads(cfg);
  fs::create_directories(out_dir);
  cfg.save_echo(out_dir + "/config_used.txt");
  write_run_manifest(out_dir + "/run_manifest.txt", cfg, "stage2-train");

  DatasetManifest manifest = load_manifest(manifest_path);
  std::string base = manifest_dir(manifest_path);
  Skeleton skeleton = load_skeleton((fs::path(base) / manifest.skeleton_path).string());
  SkinningField field = SkinningField::load(field_path);
  std::vector<OutfitFrames> outfits = load_train_frames(manifest, base);
  if (outfits.empty()) throw InvalidInputError("stage2: manifest has no training frames");

  SharedNetsConfig nets_cfg = nets_config_from(cfg);
  SharedNets nets(nets_cfg, hash_combine(uint64_t(cfg.seed), 0x2e75));

  std::vector<OutfitAvatar> avatars;
  int max_outfit_id = 0;
  for (const auto& o : outfits) max_outfit_id = std::max(max_outfit_id, o.outfit_id);
  std::vector<int> avatar_by_outfit(max_outfit_id + 1, -1);
  for (const auto& o : outfits) {
    std::string tmpl_path =
        templates_dir + "/template_outfit" + std::to_string(o.outfit_id) + ".ply";
    TemplateMesh tmpl = load_template(tmpl_path);
    avatar_by_outfit[o.outfit_id] = int(avatars.size());
    avatars.push_back(make_avatar(tmpl, field, cfg.stage2_points, nets_cfg.c_geom, o.outfit_id,
                                  hash_combine(uint64_t(cfg.seed), 0xa7a + o.outfit_id)));
  }

  std::vector<Stage2Frame> frames;
  for (const auto& o : outfits)
    for (size_t i = 0; i < o.train_frames.size(); ++i)
      frames.push_back(prepare_stage2_frame(
          avatars, avatar_by_outfit, o.train_frames[i], skeleton, nets_cfg, cfg.stage2_points,
          hash_combine(uint64_t(cfg.seed), 0x6f0 + frames.size())));

  Stage2Schedule schedule;
  schedule.epochs = std::max<long>(1, (cfg.stage2_steps + long(frames.size()) - 1) /
                                          long(frames.size()));
  schedule.point_batch = cfg.stage2_point_batch;
  schedule.lr = cfg.stage2_lr;
  schedule.lr_geo = cfg.stage2_lr_geo;
  schedule.loss = loss_weights_from(cfg);
  schedule.seed = hash_combine(uint64_t(cfg.seed), 0x57a6e2);
  log("stage2: " + std::to_string(schedule.epochs) + " epochs over " +
      std::to_string(frames.size()) + " frames");

  Stage2Result result = train_stage2(avatars, nets, skeleton, frames, schedule,
                                     [&](long epoch) {
                                       nets.save(out_dir + "/nets.ckpt");
                                       if ((epoch + 1) % 10 == 0)
                                         log("epoch " + std::to_string(epoch + 1) + " done");
                                     });
  nets.save(out_dir + "/nets.ckpt");
  for (const auto& avatar : avatars)
    save_avatar(out_dir + "/avatar_outfit" + std::to_string(avatar.outfit_id), avatar);
  {
    std::ofstream lf(out_dir + "/loss.txt");
    for (size_t i = 0; i < result.loss_curve.size(); ++i)
      lf << i << " " << result.loss_curve[i] << "\n";
  }
  log("stage2: final loss " + std::to_string(result.final_loss));
  return 0;
}

int cmd_animate(PipelineConfig cfg, const std::string& avatar_dir, const std::string& nets_path,
                const std::string& skeleton_path, const std::string& pose_path,
                const std::string& out_ply) {
  apply_threads(cfg);
  if (!fs::exists(avatar_dir))
    throw IoError("avatar directory not found: " + avatar_dir);
  OutfitAvatar avatar = load_avatar(avatar_dir);
  SharedNets nets = SharedNets::load(nets_path);
  Skeleton skeleton = load_skeleton(skeleton_path);
  Pose pose = load_pose(pose_path);
  PredictedCloud cloud = predict(avatar, nets, skeleton, pose);
  PlyData out;
  out.positions = cloud.points;
  out.normals = cloud.normals;
  save_ply(out_ply, out);
  write_run_manifest(out_ply + ".manifest.txt", cfg, "animate");
  return 0;
}

int cmd_fit_novel(PipelineConfig cfg, const std::string& scan_dir, const std::string& avatar_dir,
                  const std::string& nets_path, const std::string& skeleton_path,
                  const std::string& out_dir) {
  apply_threads(cfg);
  fs::create_directories(out_dir);
  cfg.save_echo(out_dir + "/config_used.txt");
  write_run_manifest(out_dir + "/run_manifest.txt", cfg, "fit-novel");

  ScanFrame scan = load_frame(scan_dir);
  OutfitAvatar avatar = load_avatar(avatar_dir);
  SharedNets nets = SharedNets::load(nets_path);
  Skeleton skeleton = load_skeleton(skeleton_path);

  FitResult fit = fit_novel_scan(nets, avatar, scan, skeleton, cfg.fit_steps, cfg.fit_lr,
                                 cfg.fit_point_batch, loss_weights_from(cfg),
                                 hash_combine(uint64_t(cfg.seed), 0xf17));
  if (fit.nets_hash_before != fit.nets_hash_after)
    throw StateError("fit-novel: frozen networks changed");

  OutfitAvatar fitted = avatar;
  fitted.geo_features = fit.features;
  save_avatar(out_dir + "/fitted_avatar", fitted);
  {
    std::ofstream lf(out_dir + "/fit.txt");
    char buf[160];
    std::snprintf(buf, sizeof(buf), "initial_point_loss %.9g\nfinal_point_loss %.9g\n",
                  fit.initial_point_loss, fit.final_point_loss);
    lf << buf;
  }
  log("fit-novel: L_p " + std::to_string(fit.initial_point_loss) + " -> " +
      std::to_string(fit.final_point_loss));
  return 0;
}

int cmd_eval(PipelineConfig cfg, const std::string& pred_dir, const std::string& manifest_path,
             const std::string& out_path) {
  apply_threads(cfg);
  EvalReport report = evaluate_run(pred_dir, manifest_path);
  save_report(out_path, report);
  write_run_manifest(out_path + ".manifest.txt", cfg, "eval");
  log("eval: mean d_cham x1e5 = " + std::to_string(report.mean_d_cham * 1e5) +
      ", mean s_cos = " + std::to_string(report.mean_s_cos));
  return 0;
}

// Self-contained sanity suite: gradient checks on every trainable module plus
// small independent cross-checks of the geometric kernels.
int cmd_selftest(PipelineConfig cfg) {
  apply_threads(cfg);
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::fprintf(stderr, "[selftest] %-40s %s\n", name.c_str(), ok ? "ok" : "FAIL");
    if (!ok) failures++;
  };

  auto sampler = [](long rows, long cols) {
    return [rows, cols](Rng& rng) {
      MatXR x(rows, cols);
      for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) x(i, j) = rng.uniform(-1, 1);
      return x;
    };
  };

  {
    nn::Dense dense(11, 7, 42);
    check("gradcheck dense", nn::gradcheck(dense, sampler(3, 11), 1e-4, 1).passed());
  }
  {
    auto mlp = nn::make_mlp(9, 32, 4, 5, nn::Activation::LeakyRelu, 43);
    check("gradcheck mlp leaky", nn::gradcheck(*mlp, sampler(2, 9), 1e-4, 2).passed());
  }
  {
    auto mlp = nn::make_mlp(9, 32, 3, 2, nn::Activation::Softplus, 44);
    check("gradcheck mlp softplus", nn::gradcheck(*mlp, sampler(2, 9), 1e-4, 3).passed());
  }
  {
    nn::Conv2d conv(2, 3, 8, 8, 1, 45);
    check("gradcheck conv s1", nn::gradcheck(conv, sampler(1, 2 * 8 * 8), 1e-4, 4).passed());
    nn::Conv2d conv2(2, 3, 8, 8, 2, 46);
    check("gradcheck conv s2", nn::gradcheck(conv2, sampler(1, 2 * 8 * 8), 1e-4, 5).passed());
  }
  {
    nn::UNetConfig uc;
    uc.in_channels = 3;
    uc.out_channels = 4;
    uc.base_channels = 4;
    uc.height = uc.width = 16;
    nn::UNetEncoder unet(uc, 47);
    check("gradcheck unet 16x16",
          nn::gradcheck(unet, sampler(1, 3 * 16 * 16), 1e-4, 6).passed());
  }
  {
    // adam: constant gradient drives |step| to lr
    nn::AdamState state;
    state.init(1);
    double p = 0;
    nn::AdamParams hyper;
    double prev = p;
    for (int i = 0; i < 200; ++i) {
      double g = 3.7;
      prev = p;
      nn::adam_step(&p, &g, 1, state, hyper);
    }
    check("adam step magnitude -> lr", std::abs(std::abs(p - prev) - hyper.lr) < 1e-4 * hyper.lr);
  }
  {
    // occupancy parity vs winding number on a capsule chain body
    CapsuleRig rig;
    rig.skeleton.joint_count = 2;
    rig.skeleton.parent = {-1, 0};
    rig.skeleton.rest_positions = {Vec3(0, 0, 0), Vec3(0.3, 0, 0)};
    rig.capsules = {{Vec3(0, 0, 0), Vec3(0.3, 0, 0), 0.1}, {Vec3(0.3, 0, 0), Vec3(0.6, 0, 0), 0.08}};
    SkinnedBody body = build_capsule_body(rig, 32, 0.1);
    MeshOccupancy occ(body.mesh);
    Rng rng(7);
    Aabb box = body.mesh.bounds().padded(0.05);
    int mismatches = 0;
    for (int i = 0; i < 500; ++i) {
      Vec3 q(rng.uniform(box.min.x(), box.max.x()), rng.uniform(box.min.y(), box.max.y()),
             rng.uniform(box.min.z(), box.max.z()));
      double w = 0;
      for (const auto& t : body.mesh.faces) {
        // van Oosterom–Strackee signed solid angle
        Vec3 a = body.mesh.vertices[t[0]] - q;
        Vec3 b = body.mesh.vertices[t[1]] - q;
        Vec3 c = body.mesh.vertices[t[2]] - q;
        double la = a.norm(), lb = b.norm(), lc = c.norm();
        double num = a.dot(b.cross(c));
        double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        w += 2.0 * std::atan2(num, den);
      }
      int inside_winding = std::abs(w) > 2 * M_PI * 0.5 ? 1 : 0;
      if (occ.query(q) != inside_winding) mismatches++;
    }
    check("occupancy vs winding oracle", mismatches == 0);
  }
  {
    // chamfer vs brute force
    Rng rng(8);
    PointCloudN a, b;
    for (int i = 0; i < 120; ++i) {
      a.points.push_back(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
      a.normals.push_back(Vec3(0, 0, 1));
      b.points.push_back(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
      b.normals.push_back(Vec3(0, 0, 1));
    }
    double brute = 0;
    for (const Vec3& p : a.points) {
      double best = 1e30;
      for (const Vec3& q : b.points) best = std::min(best, (p - q).squaredNorm());
      brute += best / a.points.size();
    }
    for (const Vec3& p : b.points) {
      double best = 1e30;
      for (const Vec3& q : a.points) best = std::min(best, (p - q).squaredNorm());
      brute += best / b.points.size();
    }
    check("chamfer vs brute force", std::abs(chamfer_l2(a, b) - brute) < 1e-12);
  }
  {
    // analytic sphere via tetrahedral iso-extraction
    GridDims dims{48, 48, 48};
    Aabb box;
    box.min = Vec3(-1, -1, -1);
    box.max = Vec3(1, 1, 1);
    std::vector<double> vals(dims.node_count());
    for (int k = 0; k < 48; ++k)
      for (int j = 0; j < 48; ++j)
        for (int i = 0; i < 48; ++i)
          vals[dims.index(i, j, k)] =
              grid_node_position(dims, box, i, j, k).norm() < 0.7 ? 1.0 : 0.0;
    TriMesh sphere = extract_isosurface(vals, dims, box, 0.5);
    bool ok = sphere.is_watertight() && sphere.euler_characteristic() == 2;
    double voxel = 2.0 / 47;
    for (const Vec3& v : sphere.vertices) ok = ok && std::abs(v.norm() - 0.7) < voxel;
    check("isosurface sphere", ok);
  }

  std::fprintf(stderr, "[selftest] %s\n", failures == 0 ? "all ok" : "FAILURES PRESENT");
  return failures == 0 ? 0 : 1;
}

}  // namespace fite
