#include <doctest.h>

#include <filesystem>

#include "fite/errors.hpp"
#include "fite/scan.hpp"
#include "oracles.hpp"

using namespace fite;

namespace {

TriMesh unit_cube() {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  int quads[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                     {2, 3, 7, 6}, {1, 2, 6, 5}, {3, 0, 4, 7}};
  for (auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

CapsuleRig small_rig() {
  CapsuleRig rig;
  rig.skeleton.joint_count = 2;
  rig.skeleton.parent = {-1, 0};
  rig.skeleton.rest_positions = {Vec3(0, 0, 0), Vec3(0.3, 0, 0)};
  rig.capsules = {{Vec3(0, 0, 0), Vec3(0.3, 0, 0), 0.1},
                  {Vec3(0.3, 0, 0), Vec3(0.6, 0, 0), 0.08}};
  return rig;
}

uint64_t frame_fingerprint(const ScanFrame& f) {
  uint64_t h = 1469598103934665603ULL;
  for (const Vec3& v : f.mesh.vertices) h = fnv1a(v.data(), 3 * sizeof(double), h);
  for (const Vec3& p : f.cloud.points) h = fnv1a(p.data(), 3 * sizeof(double), h);
  for (const Vec3& n : f.cloud.normals) h = fnv1a(n.data(), 3 * sizeof(double), h);
  return h;
}

std::vector<Pose> bent_poses(int joints) {
  std::vector<Pose> poses;
  poses.push_back(Pose::zero(joints));
  Pose bent = Pose::zero(joints);
  if (joints >= 10) {
    bent.joint_rotations[3] = Vec3(0, 0, 0.5);
    bent.joint_rotations[5] = Vec3(0, 0, -0.5);
    bent.joint_rotations[7] = Vec3(0.45, 0, 0);
    bent.joint_rotations[9] = Vec3(0.4, 0, 0);
  } else {
    bent.joint_rotations[1] = Vec3(0, 0, 0.4);
  }
  poses.push_back(bent);
  return poses;
}

}  // namespace

TEST_SUITE("scan") {

TEST_CASE("occupancy: cube centroid inside, far point outside") {
  TriMesh cube = unit_cube();
  MeshOccupancy occ(cube);
  CHECK(occ.query(Vec3(0.5, 0.5, 0.5)) == 1);
  double diag = cube.bounds().diagonal();
  CHECK(occ.query(Vec3(0.5, 0.5, 0.5) + Vec3(1, 0, 0) * 10 * diag) == 0);
}

TEST_CASE("occupancy rejects non-watertight meshes") {
  TriMesh open;
  open.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  open.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(MeshOccupancy{open}, InvalidInputError);
  CHECK_THROWS_AS(occupancy_query(open, Vec3(0, 0, 0)), InvalidInputError);
}

TEST_CASE("occupancy agrees with the winding-number oracle") {
  SkinnedBody body = build_capsule_body(small_rig(), 32, 0.1);
  MeshOccupancy occ(body.mesh);
  Aabb box = body.mesh.bounds().padded(0.03);
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    Vec3 q(rng.uniform(box.min.x(), box.max.x()), rng.uniform(box.min.y(), box.max.y()),
           rng.uniform(box.min.z(), box.max.z()));
    CHECK(occ.query(q) == oracle::winding_inside(body.mesh, q));
  }
}

TEST_CASE("sample_surface: unit square statistics") {
  TriMesh square;
  square.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  square.faces = {{0, 1, 2}, {0, 2, 3}};
  PointCloudN cloud = sample_surface(square, 100000, 7);
  cloud.validate();
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : cloud.points) mean += p;
  mean /= double(cloud.points.size());
  CHECK((mean - Vec3(0.5, 0.5, 0)).norm() < 0.01);
}

TEST_CASE("sample_surface: single sample and empty mesh") {
  TriMesh square;
  square.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  square.faces = {{0, 1, 2}};
  PointCloudN one = sample_surface(square, 1, 3);
  CHECK(one.points.size() == 1);
  CHECK((one.normals[0] - Vec3(0, 0, 1)).norm() < 1e-12);

  TriMesh empty;
  CHECK_THROWS_AS(sample_surface(empty, 10, 1), InvalidInputError);
  CHECK_THROWS_AS(sample_surface(square, 0, 1), InvalidInputError);
}

TEST_CASE("sample_surface: per-face counts proportional to area") {
  // two triangles with a 3:1 area ratio
  TriMesh mesh;
  mesh.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 2, 0}, {10, 0, 0}, {11, 0, 0}, {10, 2, 0}};
  mesh.faces = {{0, 1, 2}, {3, 4, 5}};  // areas 3 and 1
  long n = 40000;
  PointCloudN cloud = sample_surface(mesh, n, 11);
  long big = 0;
  for (const Vec3& p : cloud.points)
    if (p.x() < 5) ++big;
  double expect = 0.75 * n;
  double sigma = std::sqrt(n * 0.75 * 0.25);
  CHECK(std::abs(big - expect) < 3 * sigma);
}

TEST_CASE("generator: tight outfit at zero pose is the inflated body") {
  CapsuleRig rig = humanoid_rig();
  OutfitSpec outfit;
  outfit.kind = OutfitKind::Tight;
  outfit.wrinkle_amp_per_rad = 0;  // zero amplitude
  ScanGenConfig cfg;
  cfg.mesh_resolution = 56;
  cfg.cloud_samples = 512;
  std::vector<Pose> poses = {Pose::zero(10)};
  auto frames = generate_clothed_scans(rig, outfit, poses, cfg, 5);
  REQUIRE(frames.size() == 1);
  // every vertex sits on the offset surface of the body sdf
  Aabb box = rig.bounds().padded(0.05 * rig.bounds().diagonal());
  double voxel = box.extent().maxCoeff() / 55;
  for (const Vec3& v : frames[0].mesh.vertices)
    CHECK(std::abs(rig.sdf(v) - outfit.offset) < voxel);
}

TEST_CASE("generator: skirt changes the Euler characteristic") {
  CapsuleRig rig = humanoid_rig();
  ScanGenConfig cfg;
  cfg.mesh_resolution = 96;
  cfg.cloud_samples = 512;
  std::vector<Pose> poses = {Pose::zero(10)};

  OutfitSpec tight;
  tight.kind = OutfitKind::Tight;
  auto tight_frames = generate_clothed_scans(rig, tight, poses, cfg, 5);
  CHECK(tight_frames[0].mesh.euler_characteristic() == 2);

  OutfitSpec skirt;
  skirt.kind = OutfitKind::Skirt;
  auto skirt_frames = generate_clothed_scans(rig, skirt, poses, cfg, 5);
  std::string why;
  CHECK_MESSAGE(skirt_frames[0].mesh.is_watertight(&why), why);
  long chi = skirt_frames[0].mesh.euler_characteristic();
  CHECK(chi != 2);
  // hem welded into both legs: two handles
  CHECK(chi == -2);
}

TEST_CASE("generator: determinism and posed watertightness") {
  CapsuleRig rig = humanoid_rig();
  OutfitSpec outfit;
  outfit.kind = OutfitKind::Tight;
  ScanGenConfig cfg;
  cfg.mesh_resolution = 48;
  cfg.cloud_samples = 2048;
  std::vector<Pose> poses = bent_poses(10);
  auto a = generate_clothed_scans(rig, outfit, poses, cfg, 42);
  auto b = generate_clothed_scans(rig, outfit, poses, cfg, 42);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(frame_fingerprint(a[i]) == frame_fingerprint(b[i]));
    CHECK(a[i].mesh.is_watertight());
    a[i].cloud.validate();
    // cloud points inside the mesh bbox
    Aabb box = a[i].mesh.bounds();
    for (const Vec3& p : a[i].cloud.points) CHECK(box.contains(p));
  }
  // different seed changes the cloud
  auto c = generate_clothed_scans(rig, outfit, poses, cfg, 43);
  CHECK(frame_fingerprint(a[0]) != frame_fingerprint(c[0]));
}

TEST_CASE("generator: surface samples flip occupancy across the boundary") {
  CapsuleRig rig = humanoid_rig();
  OutfitSpec outfit;
  outfit.kind = OutfitKind::Skirt;
  ScanGenConfig cfg;
  cfg.mesh_resolution = 96;
  cfg.cloud_samples = 2000;
  std::vector<Pose> poses = bent_poses(10);
  auto frames = generate_clothed_scans(rig, outfit, poses, cfg, 21);
  for (const ScanFrame& frame : frames) {
    MeshOccupancy occ(frame.mesh);
    double eps = 1e-4 * frame.mesh.bounds().diagonal();
    long good = 0;
    for (size_t i = 0; i < frame.cloud.points.size(); ++i) {
      int outside = occ.query(frame.cloud.points[i] + 2 * eps * frame.cloud.normals[i]);
      int inside = occ.query(frame.cloud.points[i] - 2 * eps * frame.cloud.normals[i]);
      if (outside == 0 && inside == 1) ++good;
    }
    CHECK(double(good) >= 0.99 * double(frame.cloud.points.size()));
  }
}

TEST_CASE("unknown outfit name rejected") {
  CHECK_THROWS_AS(parse_outfit_kind("cape"), ConfigError);
}

TEST_CASE("frame and manifest round trip") {
  CapsuleRig rig = small_rig();
  OutfitSpec outfit;
  ScanGenConfig cfg;
  cfg.mesh_resolution = 24;
  cfg.cloud_samples = 256;
  cfg.weight_falloff = 0.1;
  std::vector<Pose> poses = bent_poses(2);
  auto frames = generate_clothed_scans(rig, outfit, poses, cfg, 1);

  auto dir = (std::filesystem::temp_directory_path() / "fite_frame_test").string();
  save_frame(dir, frames[1]);
  ScanFrame loaded = load_frame(dir);
  CHECK(loaded.cloud.points.size() == frames[1].cloud.points.size());
  CHECK(loaded.mesh.faces == frames[1].mesh.faces);
  CHECK(loaded.outfit_kind == frames[1].outfit_kind);
  CHECK((loaded.pose.joint_rotations[1] - frames[1].pose.joint_rotations[1]).norm() == 0);

  DatasetManifest manifest;
  manifest.body_path = "body.obj";
  manifest.weights_path = "w.ply";
  manifest.skeleton_path = "skel.txt";
  manifest.frames = {{0, "frame_0000", true, 0, OutfitKind::Tight},
                     {1, "frame_0001", false, 1, OutfitKind::Skirt}};
  auto mpath = (std::filesystem::temp_directory_path() / "fite_manifest_test.txt").string();
  save_manifest(mpath, manifest);
  DatasetManifest lm = load_manifest(mpath);
  REQUIRE(lm.frames.size() == 2);
  CHECK(lm.frames[1].train == false);
  CHECK(lm.frames[1].outfit_kind == OutfitKind::Skirt);
  CHECK(lm.body_path == "body.obj");
}

}  // TEST_SUITE
