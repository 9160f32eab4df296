#include <doctest.h>

#include <sstream>

#include "fite/errors.hpp"
#include "fite/synthetic_body.hpp"

using namespace fite;

namespace {

// byte-stable fingerprint of a body's geometry and weights
uint64_t body_fingerprint(const SkinnedBody& body) {
  uint64_t h = 1469598103934665603ULL;
  for (const Vec3& v : body.mesh.vertices) h = fnv1a(v.data(), 3 * sizeof(double), h);
  for (const auto& f : body.mesh.faces) h = fnv1a(f.data(), 3 * sizeof(int), h);
  h = fnv1a(body.vertex_weights.data(), body.vertex_weights.size() * sizeof(double), h);
  return h;
}

}  // namespace

TEST_SUITE("synthetic_body") {

TEST_CASE("default body: watertight, weights valid") {
  BodyConfig cfg;
  cfg.mesh_resolution = 72;  // keep the unit test quick
  SkinnedBody body = build_synthetic_body(cfg);
  CHECK(body.skeleton.joint_count == 10);
  std::string why;
  CHECK_MESSAGE(body.mesh.is_watertight(&why), why);
  CHECK(body.mesh.euler_characteristic() == 2);
  for (long v = 0; v < body.vertex_weights.rows(); ++v)
    CHECK(std::abs(body.vertex_weights.row(v).sum() - 1.0) < 1e-9);
}

TEST_CASE("limb midpoints are one-hot") {
  BodyConfig cfg;
  cfg.mesh_resolution = 72;
  SkinnedBody body = build_synthetic_body(cfg);
  CapsuleRig rig = humanoid_rig();
  // the proper limbs: upper arms, forearms, thighs, shins
  for (int joint : {2, 3, 4, 5, 6, 7, 8, 9}) {
    const Capsule& cap = rig.capsules[joint];
    Vec3 mid = 0.5 * (cap.a + cap.b);
    // all mesh vertices within a thin slab around the limb midpoint
    Vec3 axis = (cap.b - cap.a).normalized();
    long checked = 0;
    for (size_t v = 0; v < body.mesh.vertices.size(); ++v) {
      const Vec3& p = body.mesh.vertices[v];
      if (std::abs((p - mid).dot(axis)) > 0.02) continue;
      if ((p - mid).norm() > cap.radius + 0.05) continue;  // other limbs' vertices
      ++checked;
      CHECK(body.vertex_weights(long(v), joint) >= 0.99);
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("same config twice gives byte-identical bodies") {
  BodyConfig cfg;
  cfg.mesh_resolution = 48;
  SkinnedBody a = build_synthetic_body(cfg);
  SkinnedBody b = build_synthetic_body(cfg);
  CHECK(body_fingerprint(a) == body_fingerprint(b));
}

TEST_CASE("degenerate config rejected") {
  BodyConfig cfg;
  cfg.mesh_resolution = 4;
  CHECK_THROWS_AS(build_synthetic_body(cfg), ConfigError);
  BodyConfig cfg2;
  cfg2.scale = -1.0;
  CHECK_THROWS_AS(build_synthetic_body(cfg2), ConfigError);
  CapsuleRig rig = humanoid_rig();
  rig.capsules[0].radius = 0;
  CHECK_THROWS_AS(build_capsule_body(rig, 48, 0.17), ConfigError);
}

TEST_CASE("weights blend smoothly near a joint") {
  CapsuleRig rig = humanoid_rig();
  // walk along the left arm across the elbow: forearm weight rises monotonically
  double prev = -1;
  for (double x = -0.40; x >= -0.72; x -= 0.02) {
    VecX w = rig.skin_weights(Vec3(x, 0.50, 0), 0.17);
    CHECK(w[3] >= prev - 1e-9);
    prev = w[3];
    CHECK(std::abs(w.sum() - 1.0) < 1e-12);
  }
}

}  // TEST_SUITE
