#include "fite/synthetic_body.hpp"

#include <algorithm>
#include <cmath>

#include "fite/errors.hpp"

namespace fite {

namespace {

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab = b - a;
  double len2 = ab.squaredNorm();
  double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

double smootherstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}

}  // namespace

double CapsuleRig::sdf(const Vec3& p) const {
  double d = std::numeric_limits<double>::max();
  for (const Capsule& c : capsules)
    d = std::min(d, segment_distance(p, c.a, c.b) - c.radius);
  return d;
}

VecX CapsuleRig::skin_weights(const Vec3& p, double falloff) const {
  const int n = int(capsules.size());
  VecX d(n);
  for (int j = 0; j < n; ++j)
    d[j] = segment_distance(p, capsules[j].a, capsules[j].b) - capsules[j].radius;
  double dmin = d.minCoeff();
  VecX w(n);
  for (int j = 0; j < n; ++j) w[j] = 1.0 - smootherstep01((d[j] - dmin) / falloff);
  return w / w.sum();
}

Aabb CapsuleRig::bounds() const {
  Aabb b;
  for (const Capsule& c : capsules) {
    b.expand(c.a - Vec3::Constant(c.radius));
    b.expand(c.a + Vec3::Constant(c.radius));
    b.expand(c.b - Vec3::Constant(c.radius));
    b.expand(c.b + Vec3::Constant(c.radius));
  }
  return b;
}

void SkinnedBody::validate() const {
  skeleton.validate();
  mesh.validate_indices();
  if (long(vertex_weights.rows()) != long(mesh.vertices.size()) ||
      int(vertex_weights.cols()) != skeleton.joint_count)
    throw DimensionError("skinned body: weight matrix shape mismatch");
  for (long i = 0; i < vertex_weights.rows(); ++i) {
    double s = vertex_weights.row(i).sum();
    if (std::abs(s - 1.0) > 1e-6)
      throw ContractError("skinned body: vertex weights must sum to 1");
    if (vertex_weights.row(i).minCoeff() < -1e-12 || vertex_weights.row(i).maxCoeff() > 1 + 1e-12)
      throw ContractError("skinned body: vertex weight out of [0,1]");
  }
  std::string why;
  if (!mesh.is_watertight(&why)) throw InvalidInputError("skinned body: mesh not watertight: " + why);
}

CapsuleRig humanoid_rig(double s) {
  if (!(s > 0) || !std::isfinite(s))
    throw ConfigError("humanoid rig: scale must be positive and finite");
  CapsuleRig rig;
  rig.skeleton.joint_count = 10;
  rig.skeleton.parent = {-1, 0, 0, 2, 0, 4, 0, 6, 0, 8};
  rig.skeleton.rest_positions = {
      Vec3(0, 0, 0) * s,           // 0 pelvis (root)
      Vec3(0, 0.55, 0) * s,        // 1 neck
      Vec3(-0.16, 0.45, 0) * s,    // 2 left shoulder
      Vec3(-0.585, 0.45, 0) * s,   // 3 left elbow
      Vec3(0.16, 0.45, 0) * s,     // 4 right shoulder
      Vec3(0.585, 0.45, 0) * s,    // 5 right elbow
      Vec3(-0.18, -0.05, 0) * s,   // 6 left hip
      Vec3(-0.18, -0.525, 0) * s,  // 7 left knee
      Vec3(0.18, -0.05, 0) * s,    // 8 right hip
      Vec3(0.18, -0.525, 0) * s,   // 9 right knee
  };
  rig.capsules = {
      {Vec3(0, 0.06, 0) * s, Vec3(0, 0.48, 0) * s, 0.18 * s},            // torso
      {Vec3(0, 0.62, 0) * s, Vec3(0, 0.76, 0) * s, 0.09 * s},            // head
      {Vec3(-0.16, 0.45, 0) * s, Vec3(-0.585, 0.45, 0) * s, 0.05 * s},   // L upper arm
      {Vec3(-0.585, 0.45, 0) * s, Vec3(-1.02, 0.45, 0) * s, 0.04 * s},   // L forearm
      {Vec3(0.16, 0.45, 0) * s, Vec3(0.585, 0.45, 0) * s, 0.05 * s},     // R upper arm
      {Vec3(0.585, 0.45, 0) * s, Vec3(1.02, 0.45, 0) * s, 0.04 * s},     // R forearm
      {Vec3(-0.18, -0.05, 0) * s, Vec3(-0.18, -0.525, 0) * s, 0.07 * s},   // L thigh
      {Vec3(-0.18, -0.525, 0) * s, Vec3(-0.18, -1.02, 0) * s, 0.06 * s},   // L shin
      {Vec3(0.18, -0.05, 0) * s, Vec3(0.18, -0.525, 0) * s, 0.07 * s},     // R thigh
      {Vec3(0.18, -0.525, 0) * s, Vec3(0.18, -1.02, 0) * s, 0.06 * s},     // R shin
  };
  return rig;
}

GridDims proportional_dims(const Aabb& bbox, int resolution) {
  Vec3 ext = bbox.extent();
  double longest = ext.maxCoeff();
  GridDims d;
  d.nx = std::max(8, int(std::lround(resolution * ext.x() / longest)));
  d.ny = std::max(8, int(std::lround(resolution * ext.y() / longest)));
  d.nz = std::max(8, int(std::lround(resolution * ext.z() / longest)));
  return d;
}

SkinnedBody build_capsule_body(const CapsuleRig& rig, int mesh_resolution, double falloff) {
  if (mesh_resolution < 16) throw ConfigError("body: mesh_resolution must be at least 16");
  if (!(falloff > 0)) throw ConfigError("body: weight falloff must be positive");
  for (const Capsule& c : rig.capsules)
    if (!(c.radius > 0) || !((c.b - c.a).norm() >= 0))
      throw ConfigError("body: degenerate capsule dimensions");

  Aabb box = rig.bounds().padded(0.05 * rig.bounds().diagonal());
  GridDims dims = proportional_dims(box, mesh_resolution);
  TriMesh mesh =
      extract_isosurface([&](const Vec3& p) { return -rig.sdf(p); }, dims, box, 0.0);
  mesh = largest_component(mesh);

  SkinnedBody body;
  body.mesh = std::move(mesh);
  body.skeleton = rig.skeleton;
  body.vertex_weights.resize(body.mesh.vertices.size(), rig.skeleton.joint_count);
  for (size_t v = 0; v < body.mesh.vertices.size(); ++v)
    body.vertex_weights.row(v) = rig.skin_weights(body.mesh.vertices[v], falloff).transpose();
  body.validate();
  return body;
}

SkinnedBody build_synthetic_body(const BodyConfig& config) {
  CapsuleRig rig = humanoid_rig(config.scale);
  return build_capsule_body(rig, config.mesh_resolution, config.weight_falloff * config.scale);
}

}  // namespace fite
