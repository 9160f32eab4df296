#pragma once

#include <vector>

#include "fite/isosurface.hpp"
#include "fite/kinematics.hpp"
#include "fite/mesh.hpp"
#include "fite/types.hpp"

namespace fite {

// One capsule per joint; the capsule is the solid owned by that joint.
struct Capsule {
  Vec3 a, b;
  double radius;
};

// A capsule rig pairs a skeleton with per-joint capsules. The humanoid default
// has 10 joints (torso, head, upper/lower arms, thighs, shins); tests also
// build small chains directly.
struct CapsuleRig {
  Skeleton skeleton;
  std::vector<Capsule> capsules;  // one per joint

  double sdf(const Vec3& p) const;  // union of capsule SDFs

  // Smooth per-joint weights: kernel 1 - smootherstep((d_j - d_min)/falloff)
  // on capsule-surface distances, normalized. One-hot away from junctions,
  // blended within ~falloff of them.
  VecX skin_weights(const Vec3& p, double falloff) const;

  Aabb bounds() const;  // capsule bounds (no margin)
};

struct BodyConfig {
  int mesh_resolution = 96;     // grid nodes along the largest axis
  double weight_falloff = 0.17; // meters
  double scale = 1.0;           // overall size multiplier
  uint64_t seed = 1;            // reserved; construction is fully deterministic
};

struct SkinnedBody {
  TriMesh mesh;
  Skeleton skeleton;
  MatXR vertex_weights;  // V x J, rows sum to 1

  void validate() const;
};

CapsuleRig humanoid_rig(double scale = 1.0);

// Watertight capsule-limb humanoid with smooth vertex weights. Deterministic
// given config.
SkinnedBody build_synthetic_body(const BodyConfig& config = {});

// Mesh + weights for an arbitrary rig (used by tests for small chains).
SkinnedBody build_capsule_body(const CapsuleRig& rig, int mesh_resolution, double falloff);

// Grid dims with the requested resolution along the largest axis of bbox and
// proportionally fewer nodes on the others (minimum 8).
GridDims proportional_dims(const Aabb& bbox, int resolution);

}  // namespace fite
