#pragma once

#include <span>
#include <string>
#include <vector>

#include "fite/types.hpp"

namespace fite {

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }

  // this ∘ other: apply other first, then this.
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
  }

  static RigidTransform identity() { return RigidTransform{}; }

  // Orthonormality with det +1, tolerance on RᵀR−I and det−1.
  bool is_valid_rotation(double tol = 1e-9) const;
};

// Axis-angle to rotation matrix. Uses the Taylor branch of the sin/cos
// coefficients below ‖aa‖ < 1e-8 so the zero pose is exactly identity-stable.
Mat3 rodrigues(const Vec3& axis_angle);

struct Skeleton {
  int joint_count = 0;
  std::vector<int> parent;           // parent[root] = -1, root is joint 0
  std::vector<Vec3> rest_positions;  // meters

  void validate() const;  // tree rooted at 0, finite positions
};

struct Pose {
  std::vector<Vec3> joint_rotations;  // axis-angle, radians
  Vec3 root_translation = Vec3::Zero();

  static Pose zero(int joint_count) {
    Pose p;
    p.joint_rotations.assign(joint_count, Vec3::Zero());
    return p;
  }
  int joint_count() const { return int(joint_rotations.size()); }

  // L1 norm of the concatenated joint axis-angle vector. Root translation is
  // deliberately excluded.
  double joint_l1_norm() const;
};

// World-space bone transforms: a point rigidly attached to joint j in the rest
// configuration maps through transforms[j] to its posed location. Each joint
// rotates about its rest position; transforms compose parent-to-child.
std::vector<RigidTransform> forward_kinematics(const Skeleton& skeleton, const Pose& pose);

// q = Σ_j w_j (R_j p + t_j). Weights must sum to 1 within 1e-5.
Vec3 lbs_warp(const Vec3& p, std::span<const double> weights,
              std::span<const RigidTransform> transforms);

// Rotation-only blend Σ_j w_j R̂_j v; optionally normalized to unit length.
Vec3 blend_direction(const Vec3& v, std::span<const double> weights,
                     std::span<const RigidTransform> transforms, bool normalize);

// Blended rotation matrix Σ_j w_j R̂_j (the linear map behind blend_direction
// and the rotational part of lbs_warp).
Mat3 blend_rotation(std::span<const double> weights,
                    std::span<const RigidTransform> transforms);

// Key-value text file: joint axis-angle triples in order plus root translation.
void save_pose(const std::string& path, const Pose& pose);
Pose load_pose(const std::string& path);

void save_skeleton(const std::string& path, const Skeleton& skeleton);
Skeleton load_skeleton(const std::string& path);

}  // namespace fite
