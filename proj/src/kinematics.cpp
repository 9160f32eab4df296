#include "fite/kinematics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fite/errors.hpp"

namespace fite {

bool RigidTransform::is_valid_rotation(double tol) const {
  Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  if (err.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat3 rodrigues(const Vec3& aa) {
  double theta2 = aa.squaredNorm();
  double theta = std::sqrt(theta2);
  double a, b;  // R = I + a·K + b·K², K = skew(aa)
  if (theta < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  Mat3 k;
  k << 0, -aa.z(), aa.y(), aa.z(), 0, -aa.x(), -aa.y(), aa.x(), 0;
  return Mat3::Identity() + a * k + b * (k * k);
}

void Skeleton::validate() const {
  if (joint_count <= 0) throw InvalidInputError("skeleton: joint_count must be positive");
  if (int(parent.size()) != joint_count || int(rest_positions.size()) != joint_count)
    throw DimensionError("skeleton: parent/rest_positions size mismatch");
  if (parent[0] != -1) throw InvalidInputError("skeleton: joint 0 must be the root");
  for (int j = 1; j < joint_count; ++j) {
    if (parent[j] < 0 || parent[j] >= joint_count)
      throw InvalidInputError("skeleton: parent index out of range");
    if (parent[j] >= j)
      throw InvalidInputError("skeleton: parents must precede children");
  }
  for (const Vec3& p : rest_positions)
    if (!p.allFinite()) throw InvalidInputError("skeleton: non-finite rest position");
}

double Pose::joint_l1_norm() const {
  double s = 0;
  for (const Vec3& aa : joint_rotations) s += aa.cwiseAbs().sum();
  return s;
}

std::vector<RigidTransform> forward_kinematics(const Skeleton& skeleton, const Pose& pose) {
  skeleton.validate();
  if (pose.joint_count() != skeleton.joint_count)
    throw DimensionError("forward_kinematics: pose has " + std::to_string(pose.joint_count()) +
                         " joints, skeleton has " + std::to_string(skeleton.joint_count));
  std::vector<RigidTransform> world(skeleton.joint_count);
  for (int j = 0; j < skeleton.joint_count; ++j) {
    const Vec3& c = skeleton.rest_positions[j];
    RigidTransform local;
    local.rotation = rodrigues(pose.joint_rotations[j]);
    local.translation = c - local.rotation * c;
    if (j == 0) {
      local.translation += pose.root_translation;
      world[j] = local;
    } else {
      world[j] = world[skeleton.parent[j]].compose(local);
    }
  }
  return world;
}

static void check_blend_inputs(std::span<const double> weights,
                               std::span<const RigidTransform> transforms) {
  if (weights.size() != transforms.size())
    throw DimensionError("lbs: weight count != transform count");
  double s = 0;
  for (double w : weights) s += w;
  if (std::abs(s - 1.0) > 1e-5)
    throw ContractError("lbs: weights sum to " + std::to_string(s) + ", expected 1");
}

Vec3 lbs_warp(const Vec3& p, std::span<const double> weights,
              std::span<const RigidTransform> transforms) {
  check_blend_inputs(weights, transforms);
  Vec3 q = Vec3::Zero();
  for (size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] == 0.0) continue;
    q += weights[j] * transforms[j].apply(p);
  }
  return q;
}

Mat3 blend_rotation(std::span<const double> weights,
                    std::span<const RigidTransform> transforms) {
  check_blend_inputs(weights, transforms);
  Mat3 r = Mat3::Zero();
  for (size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] == 0.0) continue;
    r += weights[j] * transforms[j].rotation;
  }
  return r;
}

Vec3 blend_direction(const Vec3& v, std::span<const double> weights,
                     std::span<const RigidTransform> transforms, bool normalize) {
  Vec3 out = blend_rotation(weights, transforms) * v;
  if (normalize) {
    double n = out.norm();
    if (n < 1e-12)
      throw DegenerateDirectionError("blend_direction: blended vector has zero length");
    out /= n;
  }
  return out;
}

void save_pose(const std::string& path, const Pose& pose) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write pose file: " + path);
  f << "joint_count " << pose.joint_count() << "\n";
  char buf[160];
  for (int j = 0; j < pose.joint_count(); ++j) {
    const Vec3& aa = pose.joint_rotations[j];
    std::snprintf(buf, sizeof(buf), "joint %d %.17g %.17g %.17g\n", j, aa.x(), aa.y(), aa.z());
    f << buf;
  }
  std::snprintf(buf, sizeof(buf), "root_translation %.17g %.17g %.17g\n",
                pose.root_translation.x(), pose.root_translation.y(), pose.root_translation.z());
  f << buf;
}

Pose load_pose(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read pose file: " + path);
  Pose pose;
  std::string key;
  int n = -1;
  while (f >> key) {
    if (key == "joint_count") {
      f >> n;
      if (n <= 0) throw IoError("pose file: bad joint_count");
      pose.joint_rotations.assign(n, Vec3::Zero());
    } else if (key == "joint") {
      int j;
      double x, y, z;
      f >> j >> x >> y >> z;
      if (n < 0 || j < 0 || j >= n) throw IoError("pose file: joint index out of range");
      pose.joint_rotations[j] = Vec3(x, y, z);
    } else if (key == "root_translation") {
      double x, y, z;
      f >> x >> y >> z;
      pose.root_translation = Vec3(x, y, z);
    } else {
      throw IoError("pose file: unknown key '" + key + "'");
    }
  }
  if (n < 0) throw IoError("pose file: missing joint_count");
  return pose;
}

void save_skeleton(const std::string& path, const Skeleton& s) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write skeleton file: " + path);
  f << "joint_count " << s.joint_count << "\n";
  char buf[200];
  for (int j = 0; j < s.joint_count; ++j) {
    const Vec3& p = s.rest_positions[j];
    std::snprintf(buf, sizeof(buf), "joint %d parent %d rest %.17g %.17g %.17g\n", j,
                  s.parent[j], p.x(), p.y(), p.z());
    f << buf;
  }
}

Skeleton load_skeleton(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read skeleton file: " + path);
  Skeleton s;
  std::string key;
  while (f >> key) {
    if (key == "joint_count") {
      f >> s.joint_count;
      s.parent.assign(s.joint_count, -1);
      s.rest_positions.assign(s.joint_count, Vec3::Zero());
    } else if (key == "joint") {
      int j, par;
      double x, y, z;
      std::string kw1, kw2;
      f >> j >> kw1 >> par >> kw2 >> x >> y >> z;
      if (j < 0 || j >= s.joint_count || kw1 != "parent" || kw2 != "rest")
        throw IoError("skeleton file: malformed joint line");
      s.parent[j] = par;
      s.rest_positions[j] = Vec3(x, y, z);
    } else {
      throw IoError("skeleton file: unknown key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

}  // namespace fite
