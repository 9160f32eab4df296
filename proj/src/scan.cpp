#include "fite/scan.hpp"

#include <algorithm>
#include <cmath>

#include "fite/errors.hpp"
#include "fite/parallel.hpp"

namespace fite {

void PointCloudN::validate() const {
  if (points.size() != normals.size())
    throw DimensionError("point cloud: points/normals length mismatch");
  for (const Vec3& n : normals)
    if (std::abs(n.norm() - 1.0) > 1e-5)
      throw ContractError("point cloud: normal not unit length");
}

// ---- MeshOccupancy ----

MeshOccupancy::MeshOccupancy(const TriMesh& mesh) : mesh_(mesh) {
  std::string why;
  if (!mesh_.is_watertight(&why))
    throw InvalidInputError("occupancy: mesh not watertight: " + why);
  bbox_ = mesh_.bounds();
  // loosen so boundary triangles never sit exactly on the outer cell faces
  bbox_ = bbox_.padded(1e-6 * (1.0 + bbox_.diagonal()));

  long nt = long(mesh_.faces.size());
  int res = std::max(2, int(std::cbrt(double(nt))));
  cx_ = cy_ = cz_ = res;
  cell_size_ = Vec3(bbox_.extent().x() / cx_, bbox_.extent().y() / cy_, bbox_.extent().z() / cz_);

  auto cell_of = [&](int ix, int iy, int iz) { return ix + cx_ * (iy + long(cy_) * iz); };
  long ncells = long(cx_) * cy_ * cz_;
  std::vector<int> counts(ncells, 0);

  auto tri_cell_range = [&](long t, int lo[3], int hi[3]) {
    Aabb tb;
    for (int k = 0; k < 3; ++k) tb.expand(mesh_.vertices[mesh_.faces[t][k]]);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::clamp(int((tb.min[a] - bbox_.min[a]) / cell_size_[a]), 0,
                         (a == 0 ? cx_ : a == 1 ? cy_ : cz_) - 1);
      hi[a] = std::clamp(int((tb.max[a] - bbox_.min[a]) / cell_size_[a]), 0,
                         (a == 0 ? cx_ : a == 1 ? cy_ : cz_) - 1);
    }
  };

  for (long t = 0; t < nt; ++t) {
    int lo[3], hi[3];
    tri_cell_range(t, lo, hi);
    for (int iz = lo[2]; iz <= hi[2]; ++iz)
      for (int iy = lo[1]; iy <= hi[1]; ++iy)
        for (int ix = lo[0]; ix <= hi[0]; ++ix) counts[cell_of(ix, iy, iz)]++;
  }
  cell_start_.assign(ncells + 1, 0);
  for (long c = 0; c < ncells; ++c) cell_start_[c + 1] = cell_start_[c] + counts[c];
  cell_tris_.resize(cell_start_.back());
  std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (long t = 0; t < nt; ++t) {
    int lo[3], hi[3];
    tri_cell_range(t, lo, hi);
    for (int iz = lo[2]; iz <= hi[2]; ++iz)
      for (int iy = lo[1]; iy <= hi[1]; ++iy)
        for (int ix = lo[0]; ix <= hi[0]; ++ix) cell_tris_[cursor[cell_of(ix, iy, iz)]++] = int(t);
  }
}

int MeshOccupancy::cast_parity(const Vec3& q, const Vec3& dir, bool* degenerate) const {
  *degenerate = false;
  // 3D-DDA cell walk from q to the bbox exit
  int ix = std::clamp(int((q.x() - bbox_.min.x()) / cell_size_.x()), 0, cx_ - 1);
  int iy = std::clamp(int((q.y() - bbox_.min.y()) / cell_size_.y()), 0, cy_ - 1);
  int iz = std::clamp(int((q.z() - bbox_.min.z()) / cell_size_.z()), 0, cz_ - 1);
  int idx[3] = {ix, iy, iz};
  int dims[3] = {cx_, cy_, cz_};
  int step[3];
  double t_max[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    if (dir[a] > 0) {
      step[a] = 1;
      double edge = bbox_.min[a] + (idx[a] + 1) * cell_size_[a];
      t_max[a] = (edge - q[a]) / dir[a];
      t_delta[a] = cell_size_[a] / dir[a];
    } else if (dir[a] < 0) {
      step[a] = -1;
      double edge = bbox_.min[a] + idx[a] * cell_size_[a];
      t_max[a] = (edge - q[a]) / dir[a];
      t_delta[a] = -cell_size_[a] / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::max();
      t_delta[a] = std::numeric_limits<double>::max();
    }
  }

  std::vector<int> hits;
  hits.reserve(16);
  constexpr double kBaryEps = 1e-9;
  while (true) {
    long c = idx[0] + cx_ * (idx[1] + long(cy_) * idx[2]);
    for (int s = cell_start_[c]; s < cell_start_[c + 1]; ++s) {
      int t = cell_tris_[s];
      const auto& f = mesh_.faces[t];
      const Vec3& v0 = mesh_.vertices[f[0]];
      Vec3 e1 = mesh_.vertices[f[1]] - v0;
      Vec3 e2 = mesh_.vertices[f[2]] - v0;
      Vec3 pvec = dir.cross(e2);
      double det = e1.dot(pvec);
      if (std::abs(det) < 1e-12) {
        // grazing only matters if the ray runs in the triangle plane nearby
        Vec3 n = e1.cross(e2);
        double nn = n.norm();
        if (nn > 0 && std::abs(n.dot(q - v0)) / nn < 1e-9) {
          *degenerate = true;
          return 0;
        }
        continue;
      }
      double inv = 1.0 / det;
      Vec3 tvec = q - v0;
      double u = tvec.dot(pvec) * inv;
      Vec3 qvec = tvec.cross(e1);
      double v = dir.dot(qvec) * inv;
      double th = e2.dot(qvec) * inv;
      if (u < -kBaryEps || v < -kBaryEps || u + v > 1 + kBaryEps || th <= -1e-9) continue;
      if (th < 1e-9) {
        if (u > -kBaryEps && v > -kBaryEps && u + v < 1 + kBaryEps) {
          *degenerate = true;  // origin essentially on the surface
          return 0;
        }
        continue;
      }
      if (u < kBaryEps || v < kBaryEps || u + v > 1 - kBaryEps) {
        *degenerate = true;  // hit within 1e-9 of an edge/vertex
        return 0;
      }
      hits.push_back(t);
    }
    // advance to next cell
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    idx[axis] += step[axis];
    if (idx[axis] < 0 || idx[axis] >= dims[axis]) break;
    t_max[axis] += t_delta[axis];
  }

  std::sort(hits.begin(), hits.end());
  long unique = std::unique(hits.begin(), hits.end()) - hits.begin();
  return int(unique & 1);
}

int MeshOccupancy::query(const Vec3& q) const {
  if (!bbox_.contains(q)) return 0;
  // fixed pseudo-random direction sequence shared by all queries
  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng rng(hash_combine(0x9a3c17f2u, uint64_t(attempt)));
    Vec3 dir;
    do {
      dir = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    } while (dir.squaredNorm() < 1e-4);
    dir.normalize();
    bool degenerate = false;
    int parity = cast_parity(q, dir, &degenerate);
    if (!degenerate) return parity;
  }
  throw InvalidInputError("occupancy: query degenerate in all ray directions");
}

int occupancy_query(const TriMesh& watertight_mesh, const Vec3& q) {
  return MeshOccupancy(watertight_mesh).query(q);
}

// ---- surface sampling ----

PointCloudN sample_surface(const TriMesh& mesh, long n, uint64_t seed) {
  if (n < 1) throw InvalidInputError("sample_surface: need at least one sample");
  if (mesh.faces.empty()) throw InvalidInputError("sample_surface: empty mesh");
  std::vector<double> cdf(mesh.faces.size());
  double acc = 0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    acc += mesh.face_area(int(f));
    cdf[f] = acc;
  }
  if (acc <= 0) throw InvalidInputError("sample_surface: zero-area mesh");

  PointCloudN cloud;
  cloud.points.resize(n);
  cloud.normals.resize(n);
  Rng rng(seed);
  for (long i = 0; i < n; ++i) {
    double u = rng.uniform() * acc;
    size_t f = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    if (f >= mesh.faces.size()) f = mesh.faces.size() - 1;
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    const auto& t = mesh.faces[f];
    cloud.points[i] = (1 - r1) * mesh.vertices[t[0]] + r1 * (1 - r2) * mesh.vertices[t[1]] +
                      r1 * r2 * mesh.vertices[t[2]];
    cloud.normals[i] = mesh.face_normal(int(f));
  }
  return cloud;
}

// ---- outfits ----

const char* outfit_kind_name(OutfitKind k) {
  switch (k) {
    case OutfitKind::Tight: return "tight";
    case OutfitKind::Skirt: return "skirt";
    case OutfitKind::Dress: return "dress";
  }
  return "tight";
}

OutfitKind parse_outfit_kind(const std::string& name) {
  if (name == "tight") return OutfitKind::Tight;
  if (name == "skirt") return OutfitKind::Skirt;
  if (name == "dress") return OutfitKind::Dress;
  throw ConfigError("unknown outfit kind: '" + name + "'");
}

namespace {

struct ShellProfile {
  // (y, a, b) control rows, top to hem
  double rows[4][3];
  double thickness;
};

// The skirt collar sits submerged inside the torso's cylindrical zone (one
// clean exit ring), flares clear of the thighs before they begin, holds a
// wide gap along them, then tucks in steeply so the hem wall passes through
// both legs: exactly two handles. The dress hangs from the chest with a free
// hem. Air gaps stay wider than twice the worst-case wrinkle amplitude so
// posed frames do not self-intersect.
ShellProfile shell_profile(OutfitKind kind) {
  if (kind == OutfitKind::Skirt)
    return {{{0.30, 0.10, 0.10},
             {0.06, 0.36, 0.25},
             {-0.26, 0.37, 0.26},
             {-0.46, 0.21, 0.16}},
            0.08};
  return {{{0.44, 0.12, 0.12},
           {0.10, 0.33, 0.24},
           {-0.20, 0.34, 0.25},
           {-0.50, 0.36, 0.26}},
          0.08};
}

double ease(double t) {  // cosine ease between control rows
  t = std::clamp(t, 0.0, 1.0);
  return 0.5 - 0.5 * std::cos(M_PI * t);
}

double shell_field(const ShellProfile& s, const Vec3& p) {
  int seg = 0;
  while (seg < 2 && p.y() < s.rows[seg + 1][0]) ++seg;
  double y0 = s.rows[seg][0], y1 = s.rows[seg + 1][0];
  double t = ease((y0 - p.y()) / (y0 - y1));
  double a = s.rows[seg][1] + (s.rows[seg + 1][1] - s.rows[seg][1]) * t;
  double b = s.rows[seg][2] + (s.rows[seg + 1][2] - s.rows[seg][2]) * t;
  double rho = std::sqrt(p.x() * p.x() / (a * a) + p.z() * p.z() / (b * b));
  double radial = (rho - 1.0) * 0.5 * (a + b);  // approximate signed distance to mid-wall
  double wall = std::abs(radial) - 0.5 * s.thickness;
  // slab clip at top and hem
  return std::max({wall, p.y() - s.rows[0][0], s.rows[3][0] - p.y()});
}

}  // namespace

double clothed_field(const CapsuleRig& rig, const OutfitSpec& outfit, const Vec3& p) {
  double f = rig.sdf(p) - outfit.offset;
  if (outfit.kind != OutfitKind::Tight) f = std::min(f, shell_field(shell_profile(outfit.kind), p));
  return f;
}

Vec3 clothed_field_normal(const CapsuleRig& rig, const OutfitSpec& outfit, const Vec3& p) {
  const double h = 1e-4;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 dp = Vec3::Zero();
    dp[a] = h;
    g[a] = (clothed_field(rig, outfit, p + dp) - clothed_field(rig, outfit, p - dp)) / (2 * h);
  }
  double len = g.norm();
  return len > 1e-12 ? Vec3(g / len) : Vec3(0, 1, 0);
}

double wrinkle_amplitude(const OutfitSpec& outfit, const Pose& pose) {
  constexpr int bend_joints[4] = {3, 5, 7, 9};  // elbows and knees
  double mean_bend = 0;
  for (int j : bend_joints)
    if (j < pose.joint_count()) mean_bend += pose.joint_rotations[j].norm();
  mean_bend /= 4.0;
  return outfit.wrinkle_amp_per_rad * mean_bend;
}

static double wrinkle_phase_at(const OutfitSpec& outfit, const Vec3& p) {
  return outfit.wrinkle_freq * (p.x() + 0.7 * p.y() + 0.3 * p.z()) + outfit.wrinkle_phase;
}

Vec3 wrinkle_displacement_canonical(const OutfitSpec& outfit, const Pose& pose, const Vec3& p,
                                    const Vec3& n) {
  return wrinkle_amplitude(outfit, pose) * std::sin(wrinkle_phase_at(outfit, p)) * n;
}

Vec3 wrinkle_displacement_posed(const OutfitSpec& outfit, const CapsuleRig& rig, double falloff,
                                const Pose& pose, const Vec3& p) {
  Vec3 canonical =
      wrinkle_displacement_canonical(outfit, pose, p, clothed_field_normal(rig, outfit, p));
  std::vector<RigidTransform> transforms = forward_kinematics(rig.skeleton, pose);
  VecX w = rig.skin_weights(p, falloff);
  return blend_rotation(std::span<const double>(w.data(), w.size()), transforms) * canonical;
}

std::vector<ScanFrame> generate_clothed_scans(const CapsuleRig& rig, const OutfitSpec& outfit,
                                              const std::vector<Pose>& poses,
                                              const ScanGenConfig& config, uint64_t seed) {
  if (poses.empty()) throw InvalidInputError("generate_clothed_scans: no poses");

  Aabb box = rig.bounds();
  if (outfit.kind != OutfitKind::Tight) {
    ShellProfile s = shell_profile(outfit.kind);
    for (const auto& row : s.rows) {
      box.expand(Vec3(row[1] + s.thickness, row[0], row[2] + s.thickness));
      box.expand(Vec3(-(row[1] + s.thickness), row[0], -(row[2] + s.thickness)));
    }
  }
  box = box.padded(0.05 * box.diagonal());
  GridDims dims = proportional_dims(box, config.mesh_resolution);

  TriMesh canonical = extract_isosurface(
      [&](const Vec3& p) { return -clothed_field(rig, outfit, p); }, dims, box, 0.0);
  std::vector<Vec3> vnormals(canonical.vertices.size());
  parallel_chunks(long(canonical.vertices.size()), [&](int64_t b, int64_t e) {
    for (int64_t v = b; v < e; ++v)
      vnormals[v] = clothed_field_normal(rig, outfit, canonical.vertices[v]);
  });

  const int J = rig.skeleton.joint_count;
  MatXR weights(canonical.vertices.size(), J);
  parallel_chunks(long(canonical.vertices.size()), [&](int64_t b, int64_t e) {
    for (int64_t v = b; v < e; ++v)
      weights.row(v) = rig.skin_weights(canonical.vertices[v], config.weight_falloff).transpose();
  });

  std::vector<ScanFrame> frames;
  frames.reserve(poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    const Pose& pose = poses[i];
    std::vector<RigidTransform> transforms = forward_kinematics(rig.skeleton, pose);
    double amp = wrinkle_amplitude(outfit, pose);

    ScanFrame frame;
    frame.pose = pose;
    frame.outfit_id = outfit.outfit_id;
    frame.outfit_kind = outfit.kind;
    frame.mesh.faces = canonical.faces;
    frame.mesh.vertices.resize(canonical.vertices.size());
    parallel_chunks(long(canonical.vertices.size()), [&](int64_t b, int64_t e) {
      for (int64_t v = b; v < e; ++v) {
        Vec3 displaced = canonical.vertices[v] +
                         amp * std::sin(wrinkle_phase_at(outfit, canonical.vertices[v])) *
                             vnormals[v];
        frame.mesh.vertices[v] =
            lbs_warp(displaced, row_span(weights, v), transforms);
      }
    });
    frame.cloud = sample_surface(frame.mesh, config.cloud_samples, hash_combine(seed, i));
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace fite
