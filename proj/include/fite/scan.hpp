#pragma once

#include <string>
#include <vector>

#include "fite/kinematics.hpp"
#include "fite/mesh.hpp"
#include "fite/synthetic_body.hpp"
#include "fite/types.hpp"

namespace fite {

struct PointCloudN {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // unit

  void validate() const;  // lengths match, normals unit within 1e-5
  size_t size() const { return points.size(); }
};

// Inside/outside of a watertight mesh by ray-crossing parity. Degenerate hits
// (within 1e-9 of an edge/vertex, grazing plane, or zero-distance origin)
// trigger a re-cast along the next direction in a fixed pseudo-random
// sequence. Queries are pure and safe to run concurrently.
class MeshOccupancy {
 public:
  explicit MeshOccupancy(const TriMesh& mesh);

  int query(const Vec3& q) const;  // 1 inside, 0 outside

  const TriMesh& mesh() const { return mesh_; }

 private:
  TriMesh mesh_;
  Aabb bbox_;
  Vec3 cell_size_;
  int cx_, cy_, cz_;
  std::vector<int> cell_start_;  // CSR over cells
  std::vector<int> cell_tris_;

  int cast_parity(const Vec3& q, const Vec3& dir, bool* degenerate) const;
};

// One-shot convenience wrapper around MeshOccupancy.
int occupancy_query(const TriMesh& watertight_mesh, const Vec3& q);

// Area-weighted uniform surface samples with face normals; deterministic.
PointCloudN sample_surface(const TriMesh& mesh, long n, uint64_t seed);

enum class OutfitKind { Tight, Skirt, Dress };

const char* outfit_kind_name(OutfitKind k);
OutfitKind parse_outfit_kind(const std::string& name);

struct OutfitSpec {
  OutfitKind kind = OutfitKind::Tight;
  int outfit_id = 0;
  double offset = 0.012;            // inflation over the body surface (m)
  double wrinkle_freq = 12.0;       // spatial frequency (rad/m)
  double wrinkle_amp_per_rad = 0.03;  // amplitude slope vs mean bend angle (m/rad)
  double wrinkle_phase = 0.0;
};

struct ScanFrame {
  PointCloudN cloud;
  TriMesh mesh;  // watertight posed clothed mesh
  Pose pose;
  int outfit_id = 0;
  OutfitKind outfit_kind = OutfitKind::Tight;
};

// Canonical clothed solid: negative inside. Body capsules inflated by
// outfit.offset, plus the garment shell for skirt/dress.
double clothed_field(const CapsuleRig& rig, const OutfitSpec& outfit, const Vec3& p);

// Outward unit direction of the clothed field (central differences). Smooth
// across the surface, independent of any mesh tessellation; wrinkles displace
// along this direction.
Vec3 clothed_field_normal(const CapsuleRig& rig, const OutfitSpec& outfit, const Vec3& p);

// Wrinkle amplitude for a pose: amp_per_rad times the mean elbow/knee bend
// angle (joints 3, 5, 7, 9 of the humanoid rig).
double wrinkle_amplitude(const OutfitSpec& outfit, const Pose& pose);

// Canonical-space wrinkle displacement at canonical point p with canonical
// unit normal n. Added before LBS warping.
Vec3 wrinkle_displacement_canonical(const OutfitSpec& outfit, const Pose& pose, const Vec3& p,
                                    const Vec3& n);

// The same displacement observed in posed space (rotated by the blended bone
// rotations at p), with the displacement direction taken from the clothed
// field itself. This is the exact generator signal that a trained
// pose-dependent offset should recover.
Vec3 wrinkle_displacement_posed(const OutfitSpec& outfit, const CapsuleRig& rig, double falloff,
                                const Pose& pose, const Vec3& p);

struct ScanGenConfig {
  int mesh_resolution = 96;   // canonical clothed mesh grid, largest axis
  long cloud_samples = 16384; // points per scan
  double weight_falloff = 0.17;
};

// Procedural clothed scans: canonical clothed mesh from the analytic field,
// analytic skinning weights at its vertices, canonical wrinkles, LBS warp per
// pose, surface sampling. Deterministic given inputs and seed.
std::vector<ScanFrame> generate_clothed_scans(const CapsuleRig& rig, const OutfitSpec& outfit,
                                              const std::vector<Pose>& poses,
                                              const ScanGenConfig& config, uint64_t seed);

// ---- dataset on disk ----

void save_frame(const std::string& dir, const ScanFrame& frame);
ScanFrame load_frame(const std::string& dir);

struct FrameEntry {
  int index = 0;
  std::string dir;  // relative to manifest directory
  bool train = true;
  int outfit_id = 0;
  OutfitKind outfit_kind = OutfitKind::Tight;
};

struct DatasetManifest {
  std::string body_path;      // OBJ, relative to manifest dir
  std::string weights_path;   // PLY with w_ properties
  std::string skeleton_path;  // text
  std::vector<FrameEntry> frames;
};

void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

// Directory that contains the manifest file (for resolving relative entries).
std::string manifest_dir(const std::string& manifest_path);

}  // namespace fite
