#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fite/types.hpp"

namespace fite {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  Aabb bounds() const;
  Vec3 face_normal(int f) const;  // unit; zero vector for degenerate faces
  double face_area(int f) const;
  double total_area() const;
  Vec3 centroid_of_face(int f) const;

  // Area-weighted vertex normals, normalized (zero where undefined).
  std::vector<Vec3> vertex_normals() const;

  // V - E + F with E counted as unique undirected edges.
  long euler_characteristic() const;

  // Every undirected edge shared by exactly two faces with opposite
  // orientation, and all face indices valid.
  bool is_watertight(std::string* why = nullptr) const;

  void validate_indices() const;
};

// Drops faces with repeated vertex indices and unreferenced vertices.
TriMesh cleanup_degenerate(const TriMesh& mesh);

// Largest connected component by face count (connectivity via shared vertices).
TriMesh largest_component(const TriMesh& mesh);

int connected_component_count(const TriMesh& mesh);

// ---- file formats ----

// ASCII OBJ, positions + faces only.
void save_obj(const std::string& path, const TriMesh& mesh);
TriMesh load_obj(const std::string& path);

// Binary little-endian PLY. Positions always; normals and per-vertex weight
// channels (w_0 ... w_{J-1}, 32-bit floats) optional; faces optional.
struct PlyData {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;                // empty or same length
  MatXR weights;                             // 0x0 or N x J
  std::vector<std::array<int, 3>> faces;    // may be empty
};

void save_ply(const std::string& path, const PlyData& data);
PlyData load_ply(const std::string& path);

}  // namespace fite
