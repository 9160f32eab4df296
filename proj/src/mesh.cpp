#include "fite/mesh.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

#include "fite/errors.hpp"

namespace fite {

Aabb TriMesh::bounds() const {
  Aabb b;
  for (const Vec3& v : vertices) b.expand(v);
  return b;
}

Vec3 TriMesh::face_normal(int f) const {
  const auto& t = faces[f];
  Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

double TriMesh::face_area(int f) const {
  const auto& t = faces[f];
  return 0.5 *
         (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriMesh::total_area() const {
  double a = 0;
  for (size_t f = 0; f < faces.size(); ++f) a += face_area(int(f));
  return a;
}

Vec3 TriMesh::centroid_of_face(int f) const {
  const auto& t = faces[f];
  return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
}

std::vector<Vec3> TriMesh::vertex_normals() const {
  std::vector<Vec3> normals(vertices.size(), Vec3::Zero());
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    for (int k = 0; k < 3; ++k) normals[t[k]] += 0.5 * n;  // area-weighted
  }
  for (Vec3& n : normals) {
    double len = n.norm();
    if (len > 0) n /= len;
  }
  return normals;
}

void TriMesh::validate_indices() const {
  int n = int(vertices.size());
  for (const auto& t : faces)
    for (int k = 0; k < 3; ++k)
      if (t[k] < 0 || t[k] >= n) throw InvalidInputError("mesh: face index out of range");
}

static uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (uint64_t(uint32_t(a)) << 32) | uint32_t(b);
}

long TriMesh::euler_characteristic() const {
  std::unordered_map<uint64_t, int> edges;
  edges.reserve(faces.size() * 3);
  for (const auto& t : faces)
    for (int k = 0; k < 3; ++k) edges[edge_key(t[k], t[(k + 1) % 3])] = 1;
  return long(vertices.size()) - long(edges.size()) + long(faces.size());
}

bool TriMesh::is_watertight(std::string* why) const {
  int nv = int(vertices.size());
  if (faces.empty()) {
    if (why) *why = "no faces";
    return false;
  }
  // directed edge counts: closed orientable surface has every directed edge
  // exactly once and its reverse exactly once
  std::unordered_map<uint64_t, int> forward, backward;
  forward.reserve(faces.size() * 3);
  backward.reserve(faces.size() * 3);
  for (const auto& t : faces) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a < 0 || a >= nv || b < 0 || b >= nv) {
        if (why) *why = "face index out of range";
        return false;
      }
      if (a == b) {
        if (why) *why = "degenerate face (repeated vertex)";
        return false;
      }
      uint64_t key = edge_key(a, b);
      if (a < b)
        forward[key]++;
      else
        backward[key]++;
    }
  }
  if (forward.size() != backward.size()) {
    if (why) *why = "boundary or inconsistent orientation";
    return false;
  }
  for (const auto& [key, cnt] : forward) {
    auto it = backward.find(key);
    if (cnt != 1 || it == backward.end() || it->second != 1) {
      if (why) *why = "edge not shared by exactly two opposite-oriented faces";
      return false;
    }
  }
  return true;
}

TriMesh cleanup_degenerate(const TriMesh& mesh) {
  TriMesh out;
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (const auto& t : mesh.faces) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    std::array<int, 3> nt;
    for (int k = 0; k < 3; ++k) {
      if (remap[t[k]] < 0) {
        remap[t[k]] = int(out.vertices.size());
        out.vertices.push_back(mesh.vertices[t[k]]);
      }
      nt[k] = remap[t[k]];
    }
    out.faces.push_back(nt);
  }
  return out;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::vector<int> face_component_labels(const TriMesh& mesh, int* n_components) {
  UnionFind uf(int(mesh.vertices.size()));
  for (const auto& t : mesh.faces) {
    uf.unite(t[0], t[1]);
    uf.unite(t[1], t[2]);
  }
  std::map<int, int> roots;  // ordered for determinism
  std::vector<int> labels(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    int r = uf.find(mesh.faces[f][0]);
    auto [it, inserted] = roots.emplace(r, int(roots.size()));
    labels[f] = it->second;
  }
  if (n_components) *n_components = int(roots.size());
  return labels;
}

}  // namespace

int connected_component_count(const TriMesh& mesh) {
  int n = 0;
  face_component_labels(mesh, &n);
  return n;
}

TriMesh largest_component(const TriMesh& mesh) {
  if (mesh.faces.empty()) return mesh;
  int n = 0;
  std::vector<int> labels = face_component_labels(mesh, &n);
  std::vector<long> counts(n, 0);
  for (int l : labels) counts[l]++;
  int best = int(std::max_element(counts.begin(), counts.end()) - counts.begin());

  TriMesh picked;
  picked.vertices = mesh.vertices;
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    if (labels[f] == best) picked.faces.push_back(mesh.faces[f]);
  return cleanup_degenerate(picked);
}

}  // namespace fite
