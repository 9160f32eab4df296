#include "fite/isosurface.hpp"

#include <array>
#include <unordered_map>

#include "fite/errors.hpp"
#include "fite/parallel.hpp"

namespace fite {

Vec3 grid_spacing(const GridDims& dims, const Aabb& bbox) {
  return Vec3(bbox.extent().x() / (dims.nx - 1), bbox.extent().y() / (dims.ny - 1),
              bbox.extent().z() / (dims.nz - 1));
}

Vec3 grid_node_position(const GridDims& dims, const Aabb& bbox, int i, int j, int k) {
  Vec3 h = grid_spacing(dims, bbox);
  return bbox.min + Vec3(i * h.x(), j * h.y(), k * h.z());
}

namespace {

// 6-tet decomposition of the unit cell around the 0-7 main diagonal. Corner c
// of a cell is at offset ((c&1), (c>>1)&1, (c>>2)&1).
constexpr int kTets[6][4] = {
    {0, 5, 1, 7}, {0, 1, 3, 7}, {0, 3, 2, 7},
    {0, 2, 6, 7}, {0, 6, 4, 7}, {0, 4, 5, 7},
};

struct EdgeKeyHash {
  size_t operator()(uint64_t k) const { return std::hash<uint64_t>()(k); }
};

}  // namespace

TriMesh extract_isosurface(const std::vector<double>& values, const GridDims& dims,
                           const Aabb& bbox, double iso) {
  if (long(values.size()) != dims.node_count())
    throw DimensionError("extract_isosurface: value count != node count");
  if (dims.nx < 2 || dims.ny < 2 || dims.nz < 2)
    throw InvalidInputError("extract_isosurface: grid must be at least 2 per axis");

  TriMesh mesh;
  std::unordered_map<uint64_t, int, EdgeKeyHash> edge_vertex;
  edge_vertex.reserve(1 << 16);

  auto vertex_on_edge = [&](long na, long nb) -> int {
    if (na > nb) std::swap(na, nb);
    uint64_t key = (uint64_t(na) << 32) | uint64_t(nb);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    double fa = values[na], fb = values[nb];
    double t = (iso - fa) / (fb - fa);
    long ax = na % dims.nx, ay = (na / dims.nx) % dims.ny, az = na / (long(dims.nx) * dims.ny);
    long bx = nb % dims.nx, by = (nb / dims.nx) % dims.ny, bz = nb / (long(dims.nx) * dims.ny);
    Vec3 pa = grid_node_position(dims, bbox, int(ax), int(ay), int(az));
    Vec3 pb = grid_node_position(dims, bbox, int(bx), int(by), int(bz));
    int idx = int(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    edge_vertex.emplace(key, idx);
    return idx;
  };

  // Orient so the normal points away from the inside (f > iso): for the linear
  // interpolant on a tet the outward direction is -grad f.
  auto emit = [&](int va, int vb, int vc, const std::array<long, 4>& nodes) {
    const Vec3& a = mesh.vertices[va];
    const Vec3& b = mesh.vertices[vb];
    const Vec3& c = mesh.vertices[vc];
    Vec3 n = (b - a).cross(c - a);
    // gradient of the linear interpolant over the tet
    long n0 = nodes[0];
    auto pos = [&](long node) {
      long x = node % dims.nx, y = (node / dims.nx) % dims.ny, z = node / (long(dims.nx) * dims.ny);
      return grid_node_position(dims, bbox, int(x), int(y), int(z));
    };
    Mat3 m;
    Vec3 df;
    Vec3 p0 = pos(n0);
    for (int r = 0; r < 3; ++r) {
      m.row(r) = (pos(nodes[r + 1]) - p0).transpose();
      df[r] = values[nodes[r + 1]] - values[n0];
    }
    Vec3 grad = m.inverse() * df;
    if (n.dot(grad) > 0)
      mesh.faces.push_back({va, vc, vb});
    else
      mesh.faces.push_back({va, vb, vc});
  };

  for (int k = 0; k + 1 < dims.nz; ++k) {
    for (int j = 0; j + 1 < dims.ny; ++j) {
      for (int i = 0; i + 1 < dims.nx; ++i) {
        long corner[8];
        for (int c = 0; c < 8; ++c)
          corner[c] = dims.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
        for (const auto& tet : kTets) {
          std::array<long, 4> nodes = {corner[tet[0]], corner[tet[1]], corner[tet[2]],
                                       corner[tet[3]]};
          int mask = 0;
          for (int v = 0; v < 4; ++v)
            if (values[nodes[v]] > iso) mask |= 1 << v;
          if (mask == 0 || mask == 15) continue;

          int in_count = __builtin_popcount(mask);
          if (in_count == 1 || in_count == 3) {
            int lone = -1;
            for (int v = 0; v < 4; ++v) {
              bool inside = (mask >> v) & 1;
              if ((in_count == 1 && inside) || (in_count == 3 && !inside)) lone = v;
            }
            int vs[3], w = 0;
            for (int v = 0; v < 4; ++v)
              if (v != lone) vs[w++] = vertex_on_edge(nodes[lone], nodes[v]);
            emit(vs[0], vs[1], vs[2], nodes);
          } else {  // 2 in / 2 out: quad split into two triangles
            int in[2], out[2], wi = 0, wo = 0;
            for (int v = 0; v < 4; ++v) {
              if ((mask >> v) & 1)
                in[wi++] = v;
              else
                out[wo++] = v;
            }
            int e00 = vertex_on_edge(nodes[in[0]], nodes[out[0]]);
            int e01 = vertex_on_edge(nodes[in[0]], nodes[out[1]]);
            int e10 = vertex_on_edge(nodes[in[1]], nodes[out[0]]);
            int e11 = vertex_on_edge(nodes[in[1]], nodes[out[1]]);
            emit(e00, e01, e11, nodes);
            emit(e00, e11, e10, nodes);
          }
        }
      }
    }
  }

  if (mesh.faces.empty()) throw ExtractionError("extract_isosurface: empty level set");
  return mesh;
}

TriMesh extract_isosurface(const std::function<double(const Vec3&)>& fn, const GridDims& dims,
                           const Aabb& bbox, double iso) {
  std::vector<double> values(dims.node_count());
  parallel_chunks(dims.nz, [&](int64_t kb, int64_t ke) {
    for (int64_t k = kb; k < ke; ++k)
      for (int j = 0; j < dims.ny; ++j)
        for (int i = 0; i < dims.nx; ++i)
          values[dims.index(i, j, int(k))] =
              fn(grid_node_position(dims, bbox, i, j, int(k)));
  });
  return extract_isosurface(values, dims, bbox, iso);
}

}  // namespace fite
