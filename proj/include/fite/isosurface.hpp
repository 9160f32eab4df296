#pragma once

#include <functional>
#include <vector>

#include "fite/mesh.hpp"
#include "fite/types.hpp"

namespace fite {

struct GridDims {
  int nx = 0, ny = 0, nz = 0;
  long node_count() const { return long(nx) * ny * nz; }
  long index(int i, int j, int k) const { return i + long(nx) * (j + long(ny) * k); }
};

// Node position of a sampling grid spanning bbox inclusively (node 0 at
// bbox.min, node n-1 at bbox.max).
Vec3 grid_node_position(const GridDims& dims, const Aabb& bbox, int i, int j, int k);
Vec3 grid_spacing(const GridDims& dims, const Aabb& bbox);

// Iso-surface of node values at the given iso level, by tetrahedral
// decomposition of each cell (6 tets sharing the main diagonal; crossing-edge
// vertices by linear interpolation). The decomposition is face-consistent
// across cells, so the output of a level set contained in the grid interior is
// a closed, consistently oriented (outward: away from values > iso) manifold.
// Throws ExtractionError when the level set is empty.
TriMesh extract_isosurface(const std::vector<double>& values, const GridDims& dims,
                           const Aabb& bbox, double iso);

// Convenience: evaluate fn on the grid (parallel over slabs), then extract.
TriMesh extract_isosurface(const std::function<double(const Vec3&)>& fn, const GridDims& dims,
                           const Aabb& bbox, double iso);

}  // namespace fite
