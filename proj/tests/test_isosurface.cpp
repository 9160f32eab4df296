#include <doctest.h>

#include <cmath>

#include "fite/errors.hpp"
#include "fite/isosurface.hpp"

using namespace fite;

namespace {

std::vector<double> binary_sphere(const GridDims& dims, const Aabb& box, double radius) {
  std::vector<double> vals(dims.node_count());
  for (int k = 0; k < dims.nz; ++k)
    for (int j = 0; j < dims.ny; ++j)
      for (int i = 0; i < dims.nx; ++i)
        vals[dims.index(i, j, k)] =
            grid_node_position(dims, box, i, j, k).norm() < radius ? 1.0 : 0.0;
  return vals;
}

Aabb unit_box() {
  Aabb b;
  b.min = Vec3(-1, -1, -1);
  b.max = Vec3(1, 1, 1);
  return b;
}

double max_radius_error(const TriMesh& mesh, double radius) {
  double worst = 0;
  for (const Vec3& v : mesh.vertices) worst = std::max(worst, std::abs(v.norm() - radius));
  return worst;
}

}  // namespace

TEST_SUITE("isosurface") {

TEST_CASE("binary sphere: vertices within one voxel of the radius") {
  GridDims dims{64, 64, 64};
  Aabb box = unit_box();
  TriMesh mesh = extract_isosurface(binary_sphere(dims, box, 0.7), dims, box, 0.5);
  double voxel = 2.0 / 63;
  CHECK(mesh.is_watertight());
  CHECK(mesh.euler_characteristic() == 2);
  CHECK(max_radius_error(mesh, 0.7) < voxel);
}

TEST_CASE("continuous field extraction is watertight and oriented outward") {
  GridDims dims{32, 32, 32};
  Aabb box = unit_box();
  std::vector<double> vals(dims.node_count());
  for (int k = 0; k < dims.nz; ++k)
    for (int j = 0; j < dims.ny; ++j)
      for (int i = 0; i < dims.nx; ++i) {
        Vec3 p = grid_node_position(dims, box, i, j, k);
        vals[dims.index(i, j, k)] = 0.75 - p.norm();  // inside = positive
      }
  TriMesh mesh = extract_isosurface(vals, dims, box, 0.0);
  std::string why;
  CHECK(mesh.is_watertight(&why));
  // outward orientation: face normals leave the sphere
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    CHECK(mesh.face_normal(int(f)).dot(mesh.centroid_of_face(int(f))) > 0);
}

TEST_CASE("watertight across random smooth fields") {
  Rng rng(3);
  for (int trial = 0; trial < 4; ++trial) {
    GridDims dims{20, 20, 20};
    Aabb box = unit_box();
    // random blob union, kept away from the grid boundary
    std::vector<Vec3> centers;
    std::vector<double> radii;
    for (int b = 0; b < 4; ++b) {
      centers.push_back(
          Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)));
      radii.push_back(rng.uniform(0.15, 0.35));
    }
    std::vector<double> vals(dims.node_count());
    for (int k = 0; k < dims.nz; ++k)
      for (int j = 0; j < dims.ny; ++j)
        for (int i = 0; i < dims.nx; ++i) {
          Vec3 p = grid_node_position(dims, box, i, j, k);
          double d = -1e9;
          for (size_t b = 0; b < centers.size(); ++b)
            d = std::max(d, radii[b] - (p - centers[b]).norm());
          vals[dims.index(i, j, k)] = d;
        }
    TriMesh mesh = extract_isosurface(vals, dims, box, 0.0);
    std::string why;
    CHECK_MESSAGE(mesh.is_watertight(&why), why);
  }
}

TEST_CASE("first-order convergence on the binary sphere") {
  Aabb box = unit_box();
  GridDims lo{64, 64, 64}, hi{128, 128, 128};
  double err_lo = max_radius_error(extract_isosurface(binary_sphere(lo, box, 0.7), lo, box, 0.5), 0.7);
  double err_hi = max_radius_error(extract_isosurface(binary_sphere(hi, box, 0.7), hi, box, 0.5), 0.7);
  double ratio = err_lo / err_hi;
  CHECK(ratio > 1.5);  // halving within +-25%
  CHECK(ratio < 2.5);
}

TEST_CASE("empty level set throws") {
  GridDims dims{8, 8, 8};
  Aabb box = unit_box();
  std::vector<double> vals(dims.node_count(), 0.0);
  CHECK_THROWS_AS(extract_isosurface(vals, dims, box, 0.5), ExtractionError);
}

}  // TEST_SUITE
