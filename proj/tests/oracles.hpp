// Independent brute-force references used by the unit and acceptance suites.
// These deliberately avoid the library's accelerated paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fite/mesh.hpp"
#include "fite/types.hpp"

namespace fite {
namespace oracle {

// Generalized winding number by summing signed solid angles
// (van Oosterom–Strackee). Inside when |w| > 1/2 turn.
inline double winding_number(const TriMesh& mesh, const Vec3& q) {
  double w = 0;
  for (const auto& t : mesh.faces) {
    Vec3 a = mesh.vertices[t[0]] - q;
    Vec3 b = mesh.vertices[t[1]] - q;
    Vec3 c = mesh.vertices[t[2]] - q;
    double la = a.norm(), lb = b.norm(), lc = c.norm();
    double num = a.dot(b.cross(c));
    double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    w += 2.0 * std::atan2(num, den);
  }
  return w / (4.0 * M_PI);
}

inline int winding_inside(const TriMesh& mesh, const Vec3& q) {
  return std::abs(winding_number(mesh, q)) > 0.5 ? 1 : 0;
}

// O(N) nearest neighbor with the lowest-index tie rule.
inline int brute_nearest(const std::vector<Vec3>& points, const Vec3& q,
                         double* dist2_out = nullptr) {
  int best = 0;
  double best_d2 = (points[0] - q).squaredNorm();
  for (size_t i = 1; i < points.size(); ++i) {
    double d2 = (points[i] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = int(i);
    }
  }
  if (dist2_out) *dist2_out = best_d2;
  return best;
}

// O(N^2) symmetric chamfer.
inline double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double ab = 0, ba = 0;
  for (const Vec3& p : a) {
    double d2;
    brute_nearest(b, p, &d2);
    ab += d2;
  }
  for (const Vec3& p : b) {
    double d2;
    brute_nearest(a, p, &d2);
    ba += d2;
  }
  return ab / double(a.size()) + ba / double(b.size());
}

// Exact-integer per-pixel coverage test over all triangles, written
// independently of the incremental rasterizer. Same snapping (1/256 subpixel)
// and the same top-left fill rule, evaluated from scratch per pixel.
struct BruteCoverage {
  int width, height;
  std::vector<uint8_t> mask;
};

inline BruteCoverage brute_coverage(const std::vector<Eigen::Vector2d>& projected,
                                    const std::vector<std::array<int, 3>>& faces, int width,
                                    int height) {
  BruteCoverage out;
  out.width = width;
  out.height = height;
  out.mask.assign(size_t(width) * height, 0);
  auto snap = [](double v) { return (long long)std::llround(v * 256.0); };

  for (int py = 0; py < height; ++py) {
    for (int px = 0; px < width; ++px) {
      long long sx = (long long)px * 256 + 128;
      long long sy = (long long)py * 256 + 128;
      bool covered = false;
      for (const auto& f : faces) {
        long long x[3], y[3];
        for (int k = 0; k < 3; ++k) {
          x[k] = snap(projected[f[k]].x());
          y[k] = snap(projected[f[k]].y());
        }
        long long area2 =
            (x[1] - x[0]) * (y[2] - y[0]) - (y[1] - y[0]) * (x[2] - x[0]);
        if (area2 == 0) continue;
        int i0 = 0, i1 = 1, i2 = 2;
        if (area2 < 0) std::swap(i1, i2);
        bool inside = true;
        const int ea[3] = {i0, i1, i2};
        const int eb[3] = {i1, i2, i0};
        for (int k = 0; k < 3 && inside; ++k) {
          long long ax = x[ea[k]], ay = y[ea[k]], bx = x[eb[k]], by = y[eb[k]];
          long long e = (bx - ax) * (sy - ay) - (by - ay) * (sx - ax);
          bool top_left = (ay == by) ? (bx > ax) : (by < ay);
          if (e < 0 || (e == 0 && !top_left)) inside = false;
        }
        if (inside) {
          covered = true;
          break;
        }
      }
      out.mask[size_t(py) * width + px] = covered ? 1 : 0;
    }
  }
  return out;
}

}  // namespace oracle
}  // namespace fite
