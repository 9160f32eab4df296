#include "fite/neighbors.hpp"

#include <algorithm>
#include <cmath>

#include "fite/errors.hpp"

namespace fite {

GridNN::GridNN(const std::vector<Vec3>& points) : points_(points) {
  if (points_.empty()) throw InvalidInputError("GridNN: empty point set");
  for (const Vec3& p : points_) bbox_.expand(p);
  bbox_ = bbox_.padded(1e-9 + 1e-9 * bbox_.diagonal());

  // aim for a few points per cell
  double volume = std::max(bbox_.extent().prod(), 1e-30);
  cell_ = std::cbrt(volume / double(points_.size())) * 1.5;
  cell_ = std::max(cell_, 1e-12);
  cx_ = std::max(1, std::min(256, int(bbox_.extent().x() / cell_) + 1));
  cy_ = std::max(1, std::min(256, int(bbox_.extent().y() / cell_) + 1));
  cz_ = std::max(1, std::min(256, int(bbox_.extent().z() / cell_) + 1));
  // recompute the cell edge so the grid covers the bbox exactly
  cell_ = std::max({bbox_.extent().x() / cx_, bbox_.extent().y() / cy_,
                    bbox_.extent().z() / cz_, 1e-12});

  long ncells = long(cx_) * cy_ * cz_;
  std::vector<int> counts(ncells, 0);
  auto cell_of = [&](const Vec3& p) {
    int ix = std::clamp(int((p.x() - bbox_.min.x()) / cell_), 0, cx_ - 1);
    int iy = std::clamp(int((p.y() - bbox_.min.y()) / cell_), 0, cy_ - 1);
    int iz = std::clamp(int((p.z() - bbox_.min.z()) / cell_), 0, cz_ - 1);
    return ix + long(cx_) * (iy + long(cy_) * iz);
  };
  for (const Vec3& p : points_) counts[cell_of(p)]++;
  cell_start_.assign(ncells + 1, 0);
  for (long c = 0; c < ncells; ++c) cell_start_[c + 1] = cell_start_[c] + counts[c];
  cell_points_.resize(points_.size());
  std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (size_t i = 0; i < points_.size(); ++i) cell_points_[cursor[cell_of(points_[i])]++] = int(i);
  // ascending index order within cells keeps tie-breaking deterministic
  for (long c = 0; c < ncells; ++c)
    std::sort(cell_points_.begin() + cell_start_[c], cell_points_.begin() + cell_start_[c + 1]);
}

GridNN::Result GridNN::nearest(const Vec3& q) const {
  int qx = std::clamp(int(std::floor((q.x() - bbox_.min.x()) / cell_)), 0, cx_ - 1);
  int qy = std::clamp(int(std::floor((q.y() - bbox_.min.y()) / cell_)), 0, cy_ - 1);
  int qz = std::clamp(int(std::floor((q.z() - bbox_.min.z()) / cell_)), 0, cz_ - 1);

  Result best;
  best.dist2 = std::numeric_limits<double>::max();
  int max_shell = std::max({cx_, cy_, cz_});

  // distance from q to the inner boundary of chebyshev shell s (cells only)
  auto shell_lower_bound = [&](int s) -> double {
    if (s == 0) return 0;
    double lb = std::numeric_limits<double>::max();
    double dx0 = q.x() - (bbox_.min.x() + qx * cell_);
    double dy0 = q.y() - (bbox_.min.y() + qy * cell_);
    double dz0 = q.z() - (bbox_.min.z() + qz * cell_);
    // nearest face of the shell along each axis; conservative single-axis bound
    double bx = std::min((s - 1) * cell_ + (cell_ - dx0), (s - 1) * cell_ + dx0);
    double by = std::min((s - 1) * cell_ + (cell_ - dy0), (s - 1) * cell_ + dy0);
    double bz = std::min((s - 1) * cell_ + (cell_ - dz0), (s - 1) * cell_ + dz0);
    lb = std::min({bx, by, bz});
    return std::max(lb, 0.0);
  };

  for (int s = 0; s <= max_shell; ++s) {
    if (best.index >= 0) {
      double lb = shell_lower_bound(s);
      if (lb * lb > best.dist2) break;
    }
    int x0 = qx - s, x1 = qx + s;
    int y0 = qy - s, y1 = qy + s;
    int z0 = qz - s, z1 = qz + s;
    for (int iz = std::max(0, z0); iz <= std::min(cz_ - 1, z1); ++iz) {
      for (int iy = std::max(0, y0); iy <= std::min(cy_ - 1, y1); ++iy) {
        for (int ix = std::max(0, x0); ix <= std::min(cx_ - 1, x1); ++ix) {
          // only the shell surface (skip interior already scanned)
          if (s > 0 && ix != x0 && ix != x1 && iy != y0 && iy != y1 && iz != z0 && iz != z1)
            continue;
          long c = ix + long(cx_) * (iy + long(cy_) * iz);
          for (int k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
            int i = cell_points_[k];
            double d2 = (points_[i] - q).squaredNorm();
            if (d2 < best.dist2 || (d2 == best.dist2 && i < best.index)) {
              best.dist2 = d2;
              best.index = i;
            }
          }
        }
      }
    }
  }
  return best;
}

}  // namespace fite
