#pragma once

#include <vector>

#include "fite/types.hpp"

namespace fite {

// Exact nearest neighbor over a fixed point set, uniform-grid accelerated.
// Ties resolve to the lowest point index. Queries are pure.
class GridNN {
 public:
  explicit GridNN(const std::vector<Vec3>& points);

  struct Result {
    int index = -1;
    double dist2 = 0;
  };
  Result nearest(const Vec3& q) const;

  size_t size() const { return points_.size(); }

 private:
  std::vector<Vec3> points_;
  Aabb bbox_;
  double cell_ = 1;
  int cx_ = 1, cy_ = 1, cz_ = 1;
  std::vector<int> cell_start_;
  std::vector<int> cell_points_;
};

}  // namespace fite
