#pragma once

#include <string>
#include <vector>

#include "fite/isosurface.hpp"
#include "fite/types.hpp"

namespace fite {

// Volumetric J-channel skinning weight field on a regular grid. Values are
// stored as 32-bit floats in [0,1]; node-wise channel sums are 1 after the
// solver's renormalization. Queries clamp to the boundary and renormalize.
struct SkinningField {
  GridDims dims;
  Aabb bbox;
  int joints = 0;
  std::vector<float> data;  // channel-major: [joint][z][y][x]

  long channel_stride() const { return dims.node_count(); }
  float& at(int channel, int i, int j, int k) {
    return data[channel * channel_stride() + dims.index(i, j, k)];
  }
  float at(int channel, int i, int j, int k) const {
    return data[channel * channel_stride() + dims.index(i, j, k)];
  }

  // Trilinear interpolation of all channels, renormalized to sum to 1.
  VecX query(const Vec3& p) const;

  // Raw trilinear interpolation without renormalization (single channel).
  double query_channel_raw(int channel, const Vec3& p) const;

  void save(const std::string& path) const;
  static SkinningField load(const std::string& path);
};

}  // namespace fite
