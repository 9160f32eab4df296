#pragma once

#include <array>
#include <vector>

#include "fite/kinematics.hpp"
#include "fite/mesh.hpp"
#include "fite/occupancy.hpp"
#include "fite/types.hpp"

namespace fite {

// Orthographic camera. Continuous pixel coordinates put the center of pixel
// (ix, iy) at (ix + 0.5, iy + 0.5), with y running down the image.
struct CameraView {
  Vec3 right, up, forward;  // orthonormal basis, forward points at the scene
  Vec3 center;              // world point mapped to the image center
  double scale = 1;         // world units per pixel
  int height = 128, width = 128;

  Eigen::Vector2d project(const Vec3& p) const {
    Vec3 d = p - center;
    return {d.dot(right) / scale + width * 0.5, height * 0.5 - d.dot(up) / scale};
  }
  double depth(const Vec3& p) const { return (p - center).dot(forward); }
};

struct ViewConfig {
  std::vector<CameraView> views;  // fixed order: azimuth 45, 135, 225, 315 deg
  double tilt = 15.0 * M_PI / 180.0;

  // Four orthographic views around the template, pitched alternately down and
  // up (45/225 look down, 135/315 look up), sharing one scale that fits the
  // bounds with 5% margin.
  static ViewConfig make_default(const Aabb& template_bounds, int image_size,
                                 double tilt_radians = 15.0 * M_PI / 180.0);
};

struct PositionMap {
  int height = 0, width = 0;
  std::vector<double> pixels;  // H*W*3, row-major HWC; background fill 0
  std::vector<uint8_t> mask;   // H*W
  std::vector<double> depth;   // H*W; +inf where mask is clear

  Vec3 pixel(int y, int x) const {
    long i = (long(y) * width + x) * 3;
    return Vec3(pixels[i], pixels[i + 1], pixels[i + 2]);
  }
};

// Per-vertex LBS warp of the template by its stored skinning weights.
std::vector<Vec3> pose_template(const TemplateMesh& tmpl, const Skeleton& skeleton,
                                const Pose& pose);

// Z-buffered triangle rasterization in the canonical-space orthographic
// camera: integer edge functions on 1/256-subpixel snapped vertices with the
// top-left fill rule; affine barycentric interpolation of vertex colors and
// depth; nearest fragment wins.
PositionMap rasterize_position_map(const TriMesh& canonical_mesh,
                                   const std::vector<Vec3>& vertex_colors,
                                   const CameraView& view);

// CHW feature image with a validity mask (empty mask = all pixels valid).
struct FeatureImage {
  int height = 0, width = 0, channels = 0;
  std::vector<double> data;   // [C][H][W]
  std::vector<uint8_t> mask;  // [H][W], optional

  double at(int c, int y, int x) const { return data[(long(c) * height + y) * width + x]; }
  bool valid(int y, int x) const { return mask.empty() || mask[long(y) * width + x] != 0; }
};

// Orthographic projection of p followed by bilinear interpolation over the 4
// neighboring pixel centers. Valid only when all 4 neighbors are in bounds and
// masked valid; invalid returns zeros.
VecX project_and_sample(const Vec3& p, const CameraView& view, const FeatureImage& image,
                        bool* valid);

// Concatenation of the sampled features over all views in fixed view order;
// invalid views contribute zero blocks.
VecX sample_pose_feature(const Vec3& p, const ViewConfig& views,
                         const std::vector<FeatureImage>& encoded_views,
                         std::vector<uint8_t>* view_valid = nullptr);

// Binary dump: int32 (H, W, C) header then float32 HWC data, little-endian.
void save_position_map(const std::string& path, const PositionMap& map);
// Min-max normalized RGB visualization.
void save_position_map_png(const std::string& path, const PositionMap& map);

}  // namespace fite
