#include "fite/posemap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "fite/errors.hpp"
#include "fite/png_io.hpp"

namespace fite {

ViewConfig ViewConfig::make_default(const Aabb& bounds, int image_size, double tilt_radians) {
  ViewConfig cfg;
  cfg.tilt = tilt_radians;
  const double az[4] = {45, 135, 225, 315};
  Vec3 center = bounds.center();

  double needed = 0;
  std::vector<CameraView> views;
  for (int v = 0; v < 4; ++v) {
    double azimuth = az[v] * M_PI / 180.0;
    double pitch = (v % 2 == 0) ? tilt_radians : -tilt_radians;  // down, up, down, up
    Vec3 eye_dir(std::sin(azimuth) * std::cos(pitch), std::sin(pitch),
                 std::cos(azimuth) * std::cos(pitch));
    CameraView cam;
    cam.forward = -eye_dir;
    cam.right = cam.forward.cross(Vec3(0, 1, 0)).normalized();
    cam.up = cam.right.cross(cam.forward);
    cam.center = center;
    cam.height = cam.width = image_size;
    views.push_back(cam);

    for (int c = 0; c < 8; ++c) {
      Vec3 corner((c & 1) ? bounds.max.x() : bounds.min.x(),
                  (c & 2) ? bounds.max.y() : bounds.min.y(),
                  (c & 4) ? bounds.max.z() : bounds.min.z());
      Vec3 d = corner - center;
      needed = std::max(needed, std::abs(d.dot(cam.right)));
      needed = std::max(needed, std::abs(d.dot(cam.up)));
    }
  }
  double scale = 1.05 * needed / (image_size * 0.5);
  for (auto& cam : views) cam.scale = scale;
  cfg.views = std::move(views);
  return cfg;
}

std::vector<Vec3> pose_template(const TemplateMesh& tmpl, const Skeleton& skeleton,
                                const Pose& pose) {
  std::vector<RigidTransform> transforms = forward_kinematics(skeleton, pose);
  std::vector<Vec3> out(tmpl.mesh.vertices.size());
  for (size_t v = 0; v < out.size(); ++v)
    out[v] = lbs_warp(tmpl.mesh.vertices[v], row_span(tmpl.vertex_skinning, long(v)), transforms);
  return out;
}

namespace {

constexpr int kSubBits = 8;
constexpr int kSub = 1 << kSubBits;  // 1/256 pixel snapping

inline int64_t snap(double pixel_coord) {
  return int64_t(std::llround(pixel_coord * kSub));
}

inline int64_t edge_fn(int64_t ax, int64_t ay, int64_t bx, int64_t by, int64_t px, int64_t py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

inline bool is_top_left(int64_t ax, int64_t ay, int64_t bx, int64_t by) {
  if (ay == by) return bx > ax;  // top edge (interior below, y runs down)
  return by < ay;                // left edge (runs upward)
}

}  // namespace

PositionMap rasterize_position_map(const TriMesh& mesh, const std::vector<Vec3>& vertex_colors,
                                   const CameraView& view) {
  if (vertex_colors.size() != mesh.vertices.size())
    throw DimensionError("rasterize: color count != vertex count");
  PositionMap map;
  map.height = view.height;
  map.width = view.width;
  map.pixels.assign(long(map.height) * map.width * 3, 0.0);
  map.mask.assign(long(map.height) * map.width, 0);
  map.depth.assign(long(map.height) * map.width, std::numeric_limits<double>::infinity());

  std::vector<int64_t> sx(mesh.vertices.size()), sy(mesh.vertices.size());
  std::vector<double> dep(mesh.vertices.size());
  for (size_t v = 0; v < mesh.vertices.size(); ++v) {
    Eigen::Vector2d p = view.project(mesh.vertices[v]);
    sx[v] = snap(p.x());
    sy[v] = snap(p.y());
    dep[v] = view.depth(mesh.vertices[v]);
  }

  for (const auto& f : mesh.faces) {
    int i0 = f[0], i1 = f[1], i2 = f[2];
    int64_t area2 = edge_fn(sx[i0], sy[i0], sx[i1], sy[i1], sx[i2], sy[i2]);
    if (area2 == 0) continue;
    if (area2 < 0) {
      std::swap(i1, i2);
      area2 = -area2;
    }

    int64_t minx = std::min({sx[i0], sx[i1], sx[i2]});
    int64_t maxx = std::max({sx[i0], sx[i1], sx[i2]});
    int64_t miny = std::min({sy[i0], sy[i1], sy[i2]});
    int64_t maxy = std::max({sy[i0], sy[i1], sy[i2]});
    // pixel centers sit at ix*kSub + kSub/2
    int px0 = std::max(0, int((minx - kSub / 2 + kSub - 1) >> kSubBits));
    int px1 = std::min(view.width - 1, int((maxx - kSub / 2) >> kSubBits));
    int py0 = std::max(0, int((miny - kSub / 2 + kSub - 1) >> kSubBits));
    int py1 = std::min(view.height - 1, int((maxy - kSub / 2) >> kSubBits));
    if (px0 > px1 || py0 > py1) continue;

    // edge k is opposite vertex k: e0 = (v1->v2), e1 = (v2->v0), e2 = (v0->v1)
    const int ea[3] = {i1, i2, i0};
    const int eb[3] = {i2, i0, i1};
    int64_t bias[3], row_e[3], dx[3], dy[3];
    int64_t start_px = int64_t(px0) * kSub + kSub / 2;
    int64_t start_py = int64_t(py0) * kSub + kSub / 2;
    for (int k = 0; k < 3; ++k) {
      bias[k] = is_top_left(sx[ea[k]], sy[ea[k]], sx[eb[k]], sy[eb[k]]) ? 0 : -1;
      row_e[k] = edge_fn(sx[ea[k]], sy[ea[k]], sx[eb[k]], sy[eb[k]], start_px, start_py);
      dx[k] = -(sy[eb[k]] - sy[ea[k]]) * kSub;
      dy[k] = (sx[eb[k]] - sx[ea[k]]) * kSub;
    }

    double inv_area = 1.0 / double(area2);
    for (int py = py0; py <= py1; ++py) {
      int64_t e[3] = {row_e[0], row_e[1], row_e[2]};
      for (int px = px0; px <= px1; ++px) {
        if (e[0] + bias[0] >= 0 && e[1] + bias[1] >= 0 && e[2] + bias[2] >= 0) {
          double w0 = double(e[0]) * inv_area;
          double w1 = double(e[1]) * inv_area;
          double w2 = double(e[2]) * inv_area;
          double z = w0 * dep[i0] + w1 * dep[i1] + w2 * dep[i2];
          long idx = long(py) * view.width + px;
          if (z < map.depth[idx]) {
            map.depth[idx] = z;
            map.mask[idx] = 1;
            Vec3 color = w0 * vertex_colors[i0] + w1 * vertex_colors[i1] + w2 * vertex_colors[i2];
            map.pixels[idx * 3 + 0] = color.x();
            map.pixels[idx * 3 + 1] = color.y();
            map.pixels[idx * 3 + 2] = color.z();
          }
        }
        e[0] += dx[0];
        e[1] += dx[1];
        e[2] += dx[2];
      }
      row_e[0] += dy[0];
      row_e[1] += dy[1];
      row_e[2] += dy[2];
    }
  }
  return map;
}

VecX project_and_sample(const Vec3& p, const CameraView& view, const FeatureImage& image,
                        bool* valid) {
  VecX out = VecX::Zero(image.channels);
  Eigen::Vector2d px = view.project(p);
  double fx = px.x() - 0.5;
  double fy = px.y() - 0.5;
  int ix = int(std::floor(fx));
  int iy = int(std::floor(fy));
  double ax = fx - ix;
  double ay = fy - iy;
  if (ix < 0 || iy < 0 || ix + 1 >= image.width || iy + 1 >= image.height) {
    if (valid) *valid = false;
    return out;
  }
  if (!image.valid(iy, ix) || !image.valid(iy, ix + 1) || !image.valid(iy + 1, ix) ||
      !image.valid(iy + 1, ix + 1)) {
    if (valid) *valid = false;
    return out;
  }
  double w00 = (1 - ax) * (1 - ay), w10 = ax * (1 - ay), w01 = (1 - ax) * ay, w11 = ax * ay;
  for (int c = 0; c < image.channels; ++c)
    out[c] = w00 * image.at(c, iy, ix) + w10 * image.at(c, iy, ix + 1) +
             w01 * image.at(c, iy + 1, ix) + w11 * image.at(c, iy + 1, ix + 1);
  if (valid) *valid = true;
  return out;
}

VecX sample_pose_feature(const Vec3& p, const ViewConfig& views,
                         const std::vector<FeatureImage>& encoded_views,
                         std::vector<uint8_t>* view_valid) {
  if (encoded_views.size() != views.views.size())
    throw DimensionError("sample_pose_feature: view count mismatch");
  int c = encoded_views.empty() ? 0 : encoded_views[0].channels;
  for (const auto& img : encoded_views)
    if (img.channels != c) throw DimensionError("sample_pose_feature: channel mismatch");
  VecX out = VecX::Zero(long(c) * encoded_views.size());
  if (view_valid) view_valid->assign(encoded_views.size(), 0);
  for (size_t v = 0; v < encoded_views.size(); ++v) {
    bool ok = false;
    VecX z = project_and_sample(p, views.views[v], encoded_views[v], &ok);
    if (ok) out.segment(long(v) * c, c) = z;
    if (view_valid) (*view_valid)[v] = ok ? 1 : 0;
  }
  return out;
}

void save_position_map(const std::string& path, const PositionMap& map) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write position map: " + path);
  int32_t header[3] = {map.height, map.width, 3};
  f.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (double v : map.pixels) {
    float x = float(v);
    f.write(reinterpret_cast<const char*>(&x), 4);
  }
  if (!f) throw IoError("position map: write failed");
}

void save_position_map_png(const std::string& path, const PositionMap& map) {
  double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  for (long i = 0; i < long(map.mask.size()); ++i) {
    if (!map.mask[i]) continue;
    for (int c = 0; c < 3; ++c) {
      lo = std::min(lo, map.pixels[i * 3 + c]);
      hi = std::max(hi, map.pixels[i * 3 + c]);
    }
  }
  if (hi <= lo) {
    lo = 0;
    hi = 1;
  }
  std::vector<uint8_t> rgb(map.pixels.size(), 0);
  for (long i = 0; i < long(map.mask.size()); ++i) {
    if (!map.mask[i]) continue;
    for (int c = 0; c < 3; ++c)
      rgb[i * 3 + c] =
          uint8_t(std::clamp(255.0 * (map.pixels[i * 3 + c] - lo) / (hi - lo), 0.0, 255.0));
  }
  write_png_rgb(path, map.width, map.height, rgb.data());
}

}  // namespace fite
