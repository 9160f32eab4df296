#include "fite/skinning_field.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fite/errors.hpp"

namespace fite {

namespace {

constexpr char kMagic[8] = {'F', 'I', 'T', 'E', 'S', 'K', 'F', '1'};

struct TrilinearStencil {
  int i0, j0, k0;
  double fx, fy, fz;
};

TrilinearStencil locate(const GridDims& dims, const Aabb& bbox, const Vec3& p) {
  Vec3 h = grid_spacing(dims, bbox);
  TrilinearStencil s;
  auto axis = [&](double v, double lo, double hv, int n, int& idx, double& frac) {
    double x = (v - lo) / hv;
    x = std::clamp(x, 0.0, double(n - 1));
    idx = std::min(int(x), n - 2);
    frac = x - idx;
  };
  axis(p.x(), bbox.min.x(), h.x(), dims.nx, s.i0, s.fx);
  axis(p.y(), bbox.min.y(), h.y(), dims.ny, s.j0, s.fy);
  axis(p.z(), bbox.min.z(), h.z(), dims.nz, s.k0, s.fz);
  return s;
}

}  // namespace

double SkinningField::query_channel_raw(int channel, const Vec3& p) const {
  TrilinearStencil s = locate(dims, bbox, p);
  const float* base = data.data() + channel * channel_stride();
  double acc = 0;
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) {
        double w = (di ? s.fx : 1 - s.fx) * (dj ? s.fy : 1 - s.fy) * (dk ? s.fz : 1 - s.fz);
        acc += w * base[dims.index(s.i0 + di, s.j0 + dj, s.k0 + dk)];
      }
  return acc;
}

VecX SkinningField::query(const Vec3& p) const {
  TrilinearStencil s = locate(dims, bbox, p);
  double cw[8];
  long idx[8];
  int t = 0;
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di, ++t) {
        cw[t] = (di ? s.fx : 1 - s.fx) * (dj ? s.fy : 1 - s.fy) * (dk ? s.fz : 1 - s.fz);
        idx[t] = dims.index(s.i0 + di, s.j0 + dj, s.k0 + dk);
      }
  VecX w(joints);
  for (int c = 0; c < joints; ++c) {
    const float* base = data.data() + c * channel_stride();
    double acc = 0;
    for (int u = 0; u < 8; ++u) acc += cw[u] * base[idx[u]];
    w[c] = std::clamp(acc, 0.0, 1.0);
  }
  double sum = w.sum();
  if (sum <= 1e-12)
    w.setConstant(1.0 / joints);
  else
    w /= sum;
  return w;
}

void SkinningField::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write skinning field: " + path);
  f.write(kMagic, 8);
  int32_t header[4] = {int32_t(dims.nx), int32_t(dims.ny), int32_t(dims.nz), int32_t(joints)};
  f.write(reinterpret_cast<const char*>(header), sizeof(header));
  double box[6] = {bbox.min.x(), bbox.min.y(), bbox.min.z(),
                   bbox.max.x(), bbox.max.y(), bbox.max.z()};
  f.write(reinterpret_cast<const char*>(box), sizeof(box));
  f.write(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(float));
  if (!f) throw IoError("skinning field: write failed: " + path);
}

SkinningField SkinningField::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read skinning field: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("skinning field: bad magic in " + path);
  int32_t header[4];
  f.read(reinterpret_cast<char*>(header), sizeof(header));
  double box[6];
  f.read(reinterpret_cast<char*>(box), sizeof(box));
  if (!f) throw IoError("skinning field: truncated header in " + path);
  SkinningField field;
  field.dims = {header[0], header[1], header[2]};
  field.joints = header[3];
  field.bbox.min = Vec3(box[0], box[1], box[2]);
  field.bbox.max = Vec3(box[3], box[4], box[5]);
  field.data.resize(field.channel_stride() * field.joints);
  f.read(reinterpret_cast<char*>(field.data.data()), field.data.size() * sizeof(float));
  if (!f) throw IoError("skinning field: truncated data in " + path);
  return field;
}

}  // namespace fite
