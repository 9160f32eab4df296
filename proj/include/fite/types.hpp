#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace fite {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
// Row-major: rows are contiguous and can be viewed as spans.
using MatXR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const MatXR& m, long i) {
  return {m.data() + i * m.cols(), size_t(m.cols())};
}

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 max = Vec3::Constant(std::numeric_limits<double>::lowest());

  void expand(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void expand(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return extent().norm(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Aabb padded(double margin) const {
    Aabb b;
    b.min = min - Vec3::Constant(margin);
    b.max = max + Vec3::Constant(margin);
    return b;
  }
  bool empty() const { return (max.array() < min.array()).any(); }
};

// SplitMix64-based generator. Self-contained so that seeded outputs are
// byte-stable across standard library versions.
struct Rng {
  uint64_t state;

  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next() {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }

  double gaussian() {
    // Box-Muller; one value per call, no cached state.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vec3 gaussian3(double sigma) {
    return Vec3(sigma * gaussian(), sigma * gaussian(), sigma * gaussian());
  }
};

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  // boost-style mix, widened to 64 bits
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 12) + (a >> 4);
  return a;
}

// FNV-1a over raw bytes; used for config hashes and parameter fingerprints.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace fite
