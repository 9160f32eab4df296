#include "fite/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fite/errors.hpp"
#include "fite/neighbors.hpp"
#include "fite/parallel.hpp"

namespace fite {

void DiffusionWeights::validate() const {
  if (!(lambda_point > 0)) throw ConfigError("diffusion: lambda_point must be positive");
  if (lambda_grad < 0 || lambda_reg < 0 || lambda_anchor < 0)
    throw ConfigError("diffusion: lambdas must be nonnegative");
}

// ---- surface gradients ----

std::vector<SurfaceWeightGradient> surface_gradients(const SkinnedBody& body) {
  const TriMesh& mesh = body.mesh;
  const int J = body.skeleton.joint_count;
  const size_t V = mesh.vertices.size();
  std::vector<Vec3> vnormals = mesh.vertex_normals();

  std::vector<SurfaceWeightGradient> out(J);
  for (int c = 0; c < J; ++c) out[c].vertex_gradients.assign(V, Vec3::Zero());
  std::vector<double> area_sum(V, 0.0);

  long skipped = 0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    Vec3 n = (b - a).cross(c - a);
    double area2 = n.norm();
    if (area2 < 1e-16) {
      ++skipped;
      continue;
    }
    Vec3 nh = n / area2;
    double area = 0.5 * area2;
    Vec3 ga = nh.cross(a - c);  // multiplies (f_b - f_a)
    Vec3 gb = nh.cross(b - a);  // multiplies (f_c - f_a)
    for (int ch = 0; ch < J; ++ch) {
      double fa = body.vertex_weights(t[0], ch);
      double fb = body.vertex_weights(t[1], ch);
      double fc = body.vertex_weights(t[2], ch);
      Vec3 grad = ((fb - fa) * ga + (fc - fa) * gb) / (2.0 * area);
      for (int k = 0; k < 3; ++k) out[ch].vertex_gradients[t[k]] += area * grad;
    }
    for (int k = 0; k < 3; ++k) area_sum[t[k]] += area;
  }
  if (skipped > 0)
    std::fprintf(stderr, "surface_gradient: skipped %ld zero-area faces\n", skipped);

  for (size_t v = 0; v < V; ++v) {
    if (area_sum[v] <= 0) continue;
    for (int ch = 0; ch < J; ++ch) {
      Vec3 g = out[ch].vertex_gradients[v] / area_sum[v];
      g -= g.dot(vnormals[v]) * vnormals[v];  // re-project to the tangent plane
      out[ch].vertex_gradients[v] = g;
    }
  }
  return out;
}

SurfaceWeightGradient surface_gradient(const SkinnedBody& body, int channel) {
  if (channel < 0 || channel >= body.skeleton.joint_count)
    throw DimensionError("surface_gradient: channel out of range");
  return surface_gradients(body)[channel];
}

Aabb skinning_field_bbox(const Aabb& body_bounds) {
  double side = 1.4 * body_bounds.extent().maxCoeff();
  Vec3 c = body_bounds.center();
  Aabb box;
  box.min = c - Vec3::Constant(side / 2);
  box.max = c + Vec3::Constant(side / 2);
  return box;
}

// ---- grid level machinery ----

namespace {

struct Stencil8 {
  long nodes[8];
  double coefs[8];
};

Stencil8 trilinear_stencil(const GridDims& dims, const Aabb& bbox, const Vec3& spacing,
                           const Vec3& p) {
  auto axis = [](double v, double lo, double h, int n) {
    double x = (v - lo) / h;
    x = std::clamp(x, 0.0, double(n - 1));
    int idx = std::min(int(x), n - 2);
    return std::pair<int, double>(idx, x - idx);
  };
  auto [i0, fx] = axis(p.x(), bbox.min.x(), spacing.x(), dims.nx);
  auto [j0, fy] = axis(p.y(), bbox.min.y(), spacing.y(), dims.ny);
  auto [k0, fz] = axis(p.z(), bbox.min.z(), spacing.z(), dims.nz);
  Stencil8 s;
  int t = 0;
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di, ++t) {
        s.nodes[t] = dims.index(i0 + di, j0 + dj, k0 + dk);
        s.coefs[t] = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
      }
  return s;
}

// One resolution level: data/gradient stencils over the shared samples plus
// the implicit squared-laplacian term.
struct GridLevel {
  GridDims dims;
  Vec3 spacing;
  std::vector<long> data_nodes;
  std::vector<double> data_coefs;
  std::vector<long> grad_nodes;
  std::vector<double> grad_coefs;

  GridLevel(const std::vector<Vec3>& samples, const GridDims& d, const Aabb& bbox) : dims(d) {
    spacing = grid_spacing(dims, bbox);
    const long S = long(samples.size());
    data_nodes.resize(S * 8);
    data_coefs.resize(S * 8);
    grad_nodes.resize(S * 48);
    grad_coefs.resize(S * 48);
    parallel_chunks(S, [&](int64_t b, int64_t e) {
      for (int64_t s = b; s < e; ++s) {
        Stencil8 st = trilinear_stencil(dims, bbox, spacing, samples[s]);
        for (int t = 0; t < 8; ++t) {
          data_nodes[s * 8 + t] = st.nodes[t];
          data_coefs[s * 8 + t] = st.coefs[t];
        }
        for (int a = 0; a < 3; ++a) {
          Vec3 dp = Vec3::Zero();
          dp[a] = spacing[a];
          double inv2h = 1.0 / (2.0 * spacing[a]);
          Stencil8 sp = trilinear_stencil(dims, bbox, spacing, samples[s] + dp);
          Stencil8 sm = trilinear_stencil(dims, bbox, spacing, samples[s] - dp);
          long base = s * 48 + a * 16;
          for (int t = 0; t < 8; ++t) {
            grad_nodes[base + t] = sp.nodes[t];
            grad_coefs[base + t] = sp.coefs[t] * inv2h;
            grad_nodes[base + 8 + t] = sm.nodes[t];
            grad_coefs[base + 8 + t] = -sm.coefs[t] * inv2h;
          }
        }
      }
    });
  }

  long sample_count() const { return long(data_nodes.size() / 8); }

  void apply_normal(const DiffusionWeights& lambda, const VecX& x, VecX& y) const {
    y.setZero();
    const long S = sample_count();
    for (long s = 0; s < S; ++s) {
      const long* n = &data_nodes[s * 8];
      const double* c = &data_coefs[s * 8];
      double r = 0;
      for (int t = 0; t < 8; ++t) r += c[t] * x[n[t]];
      r *= lambda.lambda_point;
      for (int t = 0; t < 8; ++t) y[n[t]] += c[t] * r;
    }
    if (lambda.lambda_grad > 0) {
      for (long row = 0; row < S * 3; ++row) {
        const long* n = &grad_nodes[row * 16];
        const double* c = &grad_coefs[row * 16];
        double r = 0;
        for (int t = 0; t < 16; ++t) r += c[t] * x[n[t]];
        r *= lambda.lambda_grad;
        for (int t = 0; t < 16; ++t) y[n[t]] += c[t] * r;
      }
    }
    if (lambda.lambda_reg > 0) {
      double wx = 1.0 / (spacing.x() * spacing.x());
      double wy = 1.0 / (spacing.y() * spacing.y());
      double wz = 1.0 / (spacing.z() * spacing.z());
      double wc = -2.0 * (wx + wy + wz);
      const long sx = 1, sy = dims.nx, sz = long(dims.nx) * dims.ny;
      for (int k = 1; k + 1 < dims.nz; ++k) {
        for (int j = 1; j + 1 < dims.ny; ++j) {
          long base = dims.index(1, j, k);
          for (int i = 1; i + 1 < dims.nx; ++i, ++base) {
            double lap = wc * x[base] + wx * (x[base - sx] + x[base + sx]) +
                         wy * (x[base - sy] + x[base + sy]) +
                         wz * (x[base - sz] + x[base + sz]);
            lap *= lambda.lambda_reg;
            y[base] += wc * lap;
            y[base - sx] += wx * lap;
            y[base + sx] += wx * lap;
            y[base - sy] += wy * lap;
            y[base + sy] += wy * lap;
            y[base - sz] += wz * lap;
            y[base + sz] += wz * lap;
          }
        }
      }
    }
  }

  VecX rhs_for_channel(const DiffusionWeights& lambda, const MatXR& sample_weights,
                       const std::vector<MatXR>& sample_gradients, int channel) const {
    VecX rhs = VecX::Zero(dims.node_count());
    const long S = sample_count();
    for (long s = 0; s < S; ++s) {
      double t = lambda.lambda_point * sample_weights(s, channel);
      const long* n = &data_nodes[s * 8];
      const double* c = &data_coefs[s * 8];
      for (int u = 0; u < 8; ++u) rhs[n[u]] += c[u] * t;
    }
    if (lambda.lambda_grad > 0) {
      for (long s = 0; s < S; ++s) {
        for (int a = 0; a < 3; ++a) {
          double t = lambda.lambda_grad * sample_gradients[channel](s, a);
          const long* n = &grad_nodes[(s * 3 + a) * 16];
          const double* c = &grad_coefs[(s * 3 + a) * 16];
          for (int u = 0; u < 16; ++u) rhs[n[u]] += c[u] * t;
        }
      }
    }
    return rhs;
  }

  VecX jacobi_diagonal(const DiffusionWeights& lambda) const {
    VecX diag = VecX::Constant(dims.node_count(), 1e-30);
    const long S = sample_count();
    for (long s = 0; s < S; ++s)
      for (int t = 0; t < 8; ++t)
        diag[data_nodes[s * 8 + t]] +=
            lambda.lambda_point * data_coefs[s * 8 + t] * data_coefs[s * 8 + t];
    if (lambda.lambda_grad > 0)
      for (long row = 0; row < S * 3; ++row)
        for (int t = 0; t < 16; ++t)
          diag[grad_nodes[row * 16 + t]] +=
              lambda.lambda_grad * grad_coefs[row * 16 + t] * grad_coefs[row * 16 + t];
    if (lambda.lambda_reg > 0) {
      double wx = 1.0 / (spacing.x() * spacing.x());
      double wy = 1.0 / (spacing.y() * spacing.y());
      double wz = 1.0 / (spacing.z() * spacing.z());
      double wc = -2.0 * (wx + wy + wz);
      const long sx = 1, sy = dims.nx, sz = long(dims.nx) * dims.ny;
      for (int k = 1; k + 1 < dims.nz; ++k)
        for (int j = 1; j + 1 < dims.ny; ++j) {
          long base = dims.index(1, j, k);
          for (int i = 1; i + 1 < dims.nx; ++i, ++base) {
            diag[base] += lambda.lambda_reg * wc * wc;
            diag[base - sx] += lambda.lambda_reg * wx * wx;
            diag[base + sx] += lambda.lambda_reg * wx * wx;
            diag[base - sy] += lambda.lambda_reg * wy * wy;
            diag[base + sy] += lambda.lambda_reg * wy * wy;
            diag[base - sz] += lambda.lambda_reg * wz * wz;
            diag[base + sz] += lambda.lambda_reg * wz * wz;
          }
        }
    }
    return diag;
  }

  double channel_energy(const DiffusionWeights& lambda, const MatXR& sample_weights,
                        const std::vector<MatXR>& sample_gradients, const VecX& x,
                        int channel) const {
    const long S = sample_count();
    double e_data = 0, e_grad = 0, e_lap = 0;
    for (long s = 0; s < S; ++s) {
      const long* n = &data_nodes[s * 8];
      const double* c = &data_coefs[s * 8];
      double v = 0;
      for (int t = 0; t < 8; ++t) v += c[t] * x[n[t]];
      double r = v - sample_weights(s, channel);
      e_data += r * r;
    }
    for (long s = 0; s < S; ++s)
      for (int a = 0; a < 3; ++a) {
        const long* n = &grad_nodes[(s * 3 + a) * 16];
        const double* c = &grad_coefs[(s * 3 + a) * 16];
        double v = 0;
        for (int t = 0; t < 16; ++t) v += c[t] * x[n[t]];
        double r = v - sample_gradients[channel](s, a);
        e_grad += r * r;
      }
    double wx = 1.0 / (spacing.x() * spacing.x());
    double wy = 1.0 / (spacing.y() * spacing.y());
    double wz = 1.0 / (spacing.z() * spacing.z());
    double wc = -2.0 * (wx + wy + wz);
    const long sx = 1, sy = dims.nx, sz = long(dims.nx) * dims.ny;
    for (int k = 1; k + 1 < dims.nz; ++k)
      for (int j = 1; j + 1 < dims.ny; ++j) {
        long base = dims.index(1, j, k);
        for (int i = 1; i + 1 < dims.nx; ++i, ++base) {
          double lap = wc * x[base] + wx * (x[base - sx] + x[base + sx]) +
                       wy * (x[base - sy] + x[base + sy]) + wz * (x[base - sz] + x[base + sz]);
          e_lap += lap * lap;
        }
      }
    return lambda.lambda_point * e_data + lambda.lambda_grad * e_grad + lambda.lambda_reg * e_lap;
  }
};

// trilinear interpolation of a coarse grid at the nodes of a finer one
VecX prolong(const VecX& coarse, const GridDims& cd, const GridDims& fd, const Aabb& bbox) {
  VecX fine(fd.node_count());
  Vec3 cs = grid_spacing(cd, bbox);
  for (int k = 0; k < fd.nz; ++k)
    for (int j = 0; j < fd.ny; ++j)
      for (int i = 0; i < fd.nx; ++i) {
        Stencil8 st = trilinear_stencil(cd, bbox, cs, grid_node_position(fd, bbox, i, j, k));
        double v = 0;
        for (int t = 0; t < 8; ++t) v += st.coefs[t] * coarse[st.nodes[t]];
        fine[fd.index(i, j, k)] = v;
      }
  return fine;
}

struct CgOutcome {
  long iterations = 0;
  double rel_residual = 0;
  bool breakdown = false;
};

// Jacobi-preconditioned CG on the normal equations. Stops at the tolerance or
// the iteration cap; flags numerical breakdown.
CgOutcome pcg(const GridLevel& level, const DiffusionWeights& lambda, double anchor_eps,
              const VecX& rhs, const VecX& diag, VecX& x, double tol, long max_iters) {
  const long N = rhs.size();
  VecX r(N), z(N), p(N), ap(N);
  level.apply_normal(lambda, x, ap);
  if (anchor_eps > 0) ap += anchor_eps * x;
  r = rhs - ap;
  double rhs_norm = rhs.norm();
  if (rhs_norm < 1e-30) rhs_norm = 1;
  z = r.cwiseQuotient(diag);
  p = z;
  double rz = r.dot(z);
  CgOutcome out;
  out.rel_residual = r.norm() / rhs_norm;
  while (out.rel_residual > tol && out.iterations < max_iters) {
    level.apply_normal(lambda, p, ap);
    if (anchor_eps > 0) ap += anchor_eps * p;
    double pap = p.dot(ap);
    if (!(pap > 0) || !std::isfinite(pap)) {
      out.breakdown = out.rel_residual > 1e-3;
      break;
    }
    double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    z = r.cwiseQuotient(diag);
    double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
    out.rel_residual = r.norm() / rhs_norm;
    if (!std::isfinite(out.rel_residual)) {
      out.breakdown = true;
      break;
    }
    ++out.iterations;
  }
  return out;
}

}  // namespace

// ---- solver ----

DiffusionSolver::DiffusionSolver(const SkinnedBody& body, const DiffusionWeights& weights,
                                 GridDims dims, const Aabb& bbox, long surface_samples,
                                 uint64_t seed)
    : dims_(dims), bbox_(bbox), joints_(body.skeleton.joint_count), lambda_(weights) {
  lambda_.validate();
  if (dims_.nx < 4 || dims_.ny < 4 || dims_.nz < 4)
    throw ConfigError("diffusion: grid too small");
  if (surface_samples < 1) throw ConfigError("diffusion: need surface samples");
  Aabb mesh_box = body.mesh.bounds();
  if (mesh_box.min.x() > bbox.max.x() || mesh_box.max.x() < bbox.min.x() ||
      mesh_box.min.y() > bbox.max.y() || mesh_box.max.y() < bbox.min.y() ||
      mesh_box.min.z() > bbox.max.z() || mesh_box.max.z() < bbox.min.z())
    throw InvalidInputError("diffusion: bbox does not intersect the mesh");
  spacing_ = grid_spacing(dims_, bbox_);

  // area-weighted samples with face + barycentric bookkeeping for targets
  const TriMesh& mesh = body.mesh;
  std::vector<double> cdf(mesh.faces.size());
  double acc = 0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    acc += mesh.face_area(int(f));
    cdf[f] = acc;
  }
  std::vector<SurfaceWeightGradient> grads = surface_gradients(body);

  Rng rng(seed);
  sample_points_.resize(surface_samples);
  sample_weights_.resize(surface_samples, joints_);
  sample_gradients_.assign(joints_, MatXR(surface_samples, 3));
  for (long s = 0; s < surface_samples; ++s) {
    double u = rng.uniform() * acc;
    size_t f = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    if (f >= mesh.faces.size()) f = mesh.faces.size() - 1;
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    double ba = 1 - r1, bb = r1 * (1 - r2), bc = r1 * r2;
    const auto& t = mesh.faces[f];
    sample_points_[s] =
        ba * mesh.vertices[t[0]] + bb * mesh.vertices[t[1]] + bc * mesh.vertices[t[2]];
    for (int ch = 0; ch < joints_; ++ch) {
      sample_weights_(s, ch) = ba * body.vertex_weights(t[0], ch) +
                               bb * body.vertex_weights(t[1], ch) +
                               bc * body.vertex_weights(t[2], ch);
      Vec3 g = ba * grads[ch].vertex_gradients[t[0]] + bb * grads[ch].vertex_gradients[t[1]] +
               bc * grads[ch].vertex_gradients[t[2]];
      sample_gradients_[ch].row(s) = g.transpose();
    }
  }
}

std::vector<VecX> DiffusionSolver::baseline_grids() const {
  GridNN nn(sample_points_);
  const long N = dims_.node_count();
  std::vector<VecX> grids(joints_, VecX(N));
  std::vector<int> nearest(N);
  parallel_chunks(dims_.nz, [&](int64_t kb, int64_t ke) {
    for (int64_t k = kb; k < ke; ++k)
      for (int j = 0; j < dims_.ny; ++j)
        for (int i = 0; i < dims_.nx; ++i) {
          long idx = dims_.index(i, j, int(k));
          nearest[idx] = nn.nearest(grid_node_position(dims_, bbox_, i, j, int(k))).index;
        }
  });
  for (long idx = 0; idx < N; ++idx)
    for (int c = 0; c < joints_; ++c) grids[c][idx] = sample_weights_(nearest[idx], c);
  return grids;
}

double DiffusionSolver::energy(const std::vector<VecX>& grids) const {
  if (int(grids.size()) != joints_) throw DimensionError("energy: channel count mismatch");
  GridLevel level(sample_points_, dims_, bbox_);
  double e = 0;
  for (int c = 0; c < joints_; ++c)
    e += level.channel_energy(lambda_, sample_weights_, sample_gradients_, grids[c], c);
  return e;
}

double DiffusionSolver::energy(const SkinningField& field) const {
  if (field.joints != joints_ || field.dims.node_count() != dims_.node_count())
    throw DimensionError("energy: field shape mismatch");
  std::vector<VecX> grids(joints_, VecX(dims_.node_count()));
  for (int c = 0; c < joints_; ++c)
    for (long i = 0; i < dims_.node_count(); ++i)
      grids[c][i] = field.data[c * field.channel_stride() + i];
  return energy(grids);
}

SkinningField DiffusionSolver::solve(const CgParams& cg, DiffusionReport* report) const {
  // cascade: coarse-to-fine warm starts leave only high-frequency error for
  // the fine-level CG, which the Jacobi preconditioner handles well
  std::vector<GridDims> schedule = {dims_};
  while (true) {
    const GridDims& d = schedule.back();
    GridDims half{(d.nx + 1) / 2, (d.ny + 1) / 2, (d.nz + 1) / 2};
    if (half.nx < 9 || half.ny < 9 || half.nz < 9 || schedule.size() >= 4) break;
    schedule.push_back(half);
  }
  std::vector<GridLevel> levels;
  levels.reserve(schedule.size());
  for (const GridDims& d : schedule) levels.emplace_back(sample_points_, d, bbox_);

  // A weak value anchor toward the nearest-sample extension pins the
  // biharmonic near-null modes (affine drifts and far-field bumps) that the
  // energy terms cannot see. Far from dominating anything, it keeps the far
  // field inside [0,1] so the final clamp is a no-op there.
  const double anchor_eps = lambda_.lambda_anchor;

  // per-level nearest-sample extension: warm start, anchor target
  std::vector<std::vector<VecX>> anchors(levels.size());
  {
    GridNN nn(sample_points_);
    for (size_t l = 0; l < levels.size(); ++l) {
      const GridDims& d = levels[l].dims;
      anchors[l].assign(joints_, VecX(d.node_count()));
      std::vector<int> nearest(d.node_count());
      parallel_chunks(d.nz, [&](int64_t kb, int64_t ke) {
        for (int64_t k = kb; k < ke; ++k)
          for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
              nearest[d.index(i, j, int(k))] =
                  nn.nearest(grid_node_position(d, bbox_, i, j, int(k))).index;
      });
      for (long idx = 0; idx < d.node_count(); ++idx)
        for (int c = 0; c < joints_; ++c) anchors[l][c][idx] = sample_weights_(nearest[idx], c);
    }
  }

  std::vector<VecX> diags(levels.size());
  for (size_t l = 0; l < levels.size(); ++l) {
    diags[l] = levels[l].jacobi_diagonal(lambda_);
    diags[l].array() += anchor_eps;
  }

  std::vector<VecX> solution(joints_);
  std::vector<DiffusionReport::ChannelStats> stats(joints_);
  std::vector<std::string> failures(joints_);

  parallel_chunks(joints_, [&](int64_t cb, int64_t ce) {
    for (int64_t c = cb; c < ce; ++c) {
      VecX x = anchors.back()[c];
      for (long l = long(levels.size()) - 1; l >= 0; --l) {
        const GridLevel& level = levels[l];
        VecX rhs = level.rhs_for_channel(lambda_, sample_weights_, sample_gradients_, int(c));
        rhs += anchor_eps * anchors[l][c];
        bool finest = l == 0;
        double tol = finest ? cg.tolerance : std::max(0.1 * cg.tolerance, 1e-9);
        long cap = finest ? cg.max_iterations : std::min<long>(cg.max_iterations, 3000);
        CgOutcome out = pcg(level, lambda_, anchor_eps, rhs, diags[l], x, tol, cap);
        if (finest) {
          stats[c].iterations = out.iterations;
          stats[c].rel_residual = out.rel_residual;
          if (out.breakdown)
            failures[c] = "channel " + std::to_string(c) + " broke down at residual " +
                          std::to_string(out.rel_residual);
        }
        if (l > 0) x = prolong(x, level.dims, levels[l - 1].dims, bbox_);
      }
      solution[c] = std::move(x);
    }
  });

  for (int c = 0; c < joints_; ++c)
    if (!failures[c].empty())
      throw SolverError("diffusion CG did not converge: " + failures[c],
                        stats[c].rel_residual);

  const long N = dims_.node_count();
  SkinningField field;
  field.dims = dims_;
  field.bbox = bbox_;
  field.joints = joints_;
  field.data.resize(N * joints_);
  for (long i = 0; i < N; ++i) {
    double sum = 0;
    for (int c = 0; c < joints_; ++c) sum += std::clamp(solution[c][i], 0.0, 1.0);
    for (int c = 0; c < joints_; ++c) {
      double v = std::clamp(solution[c][i], 0.0, 1.0);
      field.data[c * N + i] = float(sum > 1e-12 ? v / sum : 1.0 / joints_);
    }
  }

  if (report) {
    report->channels = stats;
    report->energy_baseline = energy(baseline_grids());
    report->energy_solution = energy(field);
    report->energy_solution_raw = energy(solution);
    for (int c = 0; c < joints_; ++c) {
      report->raw_min = std::min(report->raw_min, solution[c].minCoeff());
      report->raw_max = std::max(report->raw_max, solution[c].maxCoeff());
    }
  }
  return field;
}

SkinningField assemble_and_solve(const SkinnedBody& body, const DiffusionWeights& weights,
                                 int resolution, long surface_samples, uint64_t seed,
                                 const CgParams& cg, DiffusionReport* report) {
  if (resolution < 32) throw ConfigError("assemble_and_solve: resolution must be >= 32");
  if (surface_samples < 10 * long(body.mesh.vertices.size()))
    throw ConfigError("assemble_and_solve: need at least 10 samples per vertex");
  Aabb box = skinning_field_bbox(body.mesh.bounds());
  GridDims dims{resolution, resolution, resolution};
  DiffusionSolver solver(body, weights, dims, box, surface_samples, seed);
  return solver.solve(cg, report);
}

}  // namespace fite
