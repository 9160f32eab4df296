#pragma once

#include <vector>

#include "fite/skinning_field.hpp"
#include "fite/synthetic_body.hpp"
#include "fite/types.hpp"

namespace fite {

struct DiffusionWeights {
  double lambda_point = 1e4;  // surface value fidelity
  double lambda_grad = 1e2;   // surface tangential-gradient fidelity
  double lambda_reg = 1.0;    // squared-Laplacian smoothness
  // weak value anchor toward the nearest-sample extension; pins the
  // biharmonic near-null modes so the far field stays in [0,1]
  double lambda_anchor = 100.0;

  void validate() const;  // lambda_point > 0, all nonnegative
};

struct CgParams {
  double tolerance = 1e-6;  // relative residual of the normal equations
  long max_iterations = 10000;
};

// Per-vertex tangential gradient of one weight channel (tangent to the vertex
// normal by construction).
struct SurfaceWeightGradient {
  std::vector<Vec3> vertex_gradients;
};

SurfaceWeightGradient surface_gradient(const SkinnedBody& body, int channel);

// All channels at once (shares the per-face pass).
std::vector<SurfaceWeightGradient> surface_gradients(const SkinnedBody& body);

// Field domain: cube centered on the body, side 1.4x the largest body-bbox
// extent (20% margin per side, cubic so loose outfits stay covered).
Aabb skinning_field_bbox(const Aabb& body_bounds);

struct DiffusionReport {
  struct ChannelStats {
    long iterations = 0;
    double rel_residual = 0;
  };
  std::vector<ChannelStats> channels;
  double energy_solution = 0;
  double energy_baseline = 0;
  double energy_solution_raw = 0;  // before clamping/renormalization
  double raw_min = 0, raw_max = 0;
};

// Discrete least-squares diffusion of surface skinning weights into the grid:
//   lambda_point * sum_s (w(p_s) - w^s(p_s))^2            (trilinear stencils)
// + lambda_grad  * sum_s |grad w(p_s) - grad_T w^s(p_s)|^2 (central differences)
// + lambda_reg   * sum_interior (7-point laplacian)^2
// One channel at a time (channels run on worker threads). Each channel is a
// Jacobi-preconditioned conjugate-gradient solve of the normal equations,
// cascaded coarse-to-fine: coarser grids are solved first (starting from the
// nearest-surface-sample extension) and prolonged as warm starts, which
// leaves the fine level with fast-converging high-frequency error. CG stops
// at the relative-residual tolerance or the iteration cap; numerical
// breakdown raises SolverError with the final residual. Channels are clamped
// to [0,1] and renormalized node-wise afterwards.
class DiffusionSolver {
 public:
  DiffusionSolver(const SkinnedBody& body, const DiffusionWeights& weights, GridDims dims,
                  const Aabb& bbox, long surface_samples, uint64_t seed);

  SkinningField solve(const CgParams& cg = {}, DiffusionReport* report = nullptr) const;

  // Nearest-surface-sample weight extension on the same grid (the comparison
  // baseline; also the warm start).
  std::vector<VecX> baseline_grids() const;

  double energy(const std::vector<VecX>& channel_grids) const;
  double energy(const SkinningField& field) const;

  const GridDims& dims() const { return dims_; }
  const Aabb& bbox() const { return bbox_; }
  int joints() const { return joints_; }

 private:
  GridDims dims_;
  Aabb bbox_;
  Vec3 spacing_;
  int joints_;

  // surface samples
  std::vector<Vec3> sample_points_;
  MatXR sample_weights_;    // S x J, targets for the data term
  std::vector<MatXR> sample_gradients_;  // per channel: S x 3

  DiffusionWeights lambda_;
};

// Spec-level entry point with the documented preconditions (resolution >= 32
// per axis, surface_samples >= 10x vertex count).
SkinningField assemble_and_solve(const SkinnedBody& body, const DiffusionWeights& weights,
                                 int resolution, long surface_samples, uint64_t seed,
                                 const CgParams& cg = {}, DiffusionReport* report = nullptr);

}  // namespace fite
