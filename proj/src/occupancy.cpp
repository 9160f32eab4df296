#include "fite/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fite/errors.hpp"
#include "fite/nn/adam.hpp"
#include "fite/nn/checkpoint.hpp"

namespace fite {

OccupancyField::OccupancyField(int joint_count, const OccupancyNetConfig& config, uint64_t seed)
    : joints_(joint_count), cfg_(config) {
  net_ = nn::make_mlp(3 + pose_embedding_dim(), cfg_.hidden, cfg_.layers + 1, 1,
                      nn::Activation::Softplus, seed);
}

MatXR OccupancyField::make_inputs(const std::vector<Vec3>& points, const Pose& pose) const {
  if (pose.joint_count() != joints_)
    throw DimensionError("occupancy: pose joint count mismatch");
  MatXR x(points.size(), 3 + pose_embedding_dim());
  for (size_t i = 0; i < points.size(); ++i) {
    x(i, 0) = points[i].x();
    x(i, 1) = points[i].y();
    x(i, 2) = points[i].z();
    for (int j = 0; j < joints_; ++j)
      for (int a = 0; a < 3; ++a) x(i, 3 + 3 * j + a) = pose.joint_rotations[j][a];
  }
  return x;
}

VecX OccupancyField::logits(const std::vector<Vec3>& points, const Pose& pose) {
  MatXR y = net_->forward(make_inputs(points, pose));
  return VecX(Eigen::Map<const VecX>(y.data(), y.rows()));
}

double OccupancyField::evaluate(const Vec3& p, const Pose& pose) {
  double z = logits({p}, pose)[0];
  double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(s, 1e-12, 1.0 - 1e-12);
}

void OccupancyField::save(const std::string& path) {
  std::ostringstream header;
  header << "occupancy joints " << joints_ << " hidden " << cfg_.hidden << " layers "
         << cfg_.layers;
  nn::save_checkpoint(path, header.str(), *net_);
}

OccupancyField OccupancyField::load(const std::string& path) {
  nn::Checkpoint ckpt = nn::load_checkpoint(path);
  std::istringstream header(ckpt.header);
  std::string tag, k1, k2, k3;
  int joints, hidden, layers;
  header >> tag >> k1 >> joints >> k2 >> hidden >> k3 >> layers;
  if (tag != "occupancy" || k1 != "joints" || k2 != "hidden" || k3 != "layers")
    throw IoError("occupancy checkpoint: bad header '" + ckpt.header + "'");
  OccupancyField f(joints, {hidden, layers}, 0);
  nn::load_into(ckpt, f.net());
  return f;
}

std::vector<TrainSample> sample_training_batch(const ScanFrame& frame,
                                               const MeshOccupancy& frame_occupancy,
                                               const Skeleton& skeleton,
                                               const SkinningField& field,
                                               const PointCloudN& canonical_anchor,
                                               long near_count, long uniform_count,
                                               double near_sigma, uint64_t seed) {
  std::vector<RigidTransform> transforms = forward_kinematics(skeleton, frame.pose);
  Rng rng(seed);
  std::vector<TrainSample> out;
  out.reserve(near_count + uniform_count);
  for (long i = 0; i < near_count + uniform_count; ++i) {
    Vec3 p;
    if (i < near_count) {
      const Vec3& base = canonical_anchor.points[rng.below(canonical_anchor.points.size())];
      p = base + rng.gaussian3(near_sigma);
    } else {
      p = Vec3(rng.uniform(field.bbox.min.x(), field.bbox.max.x()),
               rng.uniform(field.bbox.min.y(), field.bbox.max.y()),
               rng.uniform(field.bbox.min.z(), field.bbox.max.z()));
    }
    VecX w = field.query(p);
    Vec3 q = lbs_warp(p, std::span<const double>(w.data(), w.size()), transforms);
    out.push_back({p, frame_occupancy.query(q)});
  }
  return out;
}

namespace {

// content-based frame ordering so the input permutation cannot matter
std::vector<int> canonical_frame_order(const std::vector<ScanFrame>& frames) {
  std::vector<int> order(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) order[i] = int(i);
  auto key = [&](int i) {
    uint64_t h = fnv1a(&frames[i].outfit_id, sizeof(int));
    for (const Vec3& aa : frames[i].pose.joint_rotations)
      h = fnv1a(aa.data(), 3 * sizeof(double), h);
    return h;
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
  return order;
}

}  // namespace

TrainedStage1 train_occupancy(const std::vector<ScanFrame>& frames, const Skeleton& skeleton,
                              const SkinningField& field, const PointCloudN& canonical_anchor,
                              const OccupancyNetConfig& net_config,
                              const Stage1Schedule& schedule) {
  if (frames.empty()) throw InvalidInputError("train_occupancy: no frames");
  std::vector<int> order = canonical_frame_order(frames);
  std::vector<std::unique_ptr<MeshOccupancy>> testers;
  testers.reserve(frames.size());
  for (int idx : order) testers.push_back(std::make_unique<MeshOccupancy>(frames[idx].mesh));

  TrainedStage1 result;
  result.field = std::make_shared<OccupancyField>(skeleton.joint_count, net_config,
                                                  hash_combine(schedule.seed, 0x0cc));
  nn::Sequential& net = result.field->net();
  nn::AdamOptimizer opt(net, {.lr = schedule.lr});

  long near_count = long(schedule.batch * schedule.near_fraction);
  long uniform_count = schedule.batch - near_count;

  double loss_acc = 0;
  long loss_n = 0;
  for (long step = 0; step < schedule.steps; ++step) {
    uint64_t step_seed = hash_combine(schedule.seed, uint64_t(step) + 1);
    Rng rng(step_seed);
    int fi = int(rng.below(order.size()));
    const ScanFrame& frame = frames[order[fi]];
    std::vector<TrainSample> batch =
        sample_training_batch(frame, *testers[fi], skeleton, field, canonical_anchor, near_count,
                              uniform_count, schedule.near_sigma, hash_combine(step_seed, 0xba7c4));

    std::vector<Vec3> pts(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) pts[i] = batch[i].canonical;
    MatXR x = result.field->make_inputs(pts, frame.pose);
    MatXR z = net.forward(x);

    double loss = 0;
    MatXR dz(z.rows(), 1);
    for (long i = 0; i < z.rows(); ++i) {
      double zi = z(i, 0);
      double y = batch[i].label;
      loss += std::max(zi, 0.0) - zi * y + std::log1p(std::exp(-std::abs(zi)));
      double sig = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
      dz(i, 0) = (sig - y) / double(z.rows());
    }
    loss /= double(z.rows());
    if (!std::isfinite(loss)) throw TrainingError("stage1: loss diverged", step);

    net.zero_grad();
    net.backward(dz);
    opt.step();

    loss_acc += loss;
    loss_n++;
    if ((step + 1) % schedule.log_every == 0 || step + 1 == schedule.steps) {
      result.loss_curve.push_back(loss_acc / loss_n);
      loss_acc = 0;
      loss_n = 0;
    }
  }
  result.final_bce = result.loss_curve.empty() ? 0 : result.loss_curve.back();
  return result;
}

int select_canonical_pose_index(const std::vector<Pose>& poses) {
  if (poses.empty()) throw InvalidInputError("select_canonical_pose: empty pose list");
  int best = 0;
  double best_norm = poses[0].joint_l1_norm();
  for (size_t i = 1; i < poses.size(); ++i) {
    double n = poses[i].joint_l1_norm();
    if (n < best_norm) {
      best_norm = n;
      best = int(i);
    }
  }
  return best;
}

Pose select_canonical_pose(const std::vector<Pose>& poses) {
  return poses[select_canonical_pose_index(poses)];
}

void TemplateMesh::validate() const {
  mesh.validate_indices();
  if (long(vertex_skinning.rows()) != long(mesh.vertices.size()))
    throw DimensionError("template: skinning row count mismatch");
  for (long i = 0; i < vertex_skinning.rows(); ++i)
    if (std::abs(vertex_skinning.row(i).sum() - 1.0) > 1e-6)
      throw ContractError("template: skinning rows must sum to 1");
}

TemplateMesh attach_skinning(const TriMesh& mesh, const SkinningField& field) {
  TemplateMesh tmpl;
  tmpl.mesh = mesh;
  tmpl.vertex_skinning.resize(mesh.vertices.size(), field.joints);
  for (size_t v = 0; v < mesh.vertices.size(); ++v)
    tmpl.vertex_skinning.row(v) = field.query(mesh.vertices[v]).transpose();
  return tmpl;
}

TemplateMesh extract_template(OccupancyField& f, const Pose& canonical_pose,
                              const SkinningField& field, int resolution) {
  GridDims dims{resolution, resolution, resolution};
  const Aabb& box = field.bbox;
  std::vector<double> values(dims.node_count());

  const long kBatch = 16384;
  std::vector<Vec3> pts;
  pts.reserve(kBatch);
  long base = 0;
  for (int k = 0; k < dims.nz; ++k)
    for (int j = 0; j < dims.ny; ++j)
      for (int i = 0; i < dims.nx; ++i) {
        pts.push_back(grid_node_position(dims, box, i, j, k));
        if (long(pts.size()) == kBatch) {
          VecX z = f.logits(pts, canonical_pose);
          for (long t = 0; t < z.size(); ++t)
            values[base + t] = 1.0 / (1.0 + std::exp(-z[t]));
          base += z.size();
          pts.clear();
        }
      }
  if (!pts.empty()) {
    VecX z = f.logits(pts, canonical_pose);
    for (long t = 0; t < z.size(); ++t) values[base + t] = 1.0 / (1.0 + std::exp(-z[t]));
  }

  TriMesh mesh = extract_isosurface(values, dims, box, 0.5);
  mesh = largest_component(mesh);
  TemplateMesh tmpl = attach_skinning(mesh, field);
  tmpl.validate();
  return tmpl;
}

void save_template(const std::string& ply_path, const TemplateMesh& tmpl) {
  PlyData data;
  data.positions = tmpl.mesh.vertices;
  data.weights = tmpl.vertex_skinning;
  data.faces = tmpl.mesh.faces;
  save_ply(ply_path, data);
}

TemplateMesh load_template(const std::string& ply_path) {
  PlyData data = load_ply(ply_path);
  if (data.weights.size() == 0) throw IoError("template PLY missing weight properties");
  TemplateMesh tmpl;
  tmpl.mesh.vertices = data.positions;
  tmpl.mesh.faces = data.faces;
  tmpl.vertex_skinning = data.weights;
  // stored as float32; renormalize rows before validating the 1e-6 contract
  for (long i = 0; i < tmpl.vertex_skinning.rows(); ++i) {
    double s = tmpl.vertex_skinning.row(i).sum();
    if (s > 1e-12) tmpl.vertex_skinning.row(i) /= s;
  }
  tmpl.validate();
  return tmpl;
}

double occupancy_iou(OccupancyField& f, const Pose& pose,
                     const std::vector<TrainSample>& samples) {
  std::vector<Vec3> pts(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) pts[i] = samples[i].canonical;
  VecX z = f.logits(pts, pose);
  long inter = 0, uni = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    bool pred = z[long(i)] > 0;
    bool lab = samples[i].label != 0;
    inter += pred && lab;
    uni += pred || lab;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

}  // namespace fite
