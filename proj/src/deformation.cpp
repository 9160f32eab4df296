#include "fite/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fite/errors.hpp"
#include "fite/nn/adam.hpp"
#include "fite/nn/checkpoint.hpp"

namespace fite {

namespace fs = std::filesystem;

// ---- shared nets ----

SharedNets::SharedNets(const SharedNetsConfig& config, uint64_t seed) : cfg(config) {
  corrector = nn::make_mlp(cfg.c_geom, cfg.corrector_width, cfg.corrector_layers, 3,
                           nn::Activation::LeakyRelu, hash_combine(seed, 0xc0));
  for (int d = 0; d < 4; ++d) {
    nn::UNetConfig uc;
    uc.in_channels = 3;
    uc.out_channels = cfg.c_pose;
    uc.base_channels = cfg.unet_base;
    uc.height = uc.width = cfg.image_size;
    encoders[d] = std::make_unique<nn::UNetEncoder>(uc, hash_combine(seed, 0xe0 + d));
  }
  decoder = nn::make_mlp(4 * cfg.c_pose + cfg.c_geom, cfg.decoder_width, cfg.decoder_layers, 6,
                         nn::Activation::LeakyRelu, hash_combine(seed, 0xd0));
}

void SharedNets::zero_params() {
  corrector->zero_params();
  decoder->zero_params();
  for (auto& e : encoders) e->zero_params();
}

std::vector<nn::ParamSegment> SharedNets::segments() {
  std::vector<nn::ParamSegment> out;
  corrector->collect_segments("corrector/", out);
  for (int d = 0; d < 4; ++d)
    encoders[d]->collect_segments("encoder" + std::to_string(d) + "/", out);
  decoder->collect_segments("decoder/", out);
  return out;
}

uint64_t SharedNets::param_hash() {
  uint64_t h = 1469598103934665603ULL;
  for (auto& s : segments()) h = fnv1a(s.values, s.size * sizeof(double), h);
  return h;
}

void SharedNets::save(const std::string& path) {
  std::ostringstream header;
  header << "stage2 c_pose " << cfg.c_pose << " c_geom " << cfg.c_geom << " unet_base "
         << cfg.unet_base << " decoder_width " << cfg.decoder_width << " decoder_layers "
         << cfg.decoder_layers << " corrector_width " << cfg.corrector_width
         << " corrector_layers " << cfg.corrector_layers << " image_size " << cfg.image_size
         << " tilt " << cfg.tilt;
  nn::save_checkpoint(path, header.str(), segments());
}

SharedNets SharedNets::load(const std::string& path) {
  nn::Checkpoint ckpt = nn::load_checkpoint(path);
  std::istringstream header(ckpt.header);
  std::string tag, key;
  SharedNetsConfig cfg;
  header >> tag;
  if (tag != "stage2") throw IoError("stage2 checkpoint: bad header");
  while (header >> key) {
    if (key == "c_pose") header >> cfg.c_pose;
    else if (key == "c_geom") header >> cfg.c_geom;
    else if (key == "unet_base") header >> cfg.unet_base;
    else if (key == "decoder_width") header >> cfg.decoder_width;
    else if (key == "decoder_layers") header >> cfg.decoder_layers;
    else if (key == "corrector_width") header >> cfg.corrector_width;
    else if (key == "corrector_layers") header >> cfg.corrector_layers;
    else if (key == "image_size") header >> cfg.image_size;
    else if (key == "tilt") header >> cfg.tilt;
    else throw IoError("stage2 checkpoint: unknown header key " + key);
  }
  SharedNets nets(cfg, 0);
  nn::load_into(ckpt, nets.segments());
  return nets;
}

// ---- avatar ----

std::vector<nn::ParamSegment> OutfitAvatar::feature_segments() {
  return {{"geo_features", geo_features.data(), geo_grads.data(),
           long(geo_features.size())}};
}

void OutfitAvatar::validate() const {
  if (long(template_points.size()) != long(point_skinning.rows()) ||
      template_points.size() != template_normals.size())
    throw DimensionError("avatar: point array shape mismatch");
  if (geo_features.rows() != long(template_points.size()))
    throw DimensionError("avatar: feature row mismatch");
  for (long i = 0; i < point_skinning.rows(); ++i)
    if (std::abs(point_skinning.row(i).sum() - 1.0) > 1e-6)
      throw ContractError("avatar: skinning rows must sum to 1");
}

OutfitAvatar make_avatar(const TemplateMesh& tmpl, const SkinningField& field, long n_points,
                         int c_geom, int outfit_id, uint64_t seed) {
  if (n_points < 1000) throw ConfigError("avatar: need at least 1000 template points");
  OutfitAvatar avatar;
  avatar.outfit_id = outfit_id;
  avatar.template_mesh = tmpl;
  PointCloudN samples = sample_surface(tmpl.mesh, n_points, seed);
  avatar.template_points = std::move(samples.points);
  avatar.template_normals = std::move(samples.normals);
  avatar.point_skinning.resize(n_points, field.joints);
  for (long i = 0; i < n_points; ++i)
    avatar.point_skinning.row(i) = field.query(avatar.template_points[i]).transpose();
  avatar.geo_features = MatXR::Zero(n_points, c_geom);
  avatar.geo_grads = MatXR::Zero(n_points, c_geom);
  avatar.validate();
  return avatar;
}

void save_avatar(const std::string& dir, const OutfitAvatar& avatar) {
  fs::create_directories(dir);
  save_template(dir + "/template.ply", avatar.template_mesh);
  PlyData pts;
  pts.positions = avatar.template_points;
  pts.normals = avatar.template_normals;
  pts.weights = avatar.point_skinning;
  save_ply(dir + "/points.ply", pts);
  // feature matrix as a single-segment checkpoint
  MatXR features = avatar.geo_features;
  MatXR grads = MatXR::Zero(features.rows(), features.cols());
  std::vector<nn::ParamSegment> segs = {
      {"geo_features", features.data(), grads.data(), long(features.size())}};
  std::ostringstream header;
  header << "avatar outfit " << avatar.outfit_id << " points " << avatar.point_count()
         << " c_geom " << avatar.geo_features.cols();
  nn::save_checkpoint(dir + "/features.ckpt", header.str(), segs);
}

OutfitAvatar load_avatar(const std::string& dir) {
  OutfitAvatar avatar;
  avatar.template_mesh = load_template(dir + "/template.ply");
  PlyData pts = load_ply(dir + "/points.ply");
  avatar.template_points = pts.positions;
  avatar.template_normals = pts.normals;
  for (Vec3& n : avatar.template_normals) {
    double len = n.norm();
    if (len > 0) n /= len;
  }
  avatar.point_skinning = pts.weights;
  for (long i = 0; i < avatar.point_skinning.rows(); ++i) {
    double s = avatar.point_skinning.row(i).sum();
    if (s > 1e-12) avatar.point_skinning.row(i) /= s;
  }
  nn::Checkpoint ckpt = nn::load_checkpoint(dir + "/features.ckpt");
  std::istringstream header(ckpt.header);
  std::string tag, k1, k2, k3;
  long outfit, n, c_geom;
  header >> tag >> k1 >> outfit >> k2 >> n >> k3 >> c_geom;
  if (tag != "avatar") throw IoError("avatar checkpoint: bad header");
  avatar.outfit_id = int(outfit);
  const auto& vals = ckpt.segments.at("geo_features");
  if (long(vals.size()) != n * c_geom) throw IoError("avatar checkpoint: feature size mismatch");
  avatar.geo_features.resize(n, c_geom);
  for (long i = 0; i < long(vals.size()); ++i) avatar.geo_features.data()[i] = vals[i];
  avatar.geo_grads = MatXR::Zero(n, c_geom);
  avatar.validate();
  return avatar;
}

// ---- prediction pipeline ----

RenderedPoseMaps render_pose_maps(const OutfitAvatar& avatar, const Skeleton& skeleton,
                                  const Pose& pose, int image_size, double tilt) {
  RenderedPoseMaps out;
  out.views = ViewConfig::make_default(avatar.template_mesh.mesh.bounds(), image_size, tilt);
  std::vector<Vec3> posed = pose_template(avatar.template_mesh, skeleton, pose);
  out.maps.reserve(4);
  for (const CameraView& cam : out.views.views)
    out.maps.push_back(rasterize_position_map(avatar.template_mesh.mesh, posed, cam));
  return out;
}

namespace {

struct BilinearRecord {
  bool valid = false;
  int ix = 0, iy = 0;
  double w00 = 0, w10 = 0, w01 = 0, w11 = 0;
};

MatXR map_to_chw_row(const PositionMap& map) {
  MatXR row(1, 3L * map.height * map.width);
  long hw = long(map.height) * map.width;
  for (long i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c) row(0, c * hw + i) = map.pixels[i * 3 + c];
  return row;
}

struct ForwardPass {
  std::vector<long> subset;
  std::vector<Mat3> blend;
  std::vector<Vec3> tbar;
  MatXR corr_in, corr_out;
  MatXR dec_in, dec_out;
  std::vector<std::array<BilinearRecord, 4>> samples;
  std::vector<FeatureImage> encoded;
  std::vector<Vec3> n_prime;
  std::vector<double> n_prime_len;
  PredictedCloud cloud;
};

BilinearRecord locate_bilinear(const Vec3& p, const CameraView& view, const PositionMap& map) {
  BilinearRecord rec;
  Eigen::Vector2d px = view.project(p);
  double fx = px.x() - 0.5, fy = px.y() - 0.5;
  int ix = int(std::floor(fx)), iy = int(std::floor(fy));
  if (ix < 0 || iy < 0 || ix + 1 >= map.width || iy + 1 >= map.height) return rec;
  auto m = [&](int y, int x) { return map.mask[long(y) * map.width + x] != 0; };
  if (!m(iy, ix) || !m(iy, ix + 1) || !m(iy + 1, ix) || !m(iy + 1, ix + 1)) return rec;
  double ax = fx - ix, ay = fy - iy;
  rec.valid = true;
  rec.ix = ix;
  rec.iy = iy;
  rec.w00 = (1 - ax) * (1 - ay);
  rec.w10 = ax * (1 - ay);
  rec.w01 = (1 - ax) * ay;
  rec.w11 = ax * ay;
  return rec;
}

ForwardPass run_forward(const OutfitAvatar& avatar, SharedNets& nets, const Skeleton& skeleton,
                        const Pose& pose, const RenderedPoseMaps& maps,
                        const std::vector<long>& subset) {
  const int c_pose = nets.cfg.c_pose;
  const int c_geom = nets.cfg.c_geom;
  const long n = long(subset.size());
  const int J = skeleton.joint_count;

  ForwardPass fp;
  fp.subset = subset;
  std::vector<RigidTransform> transforms = forward_kinematics(skeleton, pose);

  fp.blend.resize(n);
  fp.tbar.resize(n);
  for (long i = 0; i < n; ++i) {
    Mat3 b = Mat3::Zero();
    Vec3 t = Vec3::Zero();
    const double* w = avatar.point_skinning.data() + subset[i] * J;
    for (int j = 0; j < J; ++j) {
      if (w[j] == 0) continue;
      b += w[j] * transforms[j].rotation;
      t += w[j] * transforms[j].translation;
    }
    fp.blend[i] = b;
    fp.tbar[i] = t;
  }

  // template correction
  fp.corr_in.resize(n, c_geom);
  for (long i = 0; i < n; ++i) fp.corr_in.row(i) = avatar.geo_features.row(subset[i]);
  fp.corr_out = nets.corrector->forward(fp.corr_in);

  // encode position maps
  fp.encoded.resize(4);
  for (int d = 0; d < 4; ++d) {
    MatXR in = map_to_chw_row(maps.maps[d]);
    MatXR out = nets.encoders[d]->forward(in);
    FeatureImage& img = fp.encoded[d];
    img.height = maps.maps[d].height;
    img.width = maps.maps[d].width;
    img.channels = c_pose;
    img.data.assign(out.data(), out.data() + out.size());
    img.mask = maps.maps[d].mask;
  }

  // pixel-aligned pose features
  fp.samples.resize(n);
  fp.dec_in.resize(n, 4 * c_pose + c_geom);
  fp.dec_in.setZero();
  for (long i = 0; i < n; ++i) {
    const Vec3& p = avatar.template_points[subset[i]];
    for (int d = 0; d < 4; ++d) {
      BilinearRecord rec = locate_bilinear(p, maps.views.views[d], maps.maps[d]);
      fp.samples[i][d] = rec;
      if (!rec.valid) continue;
      const FeatureImage& img = fp.encoded[d];
      long hw = long(img.height) * img.width;
      for (int c = 0; c < c_pose; ++c) {
        const double* ch = img.data.data() + long(c) * hw;
        double v = rec.w00 * ch[long(rec.iy) * img.width + rec.ix] +
                   rec.w10 * ch[long(rec.iy) * img.width + rec.ix + 1] +
                   rec.w01 * ch[long(rec.iy + 1) * img.width + rec.ix] +
                   rec.w11 * ch[long(rec.iy + 1) * img.width + rec.ix + 1];
        fp.dec_in(i, d * c_pose + c) = v;
      }
    }
    fp.dec_in.row(i).segment(4 * c_pose, c_geom) = avatar.geo_features.row(subset[i]);
  }

  fp.dec_out = nets.decoder->forward(fp.dec_in);

  // compose final cloud
  fp.cloud.points.resize(n);
  fp.cloud.normals.resize(n);
  fp.cloud.correction.resize(n);
  fp.cloud.residual_canonical.resize(n);
  fp.cloud.residual.resize(n);
  fp.n_prime.resize(n);
  fp.n_prime_len.resize(n);
  for (long i = 0; i < n; ++i) {
    Vec3 r_c = fp.dec_out.row(i).head<3>().transpose();
    Vec3 dn = fp.dec_out.row(i).tail<3>().transpose();
    Vec3 c = fp.corr_out.row(i).transpose();
    Vec3 n_c = avatar.template_normals[subset[i]] + dn;
    Vec3 r = fp.blend[i] * r_c;
    Vec3 np = fp.blend[i] * n_c;
    double len = np.norm();
    if (len < 1e-9)
      throw DegenerateDirectionError("predict: blended normal has zero length");
    const Vec3& p = avatar.template_points[subset[i]];
    fp.cloud.points[i] = fp.blend[i] * (p + c) + fp.tbar[i] + r;
    fp.cloud.normals[i] = np / len;
    fp.cloud.correction[i] = c;
    fp.cloud.residual_canonical[i] = r_c;
    fp.cloud.residual[i] = r;
    fp.n_prime[i] = np;
    fp.n_prime_len[i] = len;
  }
  return fp;
}

std::vector<long> all_indices(long n) {
  std::vector<long> idx(n);
  for (long i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

PredictedCloud predict(const OutfitAvatar& avatar, SharedNets& nets, const Skeleton& skeleton,
                       const Pose& pose, const RenderedPoseMaps* cached_maps) {
  RenderedPoseMaps local;
  const RenderedPoseMaps* maps = cached_maps;
  if (!maps) {
    local = render_pose_maps(avatar, skeleton, pose, nets.cfg.image_size, nets.cfg.tilt);
    maps = &local;
  }
  ForwardPass fp = run_forward(avatar, nets, skeleton, pose, *maps,
                               all_indices(avatar.point_count()));
  return std::move(fp.cloud);
}

// ---- losses ----

double loss_point(const std::vector<Vec3>& pred_points, const PointCloudN& gt,
                  const GridNN& gt_index) {
  if (pred_points.empty() || gt.points.empty())
    throw InvalidInputError("loss_point: empty cloud");
  double fwd = 0;
  for (const Vec3& q : pred_points) {
    auto r = gt_index.nearest(q);
    double e = (q - gt.points[r.index]).dot(gt.normals[r.index]);
    fwd += e * e;
  }
  fwd /= double(pred_points.size());
  GridNN pred_index(pred_points);
  double bwd = 0;
  for (const Vec3& p : gt.points) bwd += pred_index.nearest(p).dist2;
  bwd /= double(gt.points.size());
  return fwd + bwd;
}

double loss_point(const PredictedCloud& pred, const PointCloudN& gt) {
  GridNN gt_index(gt.points);
  return loss_point(pred.points, gt, gt_index);
}

double loss_normal(const PredictedCloud& pred, const PointCloudN& gt) {
  if (pred.points.empty() || gt.points.empty())
    throw InvalidInputError("loss_normal: empty cloud");
  GridNN gt_index(gt.points);
  double acc = 0;
  for (size_t k = 0; k < pred.points.size(); ++k) {
    auto r = gt_index.nearest(pred.points[k]);
    acc += (pred.normals[k] - gt.normals[r.index]).cwiseAbs().sum();
  }
  return acc / double(pred.points.size());
}

// ---- training step with full backward ----

LossBreakdown stage2_step_gradients(const OutfitAvatar& avatar, MatXR& geo_grads,
                                    SharedNets& nets, const Skeleton& skeleton,
                                    const Stage2Frame& frame,
                                    const std::vector<long>& point_subset,
                                    const LossWeights& weights) {
  const long n = long(point_subset.size());
  const long m = long(frame.gt.points.size());
  const int c_pose = nets.cfg.c_pose;
  const int c_geom = nets.cfg.c_geom;

  ForwardPass fp =
      run_forward(avatar, nets, skeleton, frame.pose, *frame.maps, point_subset);

  // forward losses and dL/dq, dL/dn
  std::vector<Vec3> dq(n, Vec3::Zero());
  std::vector<Vec3> dn_unit(n, Vec3::Zero());
  LossBreakdown loss;

  std::vector<int> nn_gt(n);
  for (long i = 0; i < n; ++i) {
    auto r = frame.gt_index->nearest(fp.cloud.points[i]);
    nn_gt[i] = r.index;
    const Vec3& p = frame.gt.points[r.index];
    const Vec3& nrm = frame.gt.normals[r.index];
    double e = (fp.cloud.points[i] - p).dot(nrm);
    loss.point += e * e;
    dq[i] += weights.point * (2.0 / n) * e * nrm;

    Vec3 nu = fp.cloud.normals[i] - nrm;
    loss.normal += nu.cwiseAbs().sum();
    Vec3 sgn(nu.x() > 0 ? 1 : (nu.x() < 0 ? -1 : 0), nu.y() > 0 ? 1 : (nu.y() < 0 ? -1 : 0),
             nu.z() > 0 ? 1 : (nu.z() < 0 ? -1 : 0));
    dn_unit[i] += weights.normal * sgn / double(n);
  }
  loss.point /= double(n);
  loss.normal /= double(n);

  {
    GridNN pred_index(fp.cloud.points);
    double bwd = 0;
    for (long i = 0; i < m; ++i) {
      auto r = pred_index.nearest(frame.gt.points[i]);
      Vec3 d = fp.cloud.points[r.index] - frame.gt.points[i];
      bwd += d.squaredNorm();
      dq[r.index] += weights.point * (2.0 / m) * d;
    }
    loss.point += bwd / double(m);
  }

  // regularizers
  for (long i = 0; i < n; ++i) {
    loss.correction += fp.cloud.correction[i].squaredNorm();
    loss.residual += fp.cloud.residual[i].squaredNorm();
    loss.feature += avatar.geo_features.row(point_subset[i]).squaredNorm();
  }
  loss.correction /= double(n);
  loss.residual /= double(n);
  loss.feature /= double(n);
  loss.total = weights.point * loss.point + weights.normal * loss.normal +
               weights.correction_reg * loss.correction + weights.residual_reg * loss.residual +
               weights.feature_reg * loss.feature;
  if (!std::isfinite(loss.total)) throw TrainingError("stage2: loss is not finite", -1);

  // ---- backward ----
  nets.corrector->zero_grad();
  nets.decoder->zero_grad();
  for (auto& e : nets.encoders) e->zero_grad();
  geo_grads.setZero();

  MatXR d_dec_out(n, 6);
  MatXR d_corr_out(n, 3);
  for (long i = 0; i < n; ++i) {
    Vec3 dr_total = dq[i] + weights.residual_reg * (2.0 / n) * fp.cloud.residual[i];
    Vec3 d_r_c = fp.blend[i].transpose() * dr_total;
    const Vec3& nu = fp.cloud.normals[i];
    Vec3 d_np = (dn_unit[i] - nu * nu.dot(dn_unit[i])) / fp.n_prime_len[i];
    Vec3 d_n_c = fp.blend[i].transpose() * d_np;
    d_dec_out.row(i).head<3>() = d_r_c.transpose();
    d_dec_out.row(i).tail<3>() = d_n_c.transpose();
    Vec3 dc = fp.blend[i].transpose() * dq[i] +
              weights.correction_reg * (2.0 / n) * fp.cloud.correction[i];
    d_corr_out.row(i) = dc.transpose();
  }

  MatXR d_dec_in = nets.decoder->backward(d_dec_out);
  MatXR d_corr_in = nets.corrector->backward(d_corr_out);

  // scatter pixel-feature gradients into per-view images
  for (int d = 0; d < 4; ++d) {
    const FeatureImage& img = fp.encoded[d];
    long hw = long(img.height) * img.width;
    MatXR d_img = MatXR::Zero(1, long(c_pose) * hw);
    bool any = false;
    for (long i = 0; i < n; ++i) {
      const BilinearRecord& rec = fp.samples[i][d];
      if (!rec.valid) continue;
      any = true;
      for (int c = 0; c < c_pose; ++c) {
        double g = d_dec_in(i, d * c_pose + c);
        double* ch = d_img.data() + long(c) * hw;
        ch[long(rec.iy) * img.width + rec.ix] += rec.w00 * g;
        ch[long(rec.iy) * img.width + rec.ix + 1] += rec.w10 * g;
        ch[long(rec.iy + 1) * img.width + rec.ix] += rec.w01 * g;
        ch[long(rec.iy + 1) * img.width + rec.ix + 1] += rec.w11 * g;
      }
    }
    if (any) nets.encoders[d]->backward(d_img);
  }

  // feature gradients: decoder input tail + corrector input + L2 reg
  for (long i = 0; i < n; ++i) {
    long row = point_subset[i];
    geo_grads.row(row) += d_dec_in.row(i).segment(4 * c_pose, c_geom);
    geo_grads.row(row) += d_corr_in.row(i);
    geo_grads.row(row) +=
        weights.feature_reg * (2.0 / n) * avatar.geo_features.row(row);
  }

  return loss;
}

// ---- frame preparation & training ----

Stage2Frame prepare_stage2_frame(const std::vector<OutfitAvatar>& avatars,
                                 const std::vector<int>& avatar_by_outfit_id,
                                 const ScanFrame& frame, const Skeleton& skeleton,
                                 const SharedNetsConfig& cfg, long gt_samples, uint64_t seed) {
  Stage2Frame out;
  if (frame.outfit_id < 0 || frame.outfit_id >= int(avatar_by_outfit_id.size()) ||
      avatar_by_outfit_id[frame.outfit_id] < 0)
    throw InvalidInputError("stage2: no avatar for outfit id " +
                            std::to_string(frame.outfit_id));
  out.avatar_index = avatar_by_outfit_id[frame.outfit_id];
  out.pose = frame.pose;
  out.gt = sample_surface(frame.mesh, gt_samples, seed);
  out.gt_index = std::make_shared<GridNN>(out.gt.points);
  out.maps = std::make_shared<RenderedPoseMaps>(render_pose_maps(
      avatars[out.avatar_index], skeleton, frame.pose, cfg.image_size, cfg.tilt));
  return out;
}

namespace {

std::vector<long> sample_subset(long total, long batch, Rng& rng) {
  batch = std::min(batch, total);
  std::vector<long> idx(total);
  for (long i = 0; i < total; ++i) idx[i] = i;
  for (long i = 0; i < batch; ++i) {
    long j = i + long(rng.below(uint64_t(total - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch);
  return idx;
}

}  // namespace

Stage2Result train_stage2(std::vector<OutfitAvatar>& avatars, SharedNets& nets,
                          const Skeleton& skeleton, const std::vector<Stage2Frame>& frames,
                          const Stage2Schedule& schedule,
                          const std::function<void(long epoch)>& epoch_callback) {
  if (frames.empty()) throw InvalidInputError("train_stage2: no frames");
  nn::AdamOptimizer net_opt(nets.segments(), {.lr = schedule.lr});
  std::vector<nn::AdamOptimizer> geo_opts;
  geo_opts.reserve(avatars.size());
  for (auto& a : avatars)
    geo_opts.emplace_back(a.feature_segments(), nn::AdamParams{.lr = schedule.lr_geo});

  Stage2Result result;
  for (long epoch = 0; epoch < schedule.epochs; ++epoch) {
    Rng rng(hash_combine(schedule.seed, uint64_t(epoch) * 2654435761ULL + 1));
    std::vector<long> order(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) order[i] = long(i);
    for (size_t i = 0; i + 1 < order.size(); ++i) {
      size_t j = i + size_t(rng.below(uint64_t(order.size() - i)));
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0;
    for (long fi : order) {
      const Stage2Frame& frame = frames[fi];
      OutfitAvatar& avatar = avatars[frame.avatar_index];
      Rng step_rng(hash_combine(hash_combine(schedule.seed, uint64_t(epoch)), uint64_t(fi)));
      std::vector<long> subset =
          sample_subset(avatar.point_count(), schedule.point_batch, step_rng);
      LossBreakdown loss = stage2_step_gradients(avatar, avatar.geo_grads, nets, skeleton,
                                                 frame, subset, schedule.loss);
      net_opt.step();
      geo_opts[frame.avatar_index].step();
      epoch_loss += loss.total;
    }
    result.loss_curve.push_back(epoch_loss / double(frames.size()));
    if (epoch_callback) epoch_callback(epoch);
  }
  result.final_loss = result.loss_curve.empty() ? 0 : result.loss_curve.back();
  return result;
}

// ---- novel-scan fitting ----

FitResult fit_novel_scan(SharedNets& nets, const OutfitAvatar& base_avatar,
                         const ScanFrame& scan, const Skeleton& skeleton, long steps,
                         double lr, long point_batch, const LossWeights& weights,
                         uint64_t seed) {
  FitResult result;
  result.nets_hash_before = nets.param_hash();

  OutfitAvatar avatar = base_avatar;
  avatar.geo_features.setZero();
  avatar.geo_grads.setZero();

  Stage2Frame frame;
  frame.avatar_index = 0;
  frame.pose = scan.pose;
  frame.gt = sample_surface(scan.mesh, std::max<long>(base_avatar.point_count(), 1024),
                            hash_combine(seed, 0x917));
  frame.gt_index = std::make_shared<GridNN>(frame.gt.points);
  frame.maps = std::make_shared<RenderedPoseMaps>(
      render_pose_maps(avatar, skeleton, scan.pose, nets.cfg.image_size, nets.cfg.tilt));

  {
    PredictedCloud start = predict(avatar, nets, skeleton, scan.pose, frame.maps.get());
    result.initial_point_loss = loss_point(start.points, frame.gt, *frame.gt_index);
  }

  nn::AdamOptimizer geo_opt(avatar.feature_segments(), nn::AdamParams{.lr = lr});
  for (long step = 0; step < steps; ++step) {
    Rng rng(hash_combine(seed, uint64_t(step) + 0x5000));
    std::vector<long> subset = sample_subset(avatar.point_count(), point_batch, rng);
    stage2_step_gradients(avatar, avatar.geo_grads, nets, skeleton, frame, subset, weights);
    geo_opt.step();
  }

  PredictedCloud fitted = predict(avatar, nets, skeleton, scan.pose, frame.maps.get());
  result.final_point_loss = loss_point(fitted.points, frame.gt, *frame.gt_index);
  result.features = avatar.geo_features;
  result.nets_hash_after = nets.param_hash();
  return result;
}

}  // namespace fite
