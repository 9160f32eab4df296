#pragma once

#include <string>
#include <vector>

#include "fite/types.hpp"

namespace fite {

// Flat key-value pipeline configuration. Unknown keys are rejected; missing
// keys keep their documented defaults. Every run echoes the full resolved
// configuration next to its outputs.
struct PipelineConfig {
  long seed = 1;
  long threads = 0;  // 0 = hardware concurrency

  // synthetic body
  long body_mesh_res = 96;
  double body_falloff = 0.17;

  // scan generation
  long data_frames = 10;  // per outfit
  long data_cloud_samples = 16384;
  long data_scan_mesh_res = 96;
  double data_max_bend = 0.55;
  double data_wrinkle_freq = 12.0;
  double data_wrinkle_amp = 0.03;
  double data_outfit_offset = 0.012;
  long data_test_frames = 2;
  std::string data_outfits = "tight,skirt";

  // skinning diffusion
  long skin_res = 64;
  double skin_lambda_point = 1e4;
  double skin_lambda_grad = 1e2;
  double skin_lambda_reg = 1.0;
  long skin_samples_per_vertex = 10;
  double skin_cg_tol = 1e-6;
  long skin_cg_max_iters = 10000;

  // stage one
  long stage1_steps = 5000;
  long stage1_batch = 512;
  double stage1_lr = 1e-3;
  long stage1_hidden = 128;
  long stage1_layers = 6;
  double stage1_near_sigma = 0.05;
  long stage1_mc_res = 128;
  long stage1_anchor_samples = 20000;

  // pose maps + shared nets
  long pm_size = 128;
  double pm_tilt_deg = 15.0;
  long nn_c_pose = 16;
  long nn_c_geom = 64;
  long nn_unet_base = 8;

  // stage two
  long stage2_steps = 2400;  // total optimizer steps; epochs = ceil(steps / train frames)
  long stage2_point_batch = 1024;
  long stage2_points = 8192;  // template points per avatar
  double stage2_lr = 1e-3;
  double stage2_lr_geo = 1e-2;
  double loss_point_w = 1e4;
  double loss_normal_w = 1.0;
  double loss_correction_reg = 1e3;
  double loss_residual_reg = 1e3;
  double loss_feature_reg = 1.0;

  // novel-scan fitting
  long fit_steps = 200;
  double fit_lr = 1e-2;
  long fit_point_batch = 512;

  void apply_preset(const std::string& name);    // "default" or "tiny"
  void load_file(const std::string& path);       // rejects unknown keys
  void set_key(const std::string& key, const std::string& value);
  std::string echo() const;                      // sorted key = value lines
  uint64_t config_hash() const;
  void save_echo(const std::string& path) const;
};

// Run manifest: config hash + seed + version, written next to outputs.
void write_run_manifest(const std::string& path, const PipelineConfig& cfg,
                        const std::string& subcommand);

extern const char* kPipelineVersion;

}  // namespace fite
