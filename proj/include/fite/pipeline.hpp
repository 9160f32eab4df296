#pragma once

#include <string>

#include <vector>

#include "fite/config.hpp"
#include "fite/kinematics.hpp"

namespace fite {

// Subcommand bodies behind the CLI. Each returns a process exit status and
// writes a config echo + run manifest next to its outputs. Logs go to stderr,
// data to files only.
int cmd_gen_data(PipelineConfig cfg, const std::string& out_dir);
int cmd_skinning(PipelineConfig cfg, const std::string& body_path,
                 const std::string& weights_path, const std::string& out_path);
int cmd_stage1(PipelineConfig cfg, const std::string& manifest_path,
               const std::string& field_path, const std::string& out_dir);
int cmd_posemap(PipelineConfig cfg, const std::string& template_path,
                const std::string& skeleton_path, const std::string& pose_path,
                const std::string& out_dir);
int cmd_stage2(PipelineConfig cfg, const std::string& manifest_path,
               const std::string& field_path, const std::string& templates_dir,
               const std::string& out_dir);
int cmd_animate(PipelineConfig cfg, const std::string& avatar_dir, const std::string& nets_path,
                const std::string& skeleton_path, const std::string& pose_path,
                const std::string& out_ply);
int cmd_fit_novel(PipelineConfig cfg, const std::string& scan_dir, const std::string& avatar_dir,
                  const std::string& nets_path, const std::string& skeleton_path,
                  const std::string& out_dir);
int cmd_eval(PipelineConfig cfg, const std::string& pred_dir, const std::string& manifest_path,
             const std::string& out_path);
int cmd_selftest(PipelineConfig cfg);

// Deterministic pose set used by gen-data: frame 0 is the zero pose, the rest
// bend elbows/knees with small shoulder/hip variation.
std::vector<Pose> make_dataset_poses(int joint_count, long count, double max_bend,
                                     uint64_t seed);

}  // namespace fite
