// Command-line front end for the two-stage clothed-avatar pipeline:
// synthetic data generation, skinning-weight diffusion, implicit template
// training/extraction, pose-dependent point offset training, animation,
// novel-scan fitting and evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "fite/config.hpp"
#include "fite/errors.hpp"
#include "fite/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_file;
  std::string preset = "default";
  long seed = -1;     // -1: keep config value
  long threads = -1;  // -1: keep config value
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "key = value config file");
  cmd->add_option("--preset", args.preset, "parameter preset: default or tiny");
  cmd->add_option("--seed", args.seed, "global seed override");
  cmd->add_option("--threads", args.threads, "worker thread cap override");
}

fite::PipelineConfig resolve(const CommonArgs& args) {
  fite::PipelineConfig cfg;
  cfg.apply_preset(args.preset);
  if (!args.config_file.empty()) cfg.load_file(args.config_file);
  if (args.seed >= 0) cfg.seed = args.seed;
  if (args.threads >= 0) cfg.threads = args.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fite: implicit-template + point-offset clothed avatar pipeline"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out, body, weights, data, field, templates, tmpl, skeleton, pose, avatar, nets,
      scan, pred, gt;
  long res = -1;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic body and clothed scans");
  add_common(gen, common);
  gen->add_option("--out", out, "output directory")->required();

  auto* skin = app.add_subcommand("skinning", "diffuse surface weights into a volumetric field");
  add_common(skin, common);
  skin->add_option("--body", body, "body mesh (OBJ)")->required();
  skin->add_option("--weights", weights, "per-vertex weights (PLY with w_ properties)")
      ->required();
  skin->add_option("--res", res, "grid resolution per axis");
  skin->add_option("--out", out, "output field file")->required();

  auto* s1 = app.add_subcommand("stage1", "train occupancy fields and extract templates");
  add_common(s1, common);
  s1->add_option("--data", data, "dataset manifest")->required();
  s1->add_option("--field", field, "skinning field file")->required();
  s1->add_option("--out", out, "output directory")->required();

  auto* pm = app.add_subcommand("posemap", "render position maps for one pose");
  add_common(pm, common);
  pm->add_option("--template", tmpl, "template PLY with skinning weights")->required();
  pm->add_option("--skeleton", skeleton, "skeleton file")->required();
  pm->add_option("--pose", pose, "pose file")->required();
  pm->add_option("--out", out, "output directory")->required();

  auto* s2 = app.add_subcommand("stage2-train", "train shared nets and per-outfit features");
  add_common(s2, common);
  s2->add_option("--data", data, "dataset manifest")->required();
  s2->add_option("--field", field, "skinning field file")->required();
  s2->add_option("--templates", templates, "stage1 output directory")->required();
  s2->add_option("--out", out, "output directory")->required();

  auto* an = app.add_subcommand("animate", "predict the clothed point cloud for a pose");
  add_common(an, common);
  an->add_option("--avatar", avatar, "avatar bundle directory")->required();
  an->add_option("--nets", nets, "shared nets checkpoint")->required();
  an->add_option("--skeleton", skeleton, "skeleton file")->required();
  an->add_option("--pose", pose, "pose file")->required();
  an->add_option("--out", out, "output PLY")->required();

  auto* fit = app.add_subcommand("fit-novel", "fit features to a novel scan, networks frozen");
  add_common(fit, common);
  fit->add_option("--scan", scan, "scan frame directory")->required();
  fit->add_option("--avatar", avatar, "avatar bundle directory")->required();
  fit->add_option("--nets", nets, "shared nets checkpoint")->required();
  fit->add_option("--skeleton", skeleton, "skeleton file")->required();
  fit->add_option("--out", out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate predictions against ground truth");
  add_common(ev, common);
  ev->add_option("--pred", pred, "predictions directory (frame_%04d.ply)")->required();
  ev->add_option("--gt", gt, "ground-truth dataset manifest")->required();
  ev->add_option("--out", out, "report file")->required();

  auto* st = app.add_subcommand("selftest", "run gradient checks and kernel cross-checks");
  add_common(st, common);

  CLI11_PARSE(app, argc, argv);

  try {
    fite::PipelineConfig cfg = resolve(common);
    if (gen->parsed()) return fite::cmd_gen_data(cfg, out);
    if (skin->parsed()) {
      if (res > 0) cfg.skin_res = res;
      return fite::cmd_skinning(cfg, body, weights, out);
    }
    if (s1->parsed()) return fite::cmd_stage1(cfg, data, field, out);
    if (pm->parsed()) return fite::cmd_posemap(cfg, tmpl, skeleton, pose, out);
    if (s2->parsed()) return fite::cmd_stage2(cfg, data, field, templates, out);
    if (an->parsed()) return fite::cmd_animate(cfg, avatar, nets, skeleton, pose, out);
    if (fit->parsed()) return fite::cmd_fit_novel(cfg, scan, avatar, nets, skeleton, out);
    if (ev->parsed()) return fite::cmd_eval(cfg, pred, gt, out);
    if (st->parsed()) return fite::cmd_selftest(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
