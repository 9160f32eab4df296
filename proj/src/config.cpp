#include "fite/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>

#include "fite/errors.hpp"

namespace fite {

const char* kPipelineVersion = "fite 1.0.0";

namespace {

using Field = std::variant<long PipelineConfig::*, double PipelineConfig::*,
                           std::string PipelineConfig::*>;

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> reg = {
      {"seed", &PipelineConfig::seed},
      {"threads", &PipelineConfig::threads},
      {"body.mesh_res", &PipelineConfig::body_mesh_res},
      {"body.falloff", &PipelineConfig::body_falloff},
      {"data.frames", &PipelineConfig::data_frames},
      {"data.cloud_samples", &PipelineConfig::data_cloud_samples},
      {"data.scan_mesh_res", &PipelineConfig::data_scan_mesh_res},
      {"data.max_bend", &PipelineConfig::data_max_bend},
      {"data.wrinkle_freq", &PipelineConfig::data_wrinkle_freq},
      {"data.wrinkle_amp", &PipelineConfig::data_wrinkle_amp},
      {"data.outfit_offset", &PipelineConfig::data_outfit_offset},
      {"data.test_frames", &PipelineConfig::data_test_frames},
      {"data.outfits", &PipelineConfig::data_outfits},
      {"skin.res", &PipelineConfig::skin_res},
      {"skin.lambda_point", &PipelineConfig::skin_lambda_point},
      {"skin.lambda_grad", &PipelineConfig::skin_lambda_grad},
      {"skin.lambda_reg", &PipelineConfig::skin_lambda_reg},
      {"skin.samples_per_vertex", &PipelineConfig::skin_samples_per_vertex},
      {"skin.cg_tol", &PipelineConfig::skin_cg_tol},
      {"skin.cg_max_iters", &PipelineConfig::skin_cg_max_iters},
      {"stage1.steps", &PipelineConfig::stage1_steps},
      {"stage1.batch", &PipelineConfig::stage1_batch},
      {"stage1.lr", &PipelineConfig::stage1_lr},
      {"stage1.hidden", &PipelineConfig::stage1_hidden},
      {"stage1.layers", &PipelineConfig::stage1_layers},
      {"stage1.near_sigma", &PipelineConfig::stage1_near_sigma},
      {"stage1.mc_res", &PipelineConfig::stage1_mc_res},
      {"stage1.anchor_samples", &PipelineConfig::stage1_anchor_samples},
      {"pm.size", &PipelineConfig::pm_size},
      {"pm.tilt_deg", &PipelineConfig::pm_tilt_deg},
      {"nn.c_pose", &PipelineConfig::nn_c_pose},
      {"nn.c_geom", &PipelineConfig::nn_c_geom},
      {"nn.unet_base", &PipelineConfig::nn_unet_base},
      {"stage2.steps", &PipelineConfig::stage2_steps},
      {"stage2.point_batch", &PipelineConfig::stage2_point_batch},
      {"stage2.points", &PipelineConfig::stage2_points},
      {"stage2.lr", &PipelineConfig::stage2_lr},
      {"stage2.lr_geo", &PipelineConfig::stage2_lr_geo},
      {"loss.point", &PipelineConfig::loss_point_w},
      {"loss.normal", &PipelineConfig::loss_normal_w},
      {"loss.correction_reg", &PipelineConfig::loss_correction_reg},
      {"loss.residual_reg", &PipelineConfig::loss_residual_reg},
      {"loss.feature_reg", &PipelineConfig::loss_feature_reg},
      {"fit.steps", &PipelineConfig::fit_steps},
      {"fit.lr", &PipelineConfig::fit_lr},
      {"fit.point_batch", &PipelineConfig::fit_point_batch},
  };
  return reg;
}

}  // namespace

void PipelineConfig::apply_preset(const std::string& name) {
  if (name == "default") return;
  if (name == "tiny") {
    body_mesh_res = 72;
    data_cloud_samples = 4096;
    data_scan_mesh_res = 72;
    data_frames = 8;
    skin_res = 32;
    stage1_steps = 2000;
    stage1_batch = 256;
    stage1_mc_res = 64;
    stage1_anchor_samples = 10000;
    pm_size = 64;
    stage2_points = 2048;
    stage2_point_batch = 512;
    stage2_steps = 500;
    fit_point_batch = 512;
    return;
  }
  throw ConfigError("unknown preset: '" + name + "'");
}

void PipelineConfig::set_key(const std::string& key, const std::string& value) {
  auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown config key: '" + key + "'");
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(this->*member)>;
        if constexpr (std::is_same_v<T, long>) {
          size_t pos = 0;
          this->*member = std::stol(value, &pos);
          if (pos != value.size()) throw ConfigError("bad integer for " + key + ": " + value);
        } else if constexpr (std::is_same_v<T, double>) {
          size_t pos = 0;
          this->*member = std::stod(value, &pos);
          if (pos != value.size()) throw ConfigError("bad number for " + key + ": " + value);
        } else {
          this->*member = value;
        }
      },
      it->second);
}

void PipelineConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config file: " + path);
  std::string line;
  long lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    set_key(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string PipelineConfig::echo() const {
  std::ostringstream out;
  char buf[128];
  for (const auto& [key, field] : registry()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<T, long>) {
            std::snprintf(buf, sizeof(buf), "%s = %ld\n", key.c_str(), this->*member);
            out << buf;
          } else if constexpr (std::is_same_v<T, double>) {
            std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key.c_str(), this->*member);
            out << buf;
          } else {
            out << key << " = " << this->*member << "\n";
          }
        },
        field);
  }
  return out.str();
}

uint64_t PipelineConfig::config_hash() const {
  std::string e = echo();
  return fnv1a(e.data(), e.size());
}

void PipelineConfig::save_echo(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write config echo: " + path);
  f << echo();
}

void write_run_manifest(const std::string& path, const PipelineConfig& cfg,
                        const std::string& subcommand) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write run manifest: " + path);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)cfg.config_hash());
  f << "subcommand " << subcommand << "\n";
  f << "version " << kPipelineVersion << "\n";
  f << "config_hash " << buf << "\n";
  f << "seed " << cfg.seed << "\n";
}

}  // namespace fite
