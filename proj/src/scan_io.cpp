#include <filesystem>
#include <fstream>
#include <sstream>

#include "fite/errors.hpp"
#include "fite/scan.hpp"

namespace fite {

namespace fs = std::filesystem;

void save_frame(const std::string& dir, const ScanFrame& frame) {
  fs::create_directories(dir);
  PlyData scan;
  scan.positions = frame.cloud.points;
  scan.normals = frame.cloud.normals;
  save_ply(dir + "/scan.ply", scan);
  save_obj(dir + "/mesh.obj", frame.mesh);
  save_pose(dir + "/pose.txt", frame.pose);
  std::ofstream f(dir + "/outfit.txt");
  if (!f) throw IoError("cannot write outfit file in " + dir);
  f << "kind " << outfit_kind_name(frame.outfit_kind) << "\n";
  f << "id " << frame.outfit_id << "\n";
}

ScanFrame load_frame(const std::string& dir) {
  ScanFrame frame;
  PlyData scan = load_ply(dir + "/scan.ply");
  frame.cloud.points = scan.positions;
  frame.cloud.normals = scan.normals;
  frame.mesh = load_obj(dir + "/mesh.obj");
  frame.pose = load_pose(dir + "/pose.txt");
  std::ifstream f(dir + "/outfit.txt");
  if (!f) throw IoError("cannot read outfit file in " + dir);
  std::string key;
  while (f >> key) {
    if (key == "kind") {
      std::string name;
      f >> name;
      frame.outfit_kind = parse_outfit_kind(name);
    } else if (key == "id") {
      f >> frame.outfit_id;
    } else {
      throw IoError("outfit file: unknown key '" + key + "'");
    }
  }
  return frame;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write manifest: " + path);
  f << "body " << manifest.body_path << "\n";
  f << "weights " << manifest.weights_path << "\n";
  f << "skeleton " << manifest.skeleton_path << "\n";
  f << "frames " << manifest.frames.size() << "\n";
  for (const FrameEntry& e : manifest.frames) {
    f << "frame " << e.index << " " << e.dir << " " << (e.train ? "train" : "test") << " "
      << e.outfit_id << " " << outfit_kind_name(e.outfit_kind) << "\n";
  }
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read manifest: " + path);
  DatasetManifest m;
  std::string key;
  while (f >> key) {
    if (key == "body") {
      f >> m.body_path;
    } else if (key == "weights") {
      f >> m.weights_path;
    } else if (key == "skeleton") {
      f >> m.skeleton_path;
    } else if (key == "frames") {
      size_t n;
      f >> n;
      m.frames.reserve(n);
    } else if (key == "frame") {
      FrameEntry e;
      std::string split, kind;
      f >> e.index >> e.dir >> split >> e.outfit_id >> kind;
      if (split != "train" && split != "test") throw IoError("manifest: bad split '" + split + "'");
      e.train = split == "train";
      e.outfit_kind = parse_outfit_kind(kind);
      m.frames.push_back(e);
    } else {
      throw IoError("manifest: unknown key '" + key + "'");
    }
  }
  return m;
}

std::string manifest_dir(const std::string& manifest_path) {
  fs::path p(manifest_path);
  fs::path dir = p.parent_path();
  return dir.empty() ? std::string(".") : dir.string();
}

}  // namespace fite
