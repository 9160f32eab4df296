#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "fite/errors.hpp"
#include "fite/mesh.hpp"

namespace fite {

void save_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write OBJ: " + path);
  char buf[160];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    f << buf;
  }
  for (const auto& t : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    f << buf;
  }
}

TriMesh load_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read OBJ: " + path);
  TriMesh mesh;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z;
      ss >> x >> y >> z;
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::array<int, 3> t;
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        ss >> tok;
        // accept "i", "i/j", "i/j/k"
        t[k] = std::atoi(tok.c_str()) - 1;
      }
      mesh.faces.push_back(t);
    }
  }
  mesh.validate_indices();
  return mesh;
}

// ---- PLY ----

namespace {

template <typename T>
void write_raw(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& f) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw IoError("PLY: unexpected end of file");
  return v;
}

}  // namespace

void save_ply(const std::string& path, const PlyData& data) {
  const size_t n = data.positions.size();
  if (!data.normals.empty() && data.normals.size() != n)
    throw DimensionError("PLY: normals length mismatch");
  if (data.weights.size() != 0 && size_t(data.weights.rows()) != n)
    throw DimensionError("PLY: weights row mismatch");

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write PLY: " + path);
  f << "ply\nformat binary_little_endian 1.0\n";
  f << "element vertex " << n << "\n";
  f << "property float x\nproperty float y\nproperty float z\n";
  if (!data.normals.empty()) f << "property float nx\nproperty float ny\nproperty float nz\n";
  for (int j = 0; j < data.weights.cols(); ++j) f << "property float w_" << j << "\n";
  f << "element face " << data.faces.size() << "\n";
  f << "property list uchar int vertex_indices\n";
  f << "end_header\n";

  for (size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) write_raw(f, float(data.positions[i][k]));
    if (!data.normals.empty())
      for (int k = 0; k < 3; ++k) write_raw(f, float(data.normals[i][k]));
    for (int j = 0; j < data.weights.cols(); ++j) write_raw(f, float(data.weights(i, j)));
  }
  for (const auto& t : data.faces) {
    write_raw(f, uint8_t(3));
    for (int k = 0; k < 3; ++k) write_raw(f, int32_t(t[k]));
  }
  if (!f) throw IoError("PLY: write failed: " + path);
}

PlyData load_ply(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read PLY: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "ply") throw IoError("PLY: bad magic");
  if (!std::getline(f, line) || line != "format binary_little_endian 1.0")
    throw IoError("PLY: unsupported format");

  long n_vertex = -1, n_face = 0;
  std::vector<std::string> vertex_props;
  std::string current_element;
  while (std::getline(f, line)) {
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "comment") continue;
    if (tag == "element") {
      std::string name;
      long count;
      ss >> name >> count;
      current_element = name;
      if (name == "vertex")
        n_vertex = count;
      else if (name == "face")
        n_face = count;
      else
        throw IoError("PLY: unsupported element '" + name + "'");
    } else if (tag == "property") {
      if (current_element == "vertex") {
        std::string type, name;
        ss >> type >> name;
        if (type != "float") throw IoError("PLY: only float vertex properties supported");
        vertex_props.push_back(name);
      }
      // face list property assumed uchar/int
    }
  }
  if (n_vertex < 0) throw IoError("PLY: missing vertex element");

  int ix = -1, inx = -1, nw = 0;
  for (size_t k = 0; k < vertex_props.size(); ++k) {
    if (vertex_props[k] == "x") ix = int(k);
    if (vertex_props[k] == "nx") inx = int(k);
    if (vertex_props[k].rfind("w_", 0) == 0) nw++;
  }
  if (ix < 0) throw IoError("PLY: missing position properties");

  PlyData out;
  out.positions.resize(n_vertex);
  if (inx >= 0) out.normals.resize(n_vertex);
  if (nw > 0) out.weights.resize(n_vertex, nw);
  std::vector<float> row(vertex_props.size());
  for (long i = 0; i < n_vertex; ++i) {
    f.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
    if (!f) throw IoError("PLY: truncated vertex data");
    out.positions[i] = Vec3(row[ix], row[ix + 1], row[ix + 2]);
    if (inx >= 0) out.normals[i] = Vec3(row[inx], row[inx + 1], row[inx + 2]);
    for (int j = 0; j < nw; ++j) {
      // w_j follow in declaration order after fixed fields
      size_t base = vertex_props.size() - nw;
      out.weights(i, j) = row[base + j];
    }
  }
  for (long t = 0; t < n_face; ++t) {
    uint8_t cnt = read_raw<uint8_t>(f);
    if (cnt != 3) throw IoError("PLY: non-triangle face");
    std::array<int, 3> tri;
    for (int k = 0; k < 3; ++k) tri[k] = read_raw<int32_t>(f);
    out.faces.push_back(tri);
  }
  return out;
}

}  // namespace fite
