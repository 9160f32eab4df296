#include "fite/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "fite/errors.hpp"

namespace fite {
namespace nn {

namespace {
constexpr char kMagic[8] = {'F', 'I', 'T', 'E', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const std::string& path, const std::string& header, Module& module) {
  save_checkpoint(path, header, module.segments());
}

void save_checkpoint(const std::string& path, const std::string& header,
                     const std::vector<ParamSegment>& segs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f.write(kMagic, 8);
  auto write_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  write_u32(uint32_t(header.size()));
  f.write(header.data(), header.size());
  write_u32(uint32_t(segs.size()));
  for (auto& s : segs) {
    write_u32(uint32_t(s.name.size()));
    f.write(s.name.data(), s.name.size());
    uint64_t len = uint64_t(s.size);
    f.write(reinterpret_cast<const char*>(&len), 8);
    for (long i = 0; i < s.size; ++i) {
      float v = float(s.values[i]);
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!f) throw IoError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  auto read_u32 = [&]() {
    uint32_t v;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw IoError("checkpoint: truncated file " + path);
    return v;
  };
  Checkpoint ckpt;
  uint32_t hlen = read_u32();
  ckpt.header.resize(hlen);
  f.read(ckpt.header.data(), hlen);
  uint32_t nseg = read_u32();
  for (uint32_t i = 0; i < nseg; ++i) {
    uint32_t nlen = read_u32();
    std::string name(nlen, '\0');
    f.read(name.data(), nlen);
    uint64_t len;
    f.read(reinterpret_cast<char*>(&len), 8);
    if (!f) throw IoError("checkpoint: truncated file " + path);
    std::vector<float> vals(len);
    f.read(reinterpret_cast<char*>(vals.data()), len * 4);
    if (!f) throw IoError("checkpoint: truncated file " + path);
    ckpt.segments.emplace(std::move(name), std::move(vals));
  }
  return ckpt;
}

void load_into(const Checkpoint& ckpt, Module& module) {
  load_into(ckpt, module.segments());
}

void load_into(const Checkpoint& ckpt, const std::vector<ParamSegment>& segs) {
  if (segs.size() != ckpt.segments.size())
    throw IoError("checkpoint: segment count mismatch");
  for (const auto& s : segs) {
    auto it = ckpt.segments.find(s.name);
    if (it == ckpt.segments.end()) throw IoError("checkpoint: missing segment " + s.name);
    if (long(it->second.size()) != s.size)
      throw IoError("checkpoint: size mismatch for segment " + s.name);
    for (long i = 0; i < s.size; ++i) s.values[i] = double(it->second[i]);
  }
}

}  // namespace nn
}  // namespace fite
