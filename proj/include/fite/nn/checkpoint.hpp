#pragma once

#include <map>
#include <string>
#include <vector>

#include "fite/nn/module.hpp"

namespace fite {
namespace nn {

// Named parameter segments as little-endian 32-bit floats behind a versioned
// magic, with a free-form architecture header string.
void save_checkpoint(const std::string& path, const std::string& header, Module& module);
void save_checkpoint(const std::string& path, const std::string& header,
                     const std::vector<ParamSegment>& segments);

struct Checkpoint {
  std::string header;
  std::map<std::string, std::vector<float>> segments;
};

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into the module; throws on any name/size mismatch.
void load_into(const Checkpoint& ckpt, Module& module);
void load_into(const Checkpoint& ckpt, const std::vector<ParamSegment>& segments);

}  // namespace nn
}  // namespace fite
