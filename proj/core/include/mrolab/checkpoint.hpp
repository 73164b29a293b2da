#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mrolab/nn.hpp"

namespace mrolab {

// Model container persisted as one JSON document:
//   {"format": "mrolab-checkpoint", "version": 1, "kind": ...,
//    "config": {key: string}, "arrays": {name: [double]},
//    "optimizer": {"step": n},
//    "params": [{"name", "shape", "values", "adam_m", "adam_v"}]}
// Doubles are written in shortest round-trip form, so save/load is lossless.
struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> config;
  std::map<std::string, std::vector<double>> arrays;
  nn::ParamSet params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

}  // namespace mrolab
