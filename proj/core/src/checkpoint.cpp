#include "mrolab/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mrolab {

using nlohmann::json;

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  json doc;
  doc["format"] = "mrolab-checkpoint";
  doc["version"] = 1;
  doc["kind"] = ckpt.kind;
  doc["config"] = ckpt.config;
  doc["arrays"] = ckpt.arrays;
  doc["optimizer"] = {{"step", ckpt.params.step()}};
  json params = json::array();
  for (const auto& e : ckpt.params.entries()) {
    params.push_back({{"name", e.name},
                      {"shape", e.value.shape()},
                      {"values", std::vector<double>(e.value.values().begin(), e.value.values().end())},
                      {"adam_m", e.first_moment},
                      {"adam_v", e.second_moment}});
  }
  doc["params"] = std::move(params);
  return doc.dump();
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  if (doc.value("format", "") != "mrolab-checkpoint") throw std::runtime_error("checkpoint: unrecognized format");
  if (doc.value("version", 0) != 1) throw std::runtime_error("checkpoint: unsupported version");
  Checkpoint ckpt;
  ckpt.kind = doc.at("kind").get<std::string>();
  ckpt.config = doc.at("config").get<std::map<std::string, std::string>>();
  ckpt.arrays = doc.at("arrays").get<std::map<std::string, std::vector<double>>>();
  for (const auto& p : doc.at("params")) {
    auto shape = p.at("shape").get<tensor::Shape>();
    auto values = p.at("values").get<std::vector<double>>();
    const auto name = p.at("name").get<std::string>();
    ckpt.params.add(name, tensor::Tensor::from(shape, std::move(values)));
    auto& entry = ckpt.params.entries().back();
    entry.first_moment = p.at("adam_m").get<std::vector<double>>();
    entry.second_moment = p.at("adam_v").get<std::vector<double>>();
    if (entry.first_moment.size() != entry.value.size() || entry.second_moment.size() != entry.value.size()) {
      throw std::runtime_error("checkpoint: optimizer moments for '" + name + "' do not match parameter shape");
    }
  }
  ckpt.params.set_step(doc.at("optimizer").at("step").get<long>());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out << checkpoint_to_string(ckpt) << '\n';
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace mrolab
