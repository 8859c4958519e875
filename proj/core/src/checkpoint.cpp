// SPDX-License-Identifier: Apache-2.0
#include "rddc/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "rddc/errors.hpp"

namespace rddc {

using json = nlohmann::ordered_json;

void write_checkpoint(const RddcModel& model, std::ostream& out) {
  const ModelConfig& c = model.config();
  json doc;
  doc["format"] = "rddc-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["config"] = {{"input_size", c.input_size},
                   {"gru_units", c.gru_units},
                   {"fc1_units", c.fc1_units},
                   {"clusters", c.clusters}};
  doc["batch_norm"] = {{"momentum", model.bn.momentum},
                       {"eps", model.bn.eps},
                       {"running_mean", model.bn.running_mean},
                       {"running_var", model.bn.running_var}};
  json tensors = json::array();
  for (const auto& [name, t] : model.named_parameters()) {
    auto data = t.data();
    tensors.push_back({{"name", name},
                       {"shape", t.shape().dims()},
                       {"data", std::vector<double>(data.begin(), data.end())}});
  }
  doc["tensors"] = std::move(tensors);
  out << doc.dump() << '\n';
}

RddcModel read_checkpoint(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format") != "rddc-checkpoint") throw FormatError("not an rddc checkpoint");
    int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const json& cfg = doc.at("config");
    ModelConfig config;
    config.input_size = cfg.at("input_size").get<std::size_t>();
    config.gru_units = cfg.at("gru_units").get<std::size_t>();
    config.fc1_units = cfg.at("fc1_units").get<std::size_t>();
    config.clusters = cfg.at("clusters").get<std::size_t>();
    RddcModel model = RddcModel::init(config, 0);

    const json& bn = doc.at("batch_norm");
    model.bn.momentum = bn.at("momentum").get<double>();
    model.bn.eps = bn.at("eps").get<double>();
    auto mean = bn.at("running_mean").get<std::vector<double>>();
    auto var = bn.at("running_var").get<std::vector<double>>();
    if (mean.size() != model.bn.dim() || var.size() != model.bn.dim()) {
      throw FormatError("batch norm statistics have the wrong length");
    }
    model.bn.running_mean = std::move(mean);
    model.bn.running_var = std::move(var);

    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : model.named_parameters()) by_name.emplace(name, t);
    std::size_t restored = 0;
    for (const json& entry : doc.at("tensors")) {
      auto name = entry.at("name").get<std::string>();
      auto it = by_name.find(name);
      if (it == by_name.end()) throw FormatError("unknown tensor '" + name + "'");
      auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (Shape(shape) != it->second.shape()) {
        throw FormatError("tensor '" + name + "' has shape " + Shape(shape).str() + ", expected " +
                          it->second.shape().str());
      }
      auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != it->second.numel()) throw FormatError("tensor '" + name + "' has the wrong size");
      std::copy(data.begin(), data.end(), it->second.mutable_data().begin());
      ++restored;
    }
    if (restored != by_name.size()) throw FormatError("checkpoint is missing tensors");
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const RddcModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(model, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

RddcModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace rddc
