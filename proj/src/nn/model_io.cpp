#include <fstream>

#include <json.hpp>

#include "elfdd/core/error.hpp"
#include "elfdd/nn/model.hpp"
#include "elfdd/nn/serialize.hpp"
#include "elfdd/tensor/checkpoint.hpp"

namespace elfdd::nn {

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"family", to_string(c.family)},
          {"depth", c.depth},
          {"width", c.width},
          {"norm", to_string(c.norm)},
          {"num_classes", c.num_classes},
          {"input_shape", c.input_shape},
          {"dtype", to_string(c.dtype)},
          {"input_mean", c.input_mean},
          {"input_std", c.input_std}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.family = parse_family(j.at("family").get<std::string>());
    c.depth = j.at("depth").get<int>();
    c.width = j.at("width").get<int>();
    c.norm = parse_norm(j.at("norm").get<std::string>());
    c.num_classes = j.at("num_classes").get<int>();
    c.input_shape = j.at("input_shape").get<std::array<std::int64_t, 3>>();
    c.dtype = j.value("dtype", std::string("f32")) == "f64" ? DType::F64 : DType::F32;
    c.input_mean = j.at("input_mean").get<std::vector<double>>();
    c.input_std = j.at("input_std").get<std::vector<double>>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model config JSON: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModelState& model) {
  NamedTensors tensors;
  for (const auto& [name, t] : model.params) tensors.emplace_back(name, t);
  for (const auto& [layer, s] : model.bn_stats) {
    tensors.emplace_back("running/" + layer + ".mean", s.mean);
    tensors.emplace_back("running/" + layer + ".var", s.var);
  }
  save_checkpoint(path, tensors);
  nlohmann::json side = {{"config", config_to_json(model.config)},
                         {"bn_momentum", model.bn_momentum},
                         {"eps", model.eps},
                         {"bn_layers", nlohmann::json::array()},
                         {"param_count", param_count(model.config)},
                         {"hash", hex64(hash_tensors(tensors))}};
  for (const auto& [layer, s] : model.bn_stats) side["bn_layers"].push_back(layer);
  std::ofstream out(path.string() + ".json");
  if (!out) throw FormatError("cannot write " + path.string() + ".json");
  out << side.dump(2) << "\n";
}

ModelState load_model(const std::filesystem::path& path) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw FormatError("missing model sidecar " + path.string() + ".json");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad model sidecar " + path.string() + ".json: " + e.what());
  }
  ModelState m;
  m.config = config_from_json(side.at("config"));
  m.bn_momentum = side.value("bn_momentum", 0.1);
  m.eps = side.value("eps", 1e-5);
  const auto tensors = load_checkpoint(path);
  std::map<std::string, Tensor> by_name(tensors.begin(), tensors.end());
  for (const auto& [name, shape] : param_shapes(m.config)) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint " + path.string() + " lacks parameter " + name);
    if (it->second.shape() != shape) {
      throw FormatError("parameter " + name + " has shape " + shape_string(it->second.shape()) +
                        ", config expects " + shape_string(shape));
    }
    m.params.emplace(name, it->second.to(m.config.dtype));
  }
  if (m.config.norm == Norm::BatchNorm) {
    for (const auto& layer : side.at("bn_layers")) {
      const auto l = layer.get<std::string>();
      m.bn_stats[l] = {by_name.at("running/" + l + ".mean").to(m.config.dtype),
                       by_name.at("running/" + l + ".var").to(m.config.dtype)};
    }
  }
  return m;
}

}  // namespace elfdd::nn
