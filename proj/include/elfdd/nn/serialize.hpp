#pragma once

#include <json.hpp>

#include "elfdd/nn/model.hpp"

namespace elfdd::nn {

nlohmann::json config_to_json(const ModelConfig& c);
/// Throws FormatError on missing fields, ConfigError on invalid values.
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace elfdd::nn
