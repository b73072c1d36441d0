#pragma once

// JSON (de)serialization for configs; shared by the checkpoint format and
// the CLI. Key order is fixed so emitted documents are stable byte-for-byte.

#include <string>

#include <json.hpp>

#include "sthar/data.hpp"
#include "sthar/models.hpp"
#include "sthar/training.hpp"

namespace sthar {

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json synth_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synth_spec_from_json(const nlohmann::json& j);

}  // namespace sthar
