#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "goldmine/methods.hpp"

namespace goldmine::checkpoint {

nlohmann::json to_json(const methods::SurrogateModel& model);
methods::SurrogateModel from_json(const nlohmann::json& j);

/// Writes the model; the training log goes to a sidecar `<path>.log.json`.
void save(const methods::SurrogateModel& model, const std::filesystem::path& path);
methods::SurrogateModel load(const std::filesystem::path& path);

nlohmann::json training_log_json(const methods::TrainingLog& log);

/// Fingerprint of the network weights and scalings.
std::string weights_digest(const methods::SurrogateModel& model);

}  // namespace goldmine::checkpoint
