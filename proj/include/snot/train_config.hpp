#pragma once

#include <filesystem>
#include <string>

#include "snot/measures.hpp"
#include "snot/schedule.hpp"
#include "snot/trainer.hpp"
#include <json.hpp>

namespace snot {

struct RunSpec {
  TrainConfig config;
  DatasetSpec source;
  DatasetSpec target;
};

// Parsing rejects unknown keys so typos surface as ConfigError instead of silent defaults.
// ambient_dim falls back to default_dim when the key is absent and default_dim >= 1.
DatasetSpec parse_dataset(const nlohmann::json& j, Side default_side, int default_dim = 0);
NoiseSchedule parse_schedule(const nlohmann::json& j, const TrainConfig& config);
RunSpec parse_run_spec(const nlohmann::json& j);

nlohmann::json to_json(const DatasetSpec& spec);
nlohmann::json to_json(const NoiseSchedule& schedule);
nlohmann::json to_json(const RunSpec& run);

// Reads and parses a JSON document; parse errors carry the byte offset.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace snot
