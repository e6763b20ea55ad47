// JSON experiment configuration: one flat file with one section per concern.
// Parsing is strict -- unknown sections or keys are errors so sweep typos
// cannot silently fall back to defaults.
#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "epgrad/harness.hpp"

namespace epgrad {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The published defaults of the synthetic continual benchmark (20-class
// blobs: 10 pretext classes for trunk pretraining, 10 continual classes in
// 5 tasks of 2).
ExperimentConfig default_config();

// Merges a JSON document over default_config(). Throws ConfigError on
// malformed JSON, unknown keys, or out-of-range values.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical JSON echo of a config (inverse of parse_config up to defaults).
nlohmann::json config_to_json(const ExperimentConfig& cfg);

}  // namespace epgrad
