#pragma once

// Text formats: models, matrices and design dumps as JSON.

#include <filesystem>
#include <string>

#include "cohsync/agent_model.hpp"
#include "cohsync/simulation.hpp"

namespace cohsync::io {

/// Invalid or unreadable configuration input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {"A": [[...]], "B": [[...]], "C": [[...]], "E": [[...]]}, row-major. E may
/// be omitted (no disturbance channel).
model::AgentModel parse_model(const std::string& json_text);
model::AgentModel read_model_file(const std::filesystem::path& path);
std::string model_to_json(const model::AgentModel& model);

/// Design constants with every number printed to round-trip exactly.
std::string design_to_json(const sim::Design& design);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file in the same directory, then renames.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cohsync::io
