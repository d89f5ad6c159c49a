#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mlnn/multilevel.hpp"

namespace mlnn {

/// Invalid experiment file. `what()` is prefixed with "origin:line: " when the
/// problem can be pinned to a line.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct ExperimentConfig {
    std::string problem;
    std::map<std::string, double> problem_parameters;
    std::uint64_t seed = 0;
    std::string output_dir;
    MultilevelOptions options;
    std::vector<LevelConfig> levels;
};

/// Parses the sectioned key = value format described in docs/config_format.md.
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text that parses back to the same configuration.
std::string render_config(const ExperimentConfig& config);

} // namespace mlnn
