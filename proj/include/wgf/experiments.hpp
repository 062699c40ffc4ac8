#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wgf::experiments {

/// Known experiment names, in catalog order.
std::vector<std::string> experiment_names();

/// Built-in fully resolved default configuration for one experiment.
nlohmann::json default_config(const std::string& experiment);

/// Loads a config (a known experiment name or a JSON file path), merges it
/// over the experiment defaults, applies the optional seed override and the
/// WGF_LAB_SEED environment variable, and validates.
nlohmann::json resolve_config(const std::string& name_or_path,
                              std::optional<std::uint64_t> seed_override);

/// Runs one experiment: echoes the resolved config to out_dir/config.json,
/// then writes the experiment's CSV and SVG artifacts. Deterministic for a
/// fixed resolved config.
void run_experiment(const nlohmann::json& config, const std::filesystem::path& out_dir);

}  // namespace wgf::experiments
