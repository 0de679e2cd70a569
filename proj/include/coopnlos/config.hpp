#pragma once

#include <filesystem>
#include <string>

#include "coopnlos/harness.hpp"

namespace coopnlos {

/// JSON experiment description. Top-level keys mirror `ScenarioConfig`
/// (degrees and mph get `_deg` / `_mph` suffixes); `noise` and `sat_noise`
/// hold mixture models; `filter` and `experiment` hold the remaining knobs.
/// Unknown keys raise ConfigError.
ExperimentSpec parse_experiment(const std::string& json_text);
ExperimentSpec load_experiment(const std::filesystem::path& path);

MixtureNoiseModel parse_noise(const std::string& json_text, const MixtureNoiseModel& defaults);

}  // namespace coopnlos
