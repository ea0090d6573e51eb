#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cagp/config.hpp"
#include "cagp/stability.hpp"

namespace cagp {

/// What run_experiment wrote.
struct ExperimentOutput {
  std::filesystem::path directory;
  std::vector<std::string> files;  // names relative to directory, in write order
  std::string summary;             // contents of summary.txt
};

/// Awareness modes selected by experiment.mode.
std::vector<Awareness> configured_modes(const ExperimentConfig& cfg);

/// Runs the configured scenario and writes CSVs, summary.txt, the effective
/// config and a plot script to experiment.output. Files are staged in a
/// sibling directory and moved into place only after every stage succeeded,
/// so a failed run leaves nothing behind. Output bytes depend only on the
/// config.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

}  // namespace cagp
