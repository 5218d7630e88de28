// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value experiment configuration. Parsing rejects unknown keys;
// serialization echoes every key (defaults included) so a run directory
// always contains the fully resolved configuration it was produced from.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tasl/runner.hpp"
#include "tasl/tasks.hpp"

namespace tasl {

struct ExperimentConfig {
    RunConfig run;        // run.seed is overwritten per grid entry
    StreamConfig stream;
    std::vector<std::vector<int>> orders;  // visit orders; default identity
    std::vector<std::uint64_t> seeds = {1};
};

/// Parses `text`, applies defaults for absent keys, resolves the default
/// order, and validates ranges. Throws DataError on unknown or malformed
/// keys.
ExperimentConfig parse_experiment_config(std::string_view text);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical echo: every key, fixed order, shortest round-trip numbers.
/// parse(serialize(c)) reproduces `c` exactly.
std::string serialize(const ExperimentConfig& config);

} // namespace tasl
