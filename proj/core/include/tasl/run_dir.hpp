// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment execution over an (order x seed) grid with all artifacts
// written to an output directory:
//
//   out/
//     config.ini              fully resolved configuration echo
//     runs.csv                one summary row per run
//     aggregate.csv           mean and standard error over all runs
//     run_o<i>_s<seed>/       per-run artifacts
//       matrix.csv metrics.csv task1_trajectory.csv partition.csv
//       importance_task<k>.csv merge_task<k>.csv model.ckpt
//
// Nothing written here depends on wall-clock time, so a rerun from the
// echoed config reproduces every file byte for byte.

#pragma once

#include <filesystem>
#include <vector>

#include "tasl/config.hpp"
#include "tasl/csv.hpp"
#include "tasl/metrics.hpp"
#include "tasl/runner.hpp"
#include "tasl/tasks.hpp"

namespace tasl {

struct ExperimentResult {
    std::vector<RunRecord> records;
    AggregateReport aggregate;
};

std::string run_subdir_name(std::size_t order_index, std::uint64_t seed);

/// Writes one run's CSVs and final checkpoint into `dir` (created if absent).
void write_run_outputs(const std::filesystem::path& dir, const RunResult& result);

/// Runs every (order, seed) combination and writes the directory layout
/// above. Returns the per-run reports and their aggregate.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& out_dir);

/// Serializes a stream for inspection: stream.jsonl (one task description
/// per line) plus task<t>_<split>.csv files with the examples.
void write_stream_dir(const std::filesystem::path& dir, const TaskStream& stream);

} // namespace tasl
