// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// CSV import/export for matrices, metrics, scores, and reports. Every file
// carries a header row; rows are ordered by unit id or task position;
// doubles are written in shortest round-trip form so a parse gives back the
// exact bit pattern.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tasl/consolidation.hpp"
#include "tasl/localization.hpp"
#include "tasl/metrics.hpp"
#include "tasl/partition.hpp"

namespace tasl {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

void write_matrix_csv(const std::filesystem::path& path, const AccuracyMatrix& matrix);
AccuracyMatrix read_matrix_csv(const std::filesystem::path& path);

void write_metrics_csv(const std::filesystem::path& path, const CLReport& report);

void write_trajectory_csv(const std::filesystem::path& path, std::span<const double> trajectory);

void write_partition_csv(const std::filesystem::path& path, const SkillPartition& partition);

void write_importance_csv(const std::filesystem::path& path, const SkillPartition& partition,
                          const UnitScoreMap& raw, const UnitScoreMap& normalized,
                          const ImportanceFlags& flags);

/// The unit scores of an importance CSV (raw_score column), id-ordered.
UnitScoreMap read_importance_csv(const std::filesystem::path& path);

void write_merge_report_csv(const std::filesystem::path& path,
                            std::span<const MergeCaseRow> report);

void write_aggregate_csv(const std::filesystem::path& path, const AggregateReport& aggregate);

/// One row per completed run of an experiment grid.
struct RunRecord {
    std::size_t order_index = 0;
    std::vector<int> order;
    std::uint64_t seed = 0;
    CLReport report;
};

void write_runs_csv(const std::filesystem::path& path, std::span<const RunRecord> records);

} // namespace tasl
