// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Cross-task importance accumulation and importance-guided model merging.
// Per skill unit, the merge picks one of four rules depending on whether the
// unit is important to the accumulated past, to the current task, to both,
// or to neither.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tasl/localization.hpp"
#include "tasl/model.hpp"
#include "tasl/partition.hpp"

namespace tasl {

struct CumulativeImportance {
    std::vector<double> scores;  // [0, 1] per unit
    int upto_task = 0;           // number of tasks folded in
};

struct ImportanceFlags {
    std::vector<bool> flags;

    std::size_t count() const;
    std::size_t size() const { return flags.size(); }
    bool operator[](std::size_t i) const { return flags[i]; }
};

/// Min-max rescaling to [0, 1]. A constant map rescales to all 0.5 so that
/// quantile selection still has a deterministic outcome.
UnitScoreMap normalize(const UnitScoreMap& map);

/// Equal-weight initialization from the first task's scores.
CumulativeImportance init_cumulative(const UnitScoreMap& first);

/// beta * Norm(prev) + (1 - beta) * Norm(current).
CumulativeImportance accumulate(const CumulativeImportance& prev, const UnitScoreMap& current,
                                double beta);

/// Flags the ceil(fraction * n) highest-scoring units; ties at the cut go to
/// the lowest unit id.
ImportanceFlags threshold(std::span<const double> scores, double quantile_fraction);

enum class MergeCase : std::uint8_t {
    BlendImportantBoth = 1,  // gamma * prev + (1 - gamma) * cur
    KeepPrev = 2,            // important only to past tasks
    TakeCur = 3,             // important only to the current task
    AverageNeither = 4,      // plain mean
};

struct MergeCaseRow {
    std::size_t unit_id = 0;
    std::string label;
    bool prev_flag = false;
    bool cur_flag = false;
    MergeCase merge_case = MergeCase::AverageNeither;
};

struct MergeResult {
    Model model;
    std::vector<MergeCaseRow> report;
};

/// Fine-grained per-unit merge of the accumulated model and the current
/// task's model.
MergeResult merge_fine(const Model& prev, const Model& cur, const SkillPartition& partition,
                       const ImportanceFlags& prev_flags, const ImportanceFlags& cur_flags,
                       double gamma);

/// lambda * prev + (1 - lambda) * cur over every parameter.
Model merge_coarse(const Model& prev, const Model& cur, double lambda);

/// running <- decay * running + (1 - decay) * cur, applied in place.
void ema_weights_update(Model& running, const Model& cur, double decay);

} // namespace tasl
