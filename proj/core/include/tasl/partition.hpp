// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Decomposition of a model's parameters into named skill units, the atomic
// granularity for importance scoring and merging. Units are exhaustive and
// disjoint; unit ids follow tensor declaration order.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tasl/model.hpp"

namespace tasl {

enum class PartitionScheme { PerTensor, PerLayerGroup };

struct SkillUnit {
    std::size_t id = 0;
    std::string label;
    std::vector<std::string> member_tensors;
    std::size_t param_count = 0;
};

struct SkillPartition {
    PartitionScheme scheme = PartitionScheme::PerTensor;
    std::vector<SkillUnit> units;

    std::size_t size() const { return units.size(); }
    std::size_t total_params() const;
};

SkillPartition build_partition(const Model& model, PartitionScheme scheme);

/// Read access to one unit's parameters, one span per member tensor, in
/// declaration order.
struct UnitSlice {
    std::vector<std::span<const double>> values;
    std::vector<std::span<const double>> grads;
    std::size_t param_count = 0;
};

UnitSlice unit_slice(const SkillPartition& partition, std::size_t unit_id, const Model& model);

std::string_view to_string(PartitionScheme scheme);
PartitionScheme partition_scheme_from_string(std::string_view s);

} // namespace tasl
