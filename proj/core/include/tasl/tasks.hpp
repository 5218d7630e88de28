// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic continual-task generators. Three kinds of domain shift:
// rotated 2-D Gaussian blobs, feature-permuted blobs, and a toy slot-filling
// stream of token sequences with shared plus task-specific labels.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tasl/batch.hpp"

namespace tasl {

enum class TaskKind { RotatedGaussians, PermutedFeatures, SlotFillToy };

struct TaskSpec {
    int task_id = 0;
    TaskKind kind = TaskKind::RotatedGaussians;
    Batch train, val, test;
    std::map<std::string, std::string> meta;  // kind-specific, for inspection
};

struct TaskStream {
    std::vector<TaskSpec> tasks;     // in visit order
    std::vector<int> order;          // order[pos] = original task id at this position
    std::uint64_t seed = 0;
    TaskKind kind = TaskKind::RotatedGaussians;

    std::size_t size() const { return tasks.size(); }
    /// Feature count or sequence length of the inputs.
    std::size_t input_width() const;
    /// Number of distinct class / label / token ids a model must cover.
    std::size_t model_classes() const;
};

struct StreamConfig {
    TaskKind kind = TaskKind::RotatedGaussians;
    std::size_t task_count = 5;
    std::size_t train_size = 200;
    std::size_t val_size = 50;
    std::size_t test_size = 100;
    std::size_t classes = 0;   // 0 = kind default (2 rotated, 4 permuted)
    std::size_t features = 8;  // permuted-features dimensionality
};

TaskStream gen_stream(const StreamConfig& config, std::uint64_t seed);

/// Same tasks visited in permuted order; task ids are retained.
TaskStream reorder(const TaskStream& stream, std::span<const int> order);

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view s);

// slot-fill-toy geometry, shared with docs and tests
inline constexpr std::size_t kSlotVocab = 30;
inline constexpr std::size_t kSlotSeqLen = 8;
inline constexpr std::size_t kSlotSharedLabels = 4;  // label 0 is the filler label
inline constexpr std::size_t kSlotTaskLabels = 2;

} // namespace tasl
