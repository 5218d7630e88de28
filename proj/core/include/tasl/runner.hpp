// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Sequential experiment loop: visit the tasks of a stream in order, train on
// each, consolidate (method-dependent), and evaluate the full accuracy
// matrix. Baselines share the training loop so that, for a fixed seed, every
// method sees the identical minibatch sequence.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "tasl/consolidation.hpp"
#include "tasl/localization.hpp"
#include "tasl/metrics.hpp"
#include "tasl/model.hpp"
#include "tasl/partition.hpp"
#include "tasl/tasks.hpp"

namespace tasl {

enum class Method { Tasl, Finetune, Replay, WeightEnsemble, Ema };

std::string_view to_string(Method method);
Method method_from_string(std::string_view s);

struct RunConfig {
    Method method = Method::Tasl;
    ScoreVariant scoring = ScoreVariant::SmoothedTimesUncertainty;
    PartitionScheme partition_scheme = PartitionScheme::PerTensor;

    std::size_t steps_per_task = 300;
    std::size_t batch_size = 16;
    double lr = 0.1;

    double alpha1 = 0.85;            // sensitivity smoothing
    double alpha2 = 0.85;            // uncertainty smoothing
    double beta = 0.7;               // cumulative importance mixing
    double gamma = 0.7;              // both-important blend weight
    double quantile_fraction = 0.2;  // top fraction of units marked important
    double lambda = 0.7;             // weight-ensemble blend weight
    double ema_decay = 0.99;         // ema baseline shadow decay
    std::size_t replay_memory = 20;  // stored samples per past task

    // mlp head count is taken from the stream; hidden layers from here
    std::vector<std::size_t> hidden_sizes = {32, 32};
    // tiny-transformer dimensions (slot-fill-toy streams)
    std::size_t d_model = 16;
    std::size_t heads = 2;
    std::size_t ff_dim = 32;
    std::size_t blocks = 1;

    std::uint64_t seed = 1;
};

/// Architecture matching the stream's input width and label space.
ArchDescriptor arch_for(const TaskStream& stream, const RunConfig& config);

/// Fraction of correctly classified rows; token batches count a row only
/// when every position in the sequence is labeled correctly.
double evaluate(Model& model, const Batch& data);

/// Per-task byproducts of a run, in visit order.
struct TaskArtifacts {
    int task_id = -1;                      // original id of the task trained at this position
    UnitScoreMap raw;                      // unit importance measured while training this task
    UnitScoreMap normalized;               // min-max rescaling of `raw`
    ImportanceFlags flags;                 // top-quantile flags of `raw`
    std::vector<double> cumulative;        // cross-task scores after this task (tasl only)
    std::vector<MergeCaseRow> merge_report;  // fine-grained merge decisions (tasl, task >= 2)
};

struct RunResult {
    Model final_model;  // the model evaluation used after the last task
    SkillPartition partition;
    AccuracyMatrix matrix;
    CLReport report;
    std::vector<TaskArtifacts> artifacts;
};

/// Runs `config.method` over the stream. Throws DataError/NumericError with
/// the failing 1-based task position prepended.
RunResult run(const TaskStream& stream, const RunConfig& config);

/// Accuracy on the task visited first, after each training stage: column
/// zero of the matrix.
std::vector<double> first_task_trajectory(const AccuracyMatrix& matrix);

} // namespace tasl
