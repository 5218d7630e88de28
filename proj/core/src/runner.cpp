// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/runner.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "tasl/error.hpp"
#include "tasl/rng.hpp"

namespace tasl {

std::string_view to_string(Method method) {
    switch (method) {
        case Method::Tasl: return "tasl";
        case Method::Finetune: return "finetune";
        case Method::Replay: return "replay";
        case Method::WeightEnsemble: return "weight-ensemble";
        case Method::Ema: return "ema";
    }
    return "tasl";
}

Method method_from_string(std::string_view s) {
    if (s == "tasl") return Method::Tasl;
    if (s == "finetune") return Method::Finetune;
    if (s == "replay") return Method::Replay;
    if (s == "weight-ensemble") return Method::WeightEnsemble;
    if (s == "ema") return Method::Ema;
    throw DataError("unknown method: " + std::string(s));
}

ArchDescriptor arch_for(const TaskStream& stream, const RunConfig& config) {
    if (stream.tasks.empty()) throw DataError("cannot size a model for an empty stream");
    ArchDescriptor arch;
    arch.seed = config.seed;
    if (stream.kind == TaskKind::SlotFillToy) {
        arch.kind = ArchKind::TinyTransformer;
        arch.d_model = config.d_model;
        arch.heads = config.heads;
        arch.ff_dim = config.ff_dim;
        arch.blocks = config.blocks;
        arch.classes = stream.model_classes();
    } else {
        arch.kind = ArchKind::Mlp;
        arch.layer_sizes.push_back(stream.input_width());
        for (std::size_t h : config.hidden_sizes) arch.layer_sizes.push_back(h);
        arch.layer_sizes.push_back(stream.model_classes());
    }
    arch.validate();
    return arch;
}

double evaluate(Model& model, const Batch& data) {
    if (data.empty()) throw DataError("cannot evaluate on an empty split");
    model.forward_loss(data);
    const std::vector<int>& pred = model.predictions();
    std::size_t correct = 0;
    if (data.token_input()) {
        for (std::size_t r = 0; r < data.rows; ++r) {
            bool all = true;
            for (std::size_t c = 0; c < data.cols; ++c)
                if (pred[r * data.cols + c] != data.targets[r * data.cols + c]) {
                    all = false;
                    break;
                }
            correct += all ? 1 : 0;
        }
    } else {
        for (std::size_t r = 0; r < data.rows; ++r)
            correct += pred[r] == data.targets[r] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(data.rows);
}

std::vector<double> first_task_trajectory(const AccuracyMatrix& matrix) {
    std::vector<double> out(matrix.task_count);
    for (std::size_t k = 0; k < matrix.task_count; ++k) out[k] = matrix.at(k, 0);
    return out;
}

namespace {

// Memory for the replay baseline: up to `per_task` uniformly sampled
// training rows per finished task.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t per_task) : per_task_(per_task) {}

    void store(const Batch& train, rng::Engine& g) {
        const std::size_t take = std::min(per_task_, train.rows);
        if (take == 0) return;
        std::vector<std::size_t> idx = rng::sample_without_replacement(g, train.rows, take);
        std::sort(idx.begin(), idx.end());
        stored_.push_back(train.subset(idx));
    }

    // Current task data plus every stored memory, as one uniform pool.
    Batch pool_with(const Batch& current) const {
        Batch pool = current;
        for (const Batch& m : stored_) {
            pool.rows += m.rows;
            pool.features.insert(pool.features.end(), m.features.begin(), m.features.end());
            pool.tokens.insert(pool.tokens.end(), m.tokens.begin(), m.tokens.end());
            pool.targets.insert(pool.targets.end(), m.targets.begin(), m.targets.end());
        }
        return pool;
    }

private:
    std::size_t per_task_;
    std::vector<Batch> stored_;
};

void validate(const TaskStream& stream, const RunConfig& config) {
    if (stream.tasks.empty()) throw DataError("a run needs at least one task");
    if (config.steps_per_task < 1) throw DataError("steps_per_task must be positive");
    if (config.batch_size < 1) throw DataError("batch_size must be positive");
    if (!(config.quantile_fraction > 0.0) || config.quantile_fraction > 1.0)
        throw DataError("quantile_fraction must lie in (0, 1]");
    for (auto [name, v] : {std::pair<const char*, double>{"alpha1", config.alpha1},
                           {"alpha2", config.alpha2},
                           {"beta", config.beta},
                           {"gamma", config.gamma},
                           {"lambda", config.lambda},
                           {"ema_decay", config.ema_decay}})
        if (v < 0.0 || v > 1.0) throw DataError(std::string(name) + " must lie in [0, 1]");
}

} // namespace

RunResult run(const TaskStream& stream, const RunConfig& config) {
    validate(stream, config);
    const std::size_t task_count = stream.size();

    Model carried(arch_for(stream, config));  // f-hat (tasl / weight-ensemble) or plain f
    SkillPartition partition = build_partition(carried, config.partition_scheme);
    Model shadow = carried;  // ema running average; unused by other methods
    CumulativeImportance cumulative;
    ReplayBuffer buffer(config.replay_memory);
    AccuracyMatrix matrix(task_count);
    std::vector<TaskArtifacts> artifacts(task_count);

    LocalizationParams train_params;
    train_params.steps = config.steps_per_task;
    train_params.batch_size = config.batch_size;
    train_params.lr = config.lr;
    train_params.alpha1 = config.alpha1;
    train_params.alpha2 = config.alpha2;
    train_params.variant = config.scoring;

    for (std::size_t pos = 0; pos < task_count; ++pos) {
        const TaskSpec& task = stream.tasks[pos];
        TaskArtifacts& art = artifacts[pos];
        art.task_id = task.task_id;
        try {
            rng::Engine batch_rng = rng::engine(config.seed, "batch", pos);
            std::function<void(const Model&)> after_step;
            if (config.method == Method::Ema)
                after_step = [&](const Model& m) { ema_weights_update(shadow, m, config.ema_decay); };

            LocalizationResult trained =
                config.method == Method::Replay
                    ? run_localization(carried, buffer.pool_with(task.train), train_params,
                                       partition, batch_rng)
                    : run_localization(carried, task.train, train_params, partition, batch_rng,
                                       after_step);

            art.raw = trained.scores;
            art.raw.task_id = task.task_id;
            art.normalized = normalize(art.raw);
            art.flags = threshold(art.raw.scores, config.quantile_fraction);

            Model* evaluated = &carried;
            switch (config.method) {
                case Method::Finetune:
                    carried = std::move(trained.model);
                    break;
                case Method::Replay: {
                    carried = std::move(trained.model);
                    rng::Engine store_rng = rng::engine(config.seed, "replay", pos);
                    buffer.store(task.train, store_rng);
                    break;
                }
                case Method::Ema:
                    carried = std::move(trained.model);
                    evaluated = &shadow;
                    break;
                case Method::WeightEnsemble:
                    // The first task has no prior task model, so there is
                    // nothing to average with; blending starts at task two.
                    carried = pos == 0 ? std::move(trained.model)
                                       : merge_coarse(carried, trained.model, config.lambda);
                    break;
                case Method::Tasl:
                    if (pos == 0) {
                        carried = std::move(trained.model);
                        cumulative = init_cumulative(art.raw);
                    } else {
                        const ImportanceFlags prev_flags =
                            threshold(cumulative.scores, config.quantile_fraction);
                        MergeResult merged = merge_fine(carried, trained.model, partition,
                                                        prev_flags, art.flags, config.gamma);
                        carried = std::move(merged.model);
                        art.merge_report = std::move(merged.report);
                        cumulative = accumulate(cumulative, art.raw, config.beta);
                    }
                    art.cumulative = cumulative.scores;
                    break;
            }

            for (std::size_t i = 0; i < task_count; ++i)
                matrix.at(pos, i) = evaluate(*evaluated, stream.tasks[i].test);
        } catch (const NumericError& e) {
            throw NumericError("task " + std::to_string(pos + 1) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("task " + std::to_string(pos + 1) + ": " + e.what());
        }
    }

    RunResult result{config.method == Method::Ema ? std::move(shadow) : std::move(carried),
                     std::move(partition), std::move(matrix), CLReport{}, std::move(artifacts)};
    result.report = cl_metrics(result.matrix);
    return result;
}

} // namespace tasl
