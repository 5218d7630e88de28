// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tasl/error.hpp"
#include "tasl/rng.hpp"

namespace tasl {

std::string_view to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::RotatedGaussians: return "rotated-gaussians";
        case TaskKind::PermutedFeatures: return "permuted-features";
        case TaskKind::SlotFillToy: return "slot-fill-toy";
    }
    return "rotated-gaussians";
}

TaskKind task_kind_from_string(std::string_view s) {
    if (s == "rotated-gaussians") return TaskKind::RotatedGaussians;
    if (s == "permuted-features") return TaskKind::PermutedFeatures;
    if (s == "slot-fill-toy") return TaskKind::SlotFillToy;
    throw DataError("unknown task kind: " + std::string(s));
}

std::size_t TaskStream::input_width() const {
    return tasks.empty() ? 0 : tasks.front().train.cols;
}

std::size_t TaskStream::model_classes() const {
    if (kind == TaskKind::SlotFillToy) return kSlotVocab;
    std::size_t c = 0;
    for (const TaskSpec& t : tasks)
        for (int y : t.train.targets) c = std::max(c, static_cast<std::size_t>(y) + 1);
    return c;
}

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBlobRadius = 2.0;
constexpr double kBlobStd = 0.25;
constexpr double kPermutedStd = 0.5;

// Balanced labels in random order.
std::vector<int> balanced_labels(std::size_t rows, std::size_t classes, rng::Engine& g) {
    std::vector<int> labels(rows);
    for (std::size_t i = 0; i < rows; ++i) labels[i] = static_cast<int>(i % classes);
    rng::shuffle(labels, g);
    return labels;
}

Batch gaussian_split(std::span<const double> means, std::size_t dim, std::size_t classes,
                     double stddev, std::size_t rows, rng::Engine& g) {
    Batch b;
    b.rows = rows;
    b.cols = dim;
    b.targets = balanced_labels(rows, classes, g);
    b.features.resize(rows * dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* mu = means.data() + static_cast<std::size_t>(b.targets[r]) * dim;
        for (std::size_t c = 0; c < dim; ++c)
            b.features[r * dim + c] = mu[c] + stddev * rng::normal(g);
    }
    return b;
}

TaskSpec rotated_task(std::size_t k, std::size_t task_count, const StreamConfig& cfg,
                      std::size_t classes, std::uint64_t seed) {
    const double angle = static_cast<double>(k) * (kPi / static_cast<double>(task_count));
    std::vector<double> means(classes * 2);
    for (std::size_t c = 0; c < classes; ++c) {
        const double base = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(classes);
        means[c * 2] = kBlobRadius * std::cos(base + angle);
        means[c * 2 + 1] = kBlobRadius * std::sin(base + angle);
    }
    TaskSpec task;
    task.task_id = static_cast<int>(k);
    task.kind = TaskKind::RotatedGaussians;
    rng::Engine gt = rng::engine(seed, "task-train", k);
    rng::Engine gv = rng::engine(seed, "task-val", k);
    rng::Engine ge = rng::engine(seed, "task-test", k);
    task.train = gaussian_split(means, 2, classes, kBlobStd, cfg.train_size, gt);
    task.val = gaussian_split(means, 2, classes, kBlobStd, cfg.val_size, gv);
    task.test = gaussian_split(means, 2, classes, kBlobStd, cfg.test_size, ge);
    std::ostringstream deg;
    deg << (angle * 180.0 / kPi);
    task.meta["rotation_degrees"] = deg.str();
    return task;
}

TaskSpec permuted_task(std::size_t k, const StreamConfig& cfg, std::size_t classes,
                       std::uint64_t seed) {
    const std::size_t dim = cfg.features;
    // fixed base problem: class means drawn once from the stream seed
    rng::Engine gm = rng::engine(seed, "base-means");
    std::vector<double> means(classes * dim);
    for (double& m : means) m = 2.0 * rng::normal(gm);

    std::vector<std::size_t> perm(dim);
    for (std::size_t i = 0; i < dim; ++i) perm[i] = i;
    if (k > 0) {
        rng::Engine gp = rng::engine(seed, "perm", k);
        rng::shuffle(perm, gp);
    }

    TaskSpec task;
    task.task_id = static_cast<int>(k);
    task.kind = TaskKind::PermutedFeatures;
    auto make_split = [&](std::size_t rows, rng::Engine g) {
        Batch raw = gaussian_split(means, dim, classes, kPermutedStd, rows, g);
        Batch out = raw;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < dim; ++c)
                out.features[r * dim + c] = raw.features[r * dim + perm[c]];
        return out;
    };
    task.train = make_split(cfg.train_size, rng::engine(seed, "task-train", k));
    task.val = make_split(cfg.val_size, rng::engine(seed, "task-val", k));
    task.test = make_split(cfg.test_size, rng::engine(seed, "task-test", k));
    std::ostringstream p;
    for (std::size_t i = 0; i < dim; ++i) p << (i ? "," : "") << perm[i];
    task.meta["permutation"] = p.str();
    return task;
}

// Token layout for the toy slot-filling stream:
//   tokens 1..6            shared slot tokens, two per shared label 1..3
//   tokens 9+2k, 10+2k     task-k slot tokens with labels 4+2k, 5+2k
//   everything else        filler, label 0
int slot_label_for(int token, std::size_t task_count) {
    if (token >= 1 && token <= 6) return 1 + (token - 1) / 2;
    const int first_specific = 9;
    const int last_specific = first_specific + 2 * static_cast<int>(task_count) - 1;
    if (token >= first_specific && token <= last_specific)
        return static_cast<int>(kSlotSharedLabels) + (token - first_specific);
    return 0;
}

Batch slot_split(std::size_t k, std::size_t task_count, std::size_t rows, rng::Engine& g) {
    Batch b;
    b.rows = rows;
    b.cols = kSlotSeqLen;
    b.tokens.resize(rows * kSlotSeqLen);
    b.targets.resize(rows * kSlotSeqLen);
    const int own_first = 9 + 2 * static_cast<int>(k);
    const int filler_first = 9 + 2 * static_cast<int>(task_count);
    const std::size_t filler_count = kSlotVocab - static_cast<std::size_t>(filler_first);
    for (std::size_t i = 0; i < rows * kSlotSeqLen; ++i) {
        const double roll = rng::unit(g);
        int tok;
        if (roll < 0.3) {
            tok = 1 + static_cast<int>(rng::index(g, 6));  // shared slot token
        } else if (roll < 0.6) {
            tok = own_first + static_cast<int>(rng::index(g, 2));  // task-specific
        } else {
            // filler: token 0, 7, 8 or anything past the task-specific range
            const std::size_t pick = rng::index(g, filler_count + 3);
            if (pick == 0) tok = 0;
            else if (pick == 1) tok = 7;
            else if (pick == 2) tok = 8;
            else tok = filler_first + static_cast<int>(pick - 3);
        }
        b.tokens[i] = tok;
        b.targets[i] = slot_label_for(tok, task_count);
    }
    return b;
}

TaskSpec slot_task(std::size_t k, std::size_t task_count, const StreamConfig& cfg,
                   std::uint64_t seed) {
    TaskSpec task;
    task.task_id = static_cast<int>(k);
    task.kind = TaskKind::SlotFillToy;
    rng::Engine gt = rng::engine(seed, "task-train", k);
    rng::Engine gv = rng::engine(seed, "task-val", k);
    rng::Engine ge = rng::engine(seed, "task-test", k);
    task.train = slot_split(k, task_count, cfg.train_size, gt);
    task.val = slot_split(k, task_count, cfg.val_size, gv);
    task.test = slot_split(k, task_count, cfg.test_size, ge);
    task.meta["task_tokens"] = std::to_string(9 + 2 * k) + "," + std::to_string(10 + 2 * k);
    task.meta["task_labels"] =
        std::to_string(kSlotSharedLabels + 2 * k) + "," + std::to_string(kSlotSharedLabels + 2 * k + 1);
    return task;
}

} // namespace

TaskStream gen_stream(const StreamConfig& config, std::uint64_t seed) {
    if (config.task_count < 1) throw DataError("a stream needs at least one task");
    if (config.train_size < 1 || config.val_size < 1 || config.test_size < 1)
        throw DataError("split sizes must be positive");

    std::size_t classes = config.classes;
    if (classes == 0) classes = config.kind == TaskKind::PermutedFeatures ? 4 : 2;
    if (config.kind != TaskKind::SlotFillToy && classes < 2)
        throw DataError("classification tasks need at least two classes");
    if (config.kind == TaskKind::PermutedFeatures && config.features < 1)
        throw DataError("permuted-features needs at least one feature");
    if (config.kind == TaskKind::SlotFillToy &&
        9 + kSlotTaskLabels * config.task_count > kSlotVocab)
        throw DataError("too many tasks for the slot-fill token inventory");

    TaskStream stream;
    stream.seed = seed;
    stream.kind = config.kind;
    stream.order.resize(config.task_count);
    for (std::size_t k = 0; k < config.task_count; ++k) {
        stream.order[k] = static_cast<int>(k);
        switch (config.kind) {
            case TaskKind::RotatedGaussians:
                stream.tasks.push_back(rotated_task(k, config.task_count, config, classes, seed));
                break;
            case TaskKind::PermutedFeatures:
                stream.tasks.push_back(permuted_task(k, config, classes, seed));
                break;
            case TaskKind::SlotFillToy:
                stream.tasks.push_back(slot_task(k, config.task_count, config, seed));
                break;
        }
    }
    return stream;
}

TaskStream reorder(const TaskStream& stream, std::span<const int> order) {
    if (order.size() != stream.size()) throw DataError("order length does not match the stream");
    std::vector<bool> seen(order.size(), false);
    for (int o : order) {
        if (o < 0 || static_cast<std::size_t>(o) >= order.size() || seen[static_cast<std::size_t>(o)])
            throw DataError("order is not a permutation of the task ids");
        seen[static_cast<std::size_t>(o)] = true;
    }
    TaskStream out;
    out.seed = stream.seed;
    out.kind = stream.kind;
    out.order.assign(order.begin(), order.end());
    out.tasks.reserve(stream.size());
    for (int o : order) {
        for (const TaskSpec& t : stream.tasks)
            if (t.task_id == o) {
                out.tasks.push_back(t);
                break;
            }
    }
    if (out.tasks.size() != stream.size()) throw DataError("order references missing task ids");
    return out;
}

} // namespace tasl
