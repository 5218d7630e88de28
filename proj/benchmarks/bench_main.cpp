// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the training-loop hot paths: forward/backward of both
// architectures, the importance update, the fine-grained merge, and stream
// generation.

#include <benchmark/benchmark.h>

#include "tasl/consolidation.hpp"
#include "tasl/localization.hpp"
#include "tasl/model.hpp"
#include "tasl/partition.hpp"
#include "tasl/rng.hpp"
#include "tasl/tasks.hpp"

using namespace tasl;

namespace {

Model desk_mlp(std::uint64_t seed) {
    ArchDescriptor arch;
    arch.kind = ArchKind::Mlp;
    arch.layer_sizes = {2, 32, 32, 2};
    arch.seed = seed;
    return Model(arch);
}

Model desk_transformer(std::uint64_t seed) {
    ArchDescriptor arch;
    arch.kind = ArchKind::TinyTransformer;
    arch.d_model = 16;
    arch.heads = 2;
    arch.ff_dim = 32;
    arch.blocks = 1;
    arch.classes = kSlotVocab;
    arch.seed = seed;
    return Model(arch);
}

Batch feature_batch(std::size_t rows) {
    Batch b;
    b.rows = rows;
    b.cols = 2;
    rng::Engine g = rng::engine(1, "bench-features");
    b.features.resize(rows * 2);
    for (double& f : b.features) f = rng::normal(g);
    b.targets.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) b.targets[r] = static_cast<int>(r % 2);
    return b;
}

Batch token_batch(std::size_t rows) {
    Batch b;
    b.rows = rows;
    b.cols = kSlotSeqLen;
    rng::Engine g = rng::engine(2, "bench-tokens");
    b.tokens.resize(rows * b.cols);
    b.targets.resize(rows * b.cols);
    for (int& t : b.tokens) t = static_cast<int>(rng::index(g, kSlotVocab));
    for (int& t : b.targets) t = static_cast<int>(rng::index(g, kSlotVocab));
    return b;
}

void bm_mlp_forward_backward(benchmark::State& state) {
    Model model = desk_mlp(1);
    const Batch batch = feature_batch(16);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward_loss(batch));
        model.backward();
    }
}

void bm_transformer_forward_backward(benchmark::State& state) {
    Model model = desk_transformer(1);
    const Batch batch = token_batch(16);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward_loss(batch));
        model.backward();
    }
}

void bm_importance_update(benchmark::State& state) {
    Model model = desk_mlp(1);
    const Batch batch = feature_batch(16);
    model.forward_loss(batch);
    model.backward();
    ImportanceState tracker(model.param_count(), 0.85, 0.85);
    for (auto _ : state) tracker.update(model);
}

void bm_training_step(benchmark::State& state) {
    Model model = desk_mlp(1);
    const Batch data = feature_batch(200);
    const SkillPartition partition = build_partition(model, PartitionScheme::PerTensor);
    LocalizationParams params;
    params.steps = 1;
    rng::Engine g = rng::engine(3, "batch");
    for (auto _ : state)
        benchmark::DoNotOptimize(run_localization(model, data, params, partition, g));
}

void bm_merge_fine(benchmark::State& state) {
    const Model prev = desk_mlp(1);
    const Model cur = desk_mlp(2);
    const SkillPartition partition = build_partition(prev, PartitionScheme::PerTensor);
    ImportanceFlags pf, cf;
    pf.flags.assign(partition.size(), false);
    cf.flags.assign(partition.size(), false);
    pf.flags[0] = cf.flags[0] = true;
    pf.flags[1] = cf.flags[2] = true;
    for (auto _ : state)
        benchmark::DoNotOptimize(merge_fine(prev, cur, partition, pf, cf, 0.7));
}

void bm_gen_stream(benchmark::State& state) {
    StreamConfig cfg;  // 5-task rotated-gaussians defaults
    for (auto _ : state) benchmark::DoNotOptimize(gen_stream(cfg, 1));
}

BENCHMARK(bm_mlp_forward_backward);
BENCHMARK(bm_transformer_forward_backward);
BENCHMARK(bm_importance_update);
BENCHMARK(bm_training_step);
BENCHMARK(bm_merge_fine);
BENCHMARK(bm_gen_stream);

} // namespace

BENCHMARK_MAIN();
