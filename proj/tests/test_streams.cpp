// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "tasl/error.hpp"
#include "tasl/localization.hpp"
#include "tasl/model.hpp"
#include "tasl/partition.hpp"
#include "tasl/rng.hpp"
#include "tasl/tasks.hpp"

using namespace tasl;

namespace {

// per-class empirical feature means of a batch
std::vector<std::vector<double>> class_means(const Batch& b, std::size_t classes) {
    std::vector<std::vector<double>> mu(classes, std::vector<double>(b.cols, 0.0));
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t r = 0; r < b.rows; ++r) {
        const auto y = static_cast<std::size_t>(b.targets[r]);
        ++counts[y];
        for (std::size_t c = 0; c < b.cols; ++c) mu[y][c] += b.features[r * b.cols + c];
    }
    for (std::size_t y = 0; y < classes; ++y)
        for (double& v : mu[y]) v /= static_cast<double>(counts[y]);
    return mu;
}

std::vector<std::size_t> parse_permutation(const std::string& csv) {
    std::vector<std::size_t> perm;
    std::size_t at = 0;
    while (at < csv.size()) {
        std::size_t end = csv.find(',', at);
        if (end == std::string::npos) end = csv.size();
        perm.push_back(std::stoul(csv.substr(at, end - at)));
        at = end + 1;
    }
    return perm;
}

} // namespace

TEST_CASE("stream generation is deterministic in the seed") {
    StreamConfig cfg;
    cfg.kind = TaskKind::RotatedGaussians;
    cfg.task_count = 3;
    cfg.train_size = 40;
    cfg.val_size = 10;
    cfg.test_size = 20;
    const TaskStream a = gen_stream(cfg, 7);
    const TaskStream b = gen_stream(cfg, 7);
    REQUIRE(a.size() == 3);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a.tasks[k].train.features == b.tasks[k].train.features);
        CHECK(a.tasks[k].train.targets == b.tasks[k].train.targets);
        CHECK(a.tasks[k].test.features == b.tasks[k].test.features);
        CHECK(a.tasks[k].meta == b.tasks[k].meta);
    }
    const TaskStream c = gen_stream(cfg, 8);
    CHECK(a.tasks[0].train.features != c.tasks[0].train.features);
}

TEST_CASE("split sizes and shapes match the config") {
    StreamConfig cfg;
    cfg.kind = TaskKind::PermutedFeatures;
    cfg.task_count = 2;
    cfg.train_size = 30;
    cfg.val_size = 12;
    cfg.test_size = 18;
    cfg.features = 6;
    const TaskStream s = gen_stream(cfg, 1);
    CHECK(s.input_width() == 6);
    CHECK(s.model_classes() == 4);  // permuted-features default
    for (const TaskSpec& t : s.tasks) {
        CHECK(t.train.rows == 30);
        CHECK(t.val.rows == 12);
        CHECK(t.test.rows == 18);
        CHECK(t.train.cols == 6);
    }
}

TEST_CASE("rotated blobs sit at the expected angles") {
    StreamConfig cfg;
    cfg.kind = TaskKind::RotatedGaussians;
    cfg.task_count = 3;
    cfg.train_size = 400;
    const TaskStream s = gen_stream(cfg, 5);

    CHECK(s.tasks[0].meta.at("rotation_degrees") == "0");
    CHECK(s.tasks[1].meta.at("rotation_degrees") == "60");
    CHECK(s.tasks[2].meta.at("rotation_degrees") == "120");

    // task k rotates the two class means by k * 60 degrees on a radius-2 circle
    const double pi = std::acos(-1.0);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto mu = class_means(s.tasks[k].train, 2);
        for (std::size_t y = 0; y < 2; ++y) {
            const double ang = pi * static_cast<double>(y) + static_cast<double>(k) * pi / 3.0;
            CHECK(std::abs(mu[y][0] - 2.0 * std::cos(ang)) < 0.1);
            CHECK(std::abs(mu[y][1] - 2.0 * std::sin(ang)) < 0.1);
        }
    }
}

TEST_CASE("the first permuted-features task is unpermuted and later ones shuffle it") {
    StreamConfig cfg;
    cfg.kind = TaskKind::PermutedFeatures;
    cfg.task_count = 3;
    cfg.train_size = 800;
    cfg.features = 8;
    const TaskStream s = gen_stream(cfg, 11);

    const auto perm0 = parse_permutation(s.tasks[0].meta.at("permutation"));
    for (std::size_t i = 0; i < perm0.size(); ++i) CHECK(perm0[i] == i);

    // shared base problem: task-k column c carries base column perm[c], so its
    // per-class mean should match task 0's mean at that column (up to noise)
    const auto base_mu = class_means(s.tasks[0].train, 4);
    for (std::size_t k = 1; k < 3; ++k) {
        const auto perm = parse_permutation(s.tasks[k].meta.at("permutation"));
        REQUIRE(perm.size() == 8);
        CHECK(std::set<std::size_t>(perm.begin(), perm.end()).size() == 8);
        const auto mu = class_means(s.tasks[k].train, 4);
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t c = 0; c < 8; ++c)
                CHECK(std::abs(mu[y][c] - base_mu[y][perm[c]]) < 0.3);
    }
}

TEST_CASE("slot-fill labels follow the token inventory") {
    StreamConfig cfg;
    cfg.kind = TaskKind::SlotFillToy;
    cfg.task_count = 4;
    cfg.train_size = 60;
    cfg.val_size = 10;
    cfg.test_size = 20;
    const TaskStream s = gen_stream(cfg, 3);
    CHECK(s.input_width() == kSlotSeqLen);
    CHECK(s.model_classes() == kSlotVocab);

    const int specific_last = 9 + 2 * 4 - 1;
    for (const TaskSpec& task : s.tasks) {
        const int own_first = 9 + 2 * task.task_id;
        bool saw_own = false;
        for (const Batch* split : {&task.train, &task.val, &task.test}) {
            REQUIRE(split->tokens.size() == split->rows * kSlotSeqLen);
            for (std::size_t i = 0; i < split->tokens.size(); ++i) {
                const int tok = split->tokens[i];
                const int label = split->targets[i];
                CHECK(tok >= 0);
                CHECK(tok < static_cast<int>(kSlotVocab));
                if (tok >= 1 && tok <= 6) {
                    CHECK(label == 1 + (tok - 1) / 2);
                } else if (tok >= 9 && tok <= specific_last) {
                    CHECK(label == static_cast<int>(kSlotSharedLabels) + (tok - 9));
                    // task-specific tokens only appear in their own task
                    CHECK(tok >= own_first);
                    CHECK(tok <= own_first + 1);
                    saw_own = true;
                } else {
                    CHECK(label == 0);
                }
            }
        }
        CHECK(saw_own);
    }
}

TEST_CASE("a rotated task is learnable from its own training split") {
    StreamConfig cfg;
    cfg.kind = TaskKind::RotatedGaussians;
    cfg.task_count = 2;
    cfg.train_size = 200;
    cfg.test_size = 100;
    const TaskStream s = gen_stream(cfg, 9);

    ArchDescriptor arch;
    arch.kind = ArchKind::Mlp;
    arch.layer_sizes = {2, 16, 2};
    arch.seed = 1;
    Model model(arch);

    const SkillPartition partition = build_partition(model, PartitionScheme::PerTensor);
    LocalizationParams params;
    params.steps = 300;
    rng::Engine g = rng::engine(1, "batch");
    LocalizationResult res = run_localization(model, s.tasks[0].train, params, partition, g);

    res.model.forward_loss(s.tasks[0].test);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < s.tasks[0].test.rows; ++r)
        hits += res.model.predictions()[r] == s.tasks[0].test.targets[r];
    CHECK(static_cast<double>(hits) / static_cast<double>(s.tasks[0].test.rows) >= 0.9);
}

TEST_CASE("reordering permutes the visit order but keeps task identity") {
    StreamConfig cfg;
    cfg.kind = TaskKind::RotatedGaussians;
    cfg.task_count = 3;
    cfg.train_size = 20;
    cfg.val_size = 5;
    cfg.test_size = 10;
    const TaskStream s = gen_stream(cfg, 13);
    const std::vector<int> order = {2, 0, 1};
    const TaskStream r = reorder(s, order);

    CHECK(r.order == order);
    for (std::size_t pos = 0; pos < 3; ++pos) {
        const TaskSpec& orig = s.tasks[static_cast<std::size_t>(order[pos])];
        CHECK(r.tasks[pos].task_id == orig.task_id);
        CHECK(r.tasks[pos].train.features == orig.train.features);
        CHECK(r.tasks[pos].test.targets == orig.test.targets);
    }

    SUBCASE("orders select by task id, so the identity restores the stream") {
        const TaskStream back = reorder(r, std::vector<int>{0, 1, 2});
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(back.tasks[k].task_id == s.tasks[k].task_id);
            CHECK(back.tasks[k].train.features == s.tasks[k].train.features);
        }
    }
    SUBCASE("a non-permutation is rejected") {
        CHECK_THROWS_AS(reorder(s, std::vector<int>{0, 0, 1}), DataError);
        CHECK_THROWS_AS(reorder(s, std::vector<int>{0, 1}), DataError);
        CHECK_THROWS_AS(reorder(s, std::vector<int>{0, 1, 3}), DataError);
    }
}

TEST_CASE("invalid stream configs are rejected") {
    StreamConfig cfg;
    cfg.task_count = 0;
    CHECK_THROWS_AS(gen_stream(cfg, 1), DataError);

    cfg = {};
    cfg.train_size = 0;
    CHECK_THROWS_AS(gen_stream(cfg, 1), DataError);

    cfg = {};
    cfg.classes = 1;
    CHECK_THROWS_AS(gen_stream(cfg, 1), DataError);

    cfg = {};
    cfg.kind = TaskKind::SlotFillToy;
    cfg.task_count = 11;  // token inventory holds at most 10 task-specific pairs
    CHECK_THROWS_AS(gen_stream(cfg, 1), DataError);
    cfg.task_count = 10;
    CHECK_NOTHROW(gen_stream(cfg, 1));
}

TEST_CASE("kind names round-trip") {
    for (TaskKind kind : {TaskKind::RotatedGaussians, TaskKind::PermutedFeatures,
                          TaskKind::SlotFillToy})
        CHECK(task_kind_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(task_kind_from_string("mystery"), DataError);
}
