// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "tasl/error.hpp"
#include "tasl/model.hpp"
#include "tasl/partition.hpp"

using namespace tasl;

namespace {

Model make_mlp(std::vector<std::size_t> sizes, std::uint64_t seed = 1) {
    ArchDescriptor arch;
    arch.kind = ArchKind::Mlp;
    arch.layer_sizes = std::move(sizes);
    arch.seed = seed;
    return Model(arch);
}

Model make_transformer(std::size_t blocks, std::uint64_t seed = 1) {
    ArchDescriptor arch;
    arch.kind = ArchKind::TinyTransformer;
    arch.d_model = 8;
    arch.heads = 2;
    arch.ff_dim = 16;
    arch.blocks = blocks;
    arch.classes = 12;
    arch.seed = seed;
    return Model(arch);
}

} // namespace

TEST_CASE("mlp [4,8,2] per tensor has 4 units") {
    Model m = make_mlp({4, 8, 2});
    const SkillPartition p = build_partition(m, PartitionScheme::PerTensor);
    REQUIRE(p.size() == 4);
    CHECK(p.units[0].label == "layer0.weight");
    CHECK(p.units[0].param_count == 32);
    CHECK(p.units[1].label == "layer0.bias");
    CHECK(p.units[1].param_count == 8);
    CHECK(p.units[2].label == "layer1.weight");
    CHECK(p.units[2].param_count == 16);
    CHECK(p.units[3].label == "layer1.bias");
    CHECK(p.units[3].param_count == 2);
}

TEST_CASE("single-block transformer per tensor has the 10 named units") {
    Model m = make_transformer(1);
    const SkillPartition p = build_partition(m, PartitionScheme::PerTensor);
    REQUIRE(p.size() == 10);
    const char* expected[] = {"embed",          "block0.attn.q", "block0.attn.k",
                              "block0.attn.v",  "block0.attn.o", "block0.mlp.wi",
                              "block0.mlp.wo",  "block0.norm1",  "block0.norm2",
                              "head"};
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(p.units[i].id == i);
        CHECK(p.units[i].label == expected[i]);
    }
}

TEST_CASE("two-block transformer per layer group has 8 units") {
    Model m = make_transformer(2);
    const SkillPartition p = build_partition(m, PartitionScheme::PerLayerGroup);
    REQUIRE(p.size() == 8);
    const char* expected[] = {"embed",          "block0.attention", "block0.mlp", "block0.norms",
                              "block1.attention", "block1.mlp",     "block1.norms", "head"};
    for (std::size_t i = 0; i < 8; ++i) CHECK(p.units[i].label == expected[i]);
    // the attention group holds q, k, v, o
    CHECK(p.units[1].member_tensors.size() == 4);
    CHECK(p.units[3].member_tensors.size() == 2);  // norm1 + norm2
}

TEST_CASE("every parameter belongs to exactly one unit") {
    for (PartitionScheme scheme : {PartitionScheme::PerTensor, PartitionScheme::PerLayerGroup}) {
        Model m = make_transformer(2);
        const SkillPartition p = build_partition(m, scheme);
        CHECK(p.total_params() == m.param_count());
        std::set<std::string> seen;
        for (const SkillUnit& u : p.units) {
            CHECK(u.param_count >= 1);
            std::size_t count = 0;
            for (const std::string& name : u.member_tensors) {
                CHECK(seen.insert(name).second);  // disjoint
                count += m.tensors()[m.tensor_index(name)].size();
            }
            CHECK(count == u.param_count);
        }
        CHECK(seen.size() == m.tensors().size());  // exhaustive
    }
}

TEST_CASE("partitions are stable across models built from the same descriptor") {
    Model a = make_mlp({3, 7, 2}, 1);
    Model b = make_mlp({3, 7, 2}, 999);  // different weights, same naming
    const SkillPartition pa = build_partition(a, PartitionScheme::PerTensor);
    const SkillPartition pb = build_partition(b, PartitionScheme::PerTensor);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa.units[i].id == pb.units[i].id);
        CHECK(pa.units[i].label == pb.units[i].label);
        CHECK(pa.units[i].member_tensors == pb.units[i].member_tensors);
        CHECK(pa.units[i].param_count == pb.units[i].param_count);
    }
}

TEST_CASE("unit slices view the right parameters and cover the model once") {
    Model m = make_transformer(1);
    m.forward_loss([] {
        Batch b;
        b.rows = 2;
        b.cols = 3;
        b.tokens = {1, 2, 3, 4, 5, 6};
        b.targets = {0, 1, 2, 3, 4, 5};
        return b;
    }());
    m.backward();

    const SkillPartition p = build_partition(m, PartitionScheme::PerTensor);

    // an 8x16 matrix unit exposes 128 parameters
    const UnitSlice wi = unit_slice(p, 5, m);
    CHECK(p.units[5].label == "block0.mlp.wi");
    CHECK(wi.param_count == 8 * 16);

    // summing every slice equals summing the whole model (values and grads)
    double whole_v = 0.0, whole_g = 0.0;
    for (const ParamTensor& t : m.tensors()) {
        whole_v = std::accumulate(t.values.begin(), t.values.end(), whole_v);
        whole_g = std::accumulate(t.grad.begin(), t.grad.end(), whole_g);
    }
    double sliced_v = 0.0, sliced_g = 0.0;
    std::size_t visited = 0;
    for (std::size_t u = 0; u < p.size(); ++u) {
        const UnitSlice s = unit_slice(p, u, m);
        for (std::span<const double> vs : s.values)
            sliced_v = std::accumulate(vs.begin(), vs.end(), sliced_v);
        for (std::span<const double> gs : s.grads)
            sliced_g = std::accumulate(gs.begin(), gs.end(), sliced_g);
        visited += s.param_count;
    }
    CHECK(visited == m.param_count());
    CHECK(std::abs(whole_v - sliced_v) < 1e-12);
    CHECK(std::abs(whole_g - sliced_g) < 1e-12);
}

TEST_CASE("errors: out-of-range unit id") {
    Model m = make_mlp({2, 2});
    const SkillPartition p = build_partition(m, PartitionScheme::PerTensor);
    CHECK_THROWS_AS(unit_slice(p, p.size(), m), DataError);
}
