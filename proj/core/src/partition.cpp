// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/partition.hpp"

#include <map>

#include "tasl/error.hpp"

namespace tasl {

std::string_view to_string(PartitionScheme scheme) {
    return scheme == PartitionScheme::PerTensor ? "per-tensor" : "per-layer-group";
}

PartitionScheme partition_scheme_from_string(std::string_view s) {
    if (s == "per-tensor") return PartitionScheme::PerTensor;
    if (s == "per-layer-group") return PartitionScheme::PerLayerGroup;
    throw DataError("unknown partition scheme: " + std::string(s));
}

std::size_t SkillPartition::total_params() const {
    std::size_t n = 0;
    for (const SkillUnit& u : units) n += u.param_count;
    return n;
}

namespace {

// Group label for the per-layer-group scheme. Transformers group each block
// into attention / mlp / norms; embed and head stand alone; mlps group per
// layer.
std::string group_label(const Model& model, const std::string& tensor_name) {
    if (model.arch().kind == ArchKind::Mlp)
        return tensor_name.substr(0, tensor_name.find('.'));
    if (tensor_name == "embed" || tensor_name == "head") return tensor_name;
    const auto dot = tensor_name.find('.');
    const std::string block = tensor_name.substr(0, dot);
    const std::string rest = tensor_name.substr(dot + 1);
    if (rest.rfind("attn.", 0) == 0) return block + ".attention";
    if (rest.rfind("mlp.", 0) == 0) return block + ".mlp";
    return block + ".norms";
}

} // namespace

SkillPartition build_partition(const Model& model, PartitionScheme scheme) {
    if (model.tensors().empty()) throw DataError("cannot partition an empty model");
    SkillPartition part;
    part.scheme = scheme;
    if (scheme == PartitionScheme::PerTensor) {
        for (const ParamTensor& t : model.tensors()) {
            if (t.name.empty()) throw DataError("cannot partition an unnamed tensor");
            SkillUnit u;
            u.id = part.units.size();
            u.label = t.name;
            u.member_tensors = {t.name};
            u.param_count = t.size();
            part.units.push_back(std::move(u));
        }
    } else {
        // preserve first-appearance order of groups
        std::vector<std::string> order;
        std::map<std::string, SkillUnit> groups;
        for (const ParamTensor& t : model.tensors()) {
            if (t.name.empty()) throw DataError("cannot partition an unnamed tensor");
            const std::string label = group_label(model, t.name);
            auto [it, inserted] = groups.try_emplace(label);
            if (inserted) {
                it->second.label = label;
                order.push_back(label);
            }
            it->second.member_tensors.push_back(t.name);
            it->second.param_count += t.size();
        }
        for (const std::string& label : order) {
            SkillUnit u = std::move(groups[label]);
            u.id = part.units.size();
            part.units.push_back(std::move(u));
        }
    }
    return part;
}

UnitSlice unit_slice(const SkillPartition& partition, std::size_t unit_id, const Model& model) {
    if (unit_id >= partition.units.size()) throw DataError("skill unit id out of range");
    const SkillUnit& unit = partition.units[unit_id];
    UnitSlice slice;
    for (const std::string& name : unit.member_tensors) {
        const ParamTensor& t = model.tensors()[model.tensor_index(name)];
        slice.values.emplace_back(t.values);
        slice.grads.emplace_back(t.grad);
        slice.param_count += t.size();
    }
    return slice;
}

} // namespace tasl
