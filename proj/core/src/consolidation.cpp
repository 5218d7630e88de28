// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/consolidation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tasl/error.hpp"

namespace tasl {

std::size_t ImportanceFlags::count() const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

namespace {

std::vector<double> minmax(std::span<const double> scores) {
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    if (*hi == *lo) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    const double span = *hi - *lo;
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *lo) / span;
    return out;
}

void check_same_arch(const Model& a, const Model& b) {
    if (!a.arch().same_shape(b.arch()) || a.param_count() != b.param_count())
        throw DataError("models to merge have different architectures");
}

} // namespace

UnitScoreMap normalize(const UnitScoreMap& map) {
    if (map.scores.empty()) throw DataError("cannot normalize an empty score map");
    UnitScoreMap out = map;
    out.scores = minmax(map.scores);
    out.normalized = true;
    return out;
}

CumulativeImportance init_cumulative(const UnitScoreMap& first) {
    // Scores enter the cumulative map in normalized form; ordering (and thus
    // thresholding) is unchanged, and the next accumulate() re-normalizes
    // anyway.
    CumulativeImportance cum;
    cum.scores = minmax(first.scores);
    cum.upto_task = 1;
    return cum;
}

CumulativeImportance accumulate(const CumulativeImportance& prev, const UnitScoreMap& current,
                                double beta) {
    if (prev.scores.size() != current.scores.size())
        throw DataError("cumulative and current score maps differ in length");
    if (beta < 0.0 || beta > 1.0) throw DataError("beta must lie in [0, 1]");
    const std::vector<double> p = minmax(prev.scores);
    const std::vector<double> c = minmax(current.scores);
    CumulativeImportance out;
    out.scores.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        out.scores[i] = beta * p[i] + (1.0 - beta) * c[i];
    out.upto_task = prev.upto_task + 1;
    return out;
}

ImportanceFlags threshold(std::span<const double> scores, double quantile_fraction) {
    if (scores.empty()) throw DataError("cannot threshold an empty score map");
    if (!(quantile_fraction > 0.0) || quantile_fraction > 1.0)
        throw DataError("quantile fraction must lie in (0, 1]");
    const std::size_t n = scores.size();
    const std::size_t m = static_cast<std::size_t>(
        std::ceil(quantile_fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // ties to the lowest unit id
    });
    ImportanceFlags flags;
    flags.flags.assign(n, false);
    for (std::size_t i = 0; i < m; ++i) flags.flags[order[i]] = true;
    return flags;
}

MergeResult merge_fine(const Model& prev, const Model& cur, const SkillPartition& partition,
                       const ImportanceFlags& prev_flags, const ImportanceFlags& cur_flags,
                       double gamma) {
    check_same_arch(prev, cur);
    if (prev_flags.size() != partition.size() || cur_flags.size() != partition.size())
        throw DataError("importance flags do not match the partition");
    if (partition.total_params() != prev.param_count())
        throw DataError("partition does not match the models to merge");

    MergeResult result{prev, {}};
    result.report.reserve(partition.size());
    for (const SkillUnit& unit : partition.units) {
        const bool p = prev_flags[unit.id];
        const bool c = cur_flags[unit.id];
        const MergeCase mc = p ? (c ? MergeCase::BlendImportantBoth : MergeCase::KeepPrev)
                               : (c ? MergeCase::TakeCur : MergeCase::AverageNeither);
        for (const std::string& name : unit.member_tensors) {
            const std::size_t idx = result.model.tensor_index(name);
            ParamTensor& out = result.model.tensors()[idx];
            const ParamTensor& pt = prev.tensors()[idx];
            const ParamTensor& ct = cur.tensors()[idx];
            switch (mc) {
                case MergeCase::BlendImportantBoth:
                    for (std::size_t i = 0; i < out.size(); ++i)
                        out.values[i] = gamma * pt.values[i] + (1.0 - gamma) * ct.values[i];
                    break;
                case MergeCase::KeepPrev:
                    out.values = pt.values;
                    break;
                case MergeCase::TakeCur:
                    out.values = ct.values;
                    break;
                case MergeCase::AverageNeither:
                    for (std::size_t i = 0; i < out.size(); ++i)
                        out.values[i] = 0.5 * (pt.values[i] + ct.values[i]);
                    break;
            }
        }
        result.report.push_back({unit.id, unit.label, p, c, mc});
    }
    return result;
}

Model merge_coarse(const Model& prev, const Model& cur, double lambda) {
    check_same_arch(prev, cur);
    Model out = prev;
    for (std::size_t t = 0; t < out.tensors().size(); ++t) {
        ParamTensor& dst = out.tensors()[t];
        const ParamTensor& pt = prev.tensors()[t];
        const ParamTensor& ct = cur.tensors()[t];
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst.values[i] = lambda * pt.values[i] + (1.0 - lambda) * ct.values[i];
    }
    return out;
}

void ema_weights_update(Model& running, const Model& cur, double decay) {
    check_same_arch(running, cur);
    for (std::size_t t = 0; t < running.tensors().size(); ++t) {
        ParamTensor& dst = running.tensors()[t];
        const ParamTensor& ct = cur.tensors()[t];
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst.values[i] = decay * dst.values[i] + (1.0 - decay) * ct.values[i];
    }
}

} // namespace tasl
