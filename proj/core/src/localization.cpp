// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#include "tasl/localization.hpp"

#include <cmath>
#include <stdexcept>

#include "tasl/error.hpp"

namespace tasl {

std::string_view to_string(ScoreVariant variant) {
    switch (variant) {
        case ScoreVariant::SmoothedTimesUncertainty: return "iu";
        case ScoreVariant::SensitivityOnly: return "sensitivity-only";
        case ScoreVariant::GradMagnitude: return "grad-only";
    }
    return "iu";
}

ScoreVariant score_variant_from_string(std::string_view s) {
    if (s == "iu") return ScoreVariant::SmoothedTimesUncertainty;
    if (s == "sensitivity-only") return ScoreVariant::SensitivityOnly;
    if (s == "grad-only") return ScoreVariant::GradMagnitude;
    throw DataError("unknown scoring variant: " + std::string(s));
}

ImportanceState::ImportanceState(std::size_t param_count, double alpha1, double alpha2)
    : ibar_(param_count, 0.0),
      ubar_(param_count, 0.0),
      last_grad_mag_(param_count, 0.0),
      alpha1_(alpha1),
      alpha2_(alpha2) {
    if (alpha1 < 0.0 || alpha1 > 1.0 || alpha2 < 0.0 || alpha2 > 1.0)
        throw DataError("smoothing factors must lie in [0, 1]");
}

void ImportanceState::update(std::span<const double> values, std::span<const double> grads) {
    if (values.size() != ibar_.size() || grads.size() != ibar_.size())
        throw DataError("importance state is not aligned with the parameter vector");
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grads[i];
        if (!std::isfinite(g)) throw NumericError("non-finite gradient in importance update");
        const double inst = sensitivity(values[i], g);
        ibar_[i] = alpha1_ * ibar_[i] + (1.0 - alpha1_) * inst;
        ubar_[i] = alpha2_ * ubar_[i] + (1.0 - alpha2_) * std::abs(inst - ibar_[i]);
        last_grad_mag_[i] = std::abs(g);
    }
    ++step_;
}

void ImportanceState::update(const Model& model) {
    if (model.param_count() != ibar_.size())
        throw DataError("importance state is not aligned with the model");
    std::vector<double> values(model.param_count());
    std::vector<double> grads(model.param_count());
    std::size_t at = 0;
    for (const ParamTensor& t : model.tensors()) {
        std::copy(t.values.begin(), t.values.end(), values.begin() + at);
        std::copy(t.grad.begin(), t.grad.end(), grads.begin() + at);
        at += t.size();
    }
    update(values, grads);
}

std::vector<double> ImportanceState::param_scores(ScoreVariant variant) const {
    if (step_ == 0) throw std::logic_error("importance scores requested before any update");
    std::vector<double> s(ibar_.size());
    switch (variant) {
        case ScoreVariant::SmoothedTimesUncertainty:
            for (std::size_t i = 0; i < s.size(); ++i) s[i] = ibar_[i] * ubar_[i];
            break;
        case ScoreVariant::SensitivityOnly:
            s = ibar_;
            break;
        case ScoreVariant::GradMagnitude:
            s = last_grad_mag_;
            break;
    }
    return s;
}

UnitScoreMap unit_scores(const ImportanceState& state, const SkillPartition& partition,
                         const Model& model, ScoreVariant variant) {
    const std::vector<double> s = state.param_scores(variant);
    if (s.size() != model.param_count())
        throw DataError("importance state is not aligned with the model");
    UnitScoreMap map;
    map.scores.reserve(partition.size());
    for (const SkillUnit& unit : partition.units) {
        double sum = 0.0;
        for (const std::string& name : unit.member_tensors) {
            const std::size_t idx = model.tensor_index(name);
            const std::size_t off = model.tensor_offset(idx);
            const std::size_t n = model.tensors()[idx].size();
            for (std::size_t i = 0; i < n; ++i) sum += s[off + i];
        }
        map.scores.push_back(sum / static_cast<double>(unit.param_count));
    }
    return map;
}

LocalizationResult run_localization(Model model, const Batch& data, const LocalizationParams& params,
                                    const SkillPartition& partition, rng::Engine& batch_rng,
                                    const std::function<void(const Model&)>& after_step) {
    if (params.steps < 1) throw DataError("localization needs at least one step");
    if (data.empty()) throw DataError("localization needs a non-empty dataset");

    ImportanceState state(model.param_count(), params.alpha1, params.alpha2);
    std::vector<std::size_t> idx(params.batch_size);
    for (std::size_t t = 0; t < params.steps; ++t) {
        for (std::size_t i = 0; i < params.batch_size; ++i)
            idx[i] = rng::index(batch_rng, data.rows);
        const Batch minibatch = data.subset(idx);
        model.forward_loss(minibatch);
        model.backward();
        state.update(model);  // gradient at the pre-step weights
        model.sgd_step(params.lr);
        if (after_step) after_step(model);
    }

    LocalizationResult result{std::move(model), {}, std::move(state)};
    result.scores = unit_scores(result.state, partition, result.model, params.variant);
    result.scores.task_id = -1;
    return result;
}

} // namespace tasl
