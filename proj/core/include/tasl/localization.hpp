// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-parameter sensitivity tracking during fine-tuning and its aggregation
// to per-unit importance scores. Sensitivity of a parameter is |w * g|; an
// exponential moving average smooths it and a second average tracks the
// deviation between the instantaneous and smoothed values. The product of
// the two is the default importance score.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "tasl/batch.hpp"
#include "tasl/model.hpp"
#include "tasl/partition.hpp"
#include "tasl/rng.hpp"

namespace tasl {

enum class ScoreVariant { SmoothedTimesUncertainty, SensitivityOnly, GradMagnitude };

/// |w * g|, the first-order estimate of the loss change if w were zeroed.
inline double sensitivity(double w, double g) {
    double s = w * g;
    return s < 0 ? -s : s;
}

class ImportanceState {
public:
    ImportanceState() = default;
    ImportanceState(std::size_t param_count, double alpha1, double alpha2);

    /// One smoothing step on freshly computed gradients. Spans must be
    /// aligned with the state (flat parameter order).
    void update(std::span<const double> values, std::span<const double> grads);

    /// Convenience overload walking a model's tensors in declaration order.
    void update(const Model& model);

    /// Per-parameter scores for the chosen variant. Requires step() >= 1.
    std::vector<double> param_scores(ScoreVariant variant = ScoreVariant::SmoothedTimesUncertainty) const;

    std::uint64_t step() const { return step_; }
    double alpha1() const { return alpha1_; }
    double alpha2() const { return alpha2_; }
    std::span<const double> smoothed() const { return ibar_; }
    std::span<const double> uncertainty() const { return ubar_; }

private:
    std::vector<double> ibar_;
    std::vector<double> ubar_;
    std::vector<double> last_grad_mag_;
    std::uint64_t step_ = 0;
    double alpha1_ = 0.85;
    double alpha2_ = 0.85;
};

struct UnitScoreMap {
    std::vector<double> scores;
    int task_id = -1;
    bool normalized = false;

    std::size_t size() const { return scores.size(); }
};

/// Per unit, the mean of the per-parameter scores over that unit's members.
UnitScoreMap unit_scores(const ImportanceState& state, const SkillPartition& partition,
                         const Model& model,
                         ScoreVariant variant = ScoreVariant::SmoothedTimesUncertainty);

struct LocalizationParams {
    std::size_t steps = 1;
    std::size_t batch_size = 16;
    double lr = 0.1;
    double alpha1 = 0.85;
    double alpha2 = 0.85;
    ScoreVariant variant = ScoreVariant::SmoothedTimesUncertainty;
};

struct LocalizationResult {
    Model model;
    UnitScoreMap scores;
    ImportanceState state;
};

/// Fine-tunes `model` on minibatches sampled (with replacement) from `data`,
/// tracking importance on the gradient at the pre-step weights of every
/// iteration, then aggregates unit scores. `after_step`, when set, observes
/// the model right after each optimizer step.
LocalizationResult run_localization(Model model, const Batch& data, const LocalizationParams& params,
                                    const SkillPartition& partition, rng::Engine& batch_rng,
                                    const std::function<void(const Model&)>& after_step = {});

std::string_view to_string(ScoreVariant variant);
ScoreVariant score_variant_from_string(std::string_view s);

} // namespace tasl
