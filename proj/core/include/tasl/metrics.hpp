// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tasl/error.hpp"

namespace tasl {

// Row-major K x K accuracy matrix: at(k, i) is the accuracy on task i
// measured right after training on task k. Both indices are 0-based
// positions in the training order.
struct AccuracyMatrix {
    std::size_t task_count = 0;
    std::vector<double> cells;

    AccuracyMatrix() = default;
    explicit AccuracyMatrix(std::size_t k) : task_count(k), cells(k * k, 0.0) {}

    double& at(std::size_t after_task, std::size_t on_task) {
        return cells[after_task * task_count + on_task];
    }
    double at(std::size_t after_task, std::size_t on_task) const {
        return cells[after_task * task_count + on_task];
    }
};

// Average accuracy plus forward/backward transfer. The transfer terms need
// at least two tasks, so they are absent for a single-task run.
struct CLReport {
    double avg = 0.0;
    std::optional<double> fwt;
    std::optional<double> bwt;
};

inline CLReport cl_metrics(const AccuracyMatrix& m) {
    const std::size_t k = m.task_count;
    if (k == 0) throw DataError("cannot compute metrics of an empty accuracy matrix");
    if (m.cells.size() != k * k) throw DataError("accuracy matrix is not square");

    CLReport report;
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += m.at(k - 1, i);
    report.avg = sum / static_cast<double>(k);

    if (k > 1) {
        double fwt = 0.0;
        for (std::size_t i = 1; i < k; ++i) fwt += m.at(i - 1, i);
        report.fwt = fwt / static_cast<double>(k - 1);

        double bwt = 0.0;
        for (std::size_t i = 0; i + 1 < k; ++i) bwt += m.at(k - 1, i) - m.at(i, i);
        report.bwt = bwt / static_cast<double>(k - 1);
    }
    return report;
}

// Mean and standard error over a set of runs.
struct MetricSummary {
    double mean = 0.0;
    double stderr_ = 0.0;
};

struct AggregateReport {
    std::size_t run_count = 0;
    MetricSummary avg;
    std::optional<MetricSummary> fwt;
    std::optional<MetricSummary> bwt;
};

namespace detail {

inline MetricSummary summarize(std::span<const double> xs) {
    MetricSummary s;
    const std::size_t n = xs.size();
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(n);
    if (n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        // standard error of the mean, with the sample (n-1) variance
        s.stderr_ = std::sqrt(ss / static_cast<double>(n - 1)) /
                    std::sqrt(static_cast<double>(n));
    }
    return s;
}

} // namespace detail

inline AggregateReport aggregate(std::span<const CLReport> runs) {
    if (runs.empty()) throw DataError("cannot aggregate zero runs");
    AggregateReport agg;
    agg.run_count = runs.size();

    std::vector<double> avgs, fwts, bwts;
    for (const CLReport& r : runs) {
        avgs.push_back(r.avg);
        if (r.fwt) fwts.push_back(*r.fwt);
        if (r.bwt) bwts.push_back(*r.bwt);
    }
    agg.avg = detail::summarize(avgs);
    if (fwts.size() == runs.size()) agg.fwt = detail::summarize(fwts);
    if (bwts.size() == runs.size()) agg.bwt = detail::summarize(bwts);
    return agg;
}

} // namespace tasl
