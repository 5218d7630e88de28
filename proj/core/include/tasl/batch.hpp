// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tasl {

/// A set of examples. Either dense feature rows with one class label per row,
/// or fixed-length token-id rows with one label per token.
struct Batch {
    std::size_t rows = 0;
    std::size_t cols = 0;                // feature count, or sequence length
    std::vector<double> features;        // rows*cols, empty for token input
    std::vector<int> tokens;             // rows*cols, empty for feature input
    std::vector<int> targets;            // rows (features) or rows*cols (tokens)

    bool token_input() const { return !tokens.empty(); }
    bool empty() const { return rows == 0; }

    /// New batch holding the given rows (indices may repeat).
    Batch subset(std::span<const std::size_t> idx) const {
        Batch out;
        out.rows = idx.size();
        out.cols = cols;
        const std::size_t lab = token_input() ? cols : 1;
        if (token_input())
            out.tokens.reserve(idx.size() * cols);
        else
            out.features.reserve(idx.size() * cols);
        out.targets.reserve(idx.size() * lab);
        for (std::size_t r : idx) {
            if (token_input()) {
                for (std::size_t c = 0; c < cols; ++c) out.tokens.push_back(tokens[r * cols + c]);
            } else {
                for (std::size_t c = 0; c < cols; ++c) out.features.push_back(features[r * cols + c]);
            }
            for (std::size_t c = 0; c < lab; ++c) out.targets.push_back(targets[r * lab + c]);
        }
        return out;
    }
};

} // namespace tasl
