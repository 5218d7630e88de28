// Copyright (c) 2026 the tasl authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness helpers. All draws go through these functions so that
// results are bit-reproducible across compilers and standard libraries
// (std::mt19937_64 output is specified, the distributions here are our own).

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tasl::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent stream from (seed, label, index).
inline std::uint64_t derive(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ splitmix64(h ^ splitmix64(index)));
}

inline Engine engine(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
    return Engine(derive(seed, label, index));
}

// Uniform in [0, 1), 53-bit resolution.
inline double unit(Engine& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& g, double lo, double hi) {
    return lo + (hi - lo) * unit(g);
}

// Standard normal via Box-Muller (two draws per sample, no cached spare).
inline double normal(Engine& g) {
    double u1 = 1.0 - unit(g); // (0, 1]
    double u2 = unit(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline std::size_t index(Engine& g, std::size_t n) {
    return static_cast<std::size_t>(g() % n);
}

template <typename T>
void shuffle(std::vector<T>& v, Engine& g) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = index(g, i);
        std::swap(v[i - 1], v[j]);
    }
}

// k distinct indices out of n (k <= n), in random order.
inline std::vector<std::size_t> sample_without_replacement(Engine& g, std::size_t n, std::size_t k) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    shuffle(all, g);
    all.resize(k);
    return all;
}

} // namespace tasl::rng
