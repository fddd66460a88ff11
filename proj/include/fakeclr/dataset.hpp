#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fakeclr/errors.hpp"
#include "fakeclr/rng.hpp"
#include "fakeclr/tensor.hpp"

namespace fakeclr {

enum class DatasetKind { ring, grid, spiral };

inline const char* to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::ring: return "ring";
        case DatasetKind::grid: return "grid";
        case DatasetKind::spiral: return "spiral";
    }
    return "?";
}

inline DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "ring") return DatasetKind::ring;
    if (s == "grid") return DatasetKind::grid;
    if (s == "spiral") return DatasetKind::spiral;
    throw invalid_parameter("unknown dataset kind: " + s);
}

inline constexpr std::size_t dataset_pool_size = 100000;

// Component means of the ring mixture: 8 points on the radius-2 circle.
inline std::vector<std::pair<double, double>> ring_means() {
    std::vector<std::pair<double, double>> m;
    for (int k = 0; k < 8; ++k) {
        const double a = 2.0 * 3.14159265358979323846 * k / 8.0;
        m.emplace_back(2.0 * std::cos(a), 2.0 * std::sin(a));
    }
    return m;
}

namespace detail {

inline Tensor build_pool(DatasetKind kind) {
    // Pool seeds are fixed constants: the pool is the same in every run, so
    // subsets of it are nested and comparable across experiments.
    Rng rng(kind == DatasetKind::ring ? 0x52494E47ULL
            : kind == DatasetKind::grid ? 0x47524944ULL
                                         : 0x53504952ULL);
    Tensor pool({dataset_pool_size, 2});
    switch (kind) {
        case DatasetKind::ring: {
            const auto means = ring_means();
            for (std::size_t i = 0; i < dataset_pool_size; ++i) {
                const auto& [mx, my] = means[rng.index(8)];
                pool.at(i, 0) = mx + 0.05 * rng.normal();
                pool.at(i, 1) = my + 0.05 * rng.normal();
            }
            break;
        }
        case DatasetKind::grid: {
            for (std::size_t i = 0; i < dataset_pool_size; ++i) {
                const double mx = static_cast<double>(rng.index(5)) - 2.0;
                const double my = static_cast<double>(rng.index(5)) - 2.0;
                pool.at(i, 0) = mx + 0.05 * rng.normal();
                pool.at(i, 1) = my + 0.05 * rng.normal();
            }
            break;
        }
        case DatasetKind::spiral: {
            for (std::size_t i = 0; i < dataset_pool_size; ++i) {
                const double arm = static_cast<double>(rng.index(2));
                const double t = rng.uniform();
                const double theta = 3.0 * 3.14159265358979323846 * t + arm * 3.14159265358979323846;
                const double r = 0.25 + 1.75 * t;
                pool.at(i, 0) = r * std::cos(theta) + 0.05 * rng.normal();
                pool.at(i, 1) = r * std::sin(theta) + 0.05 * rng.normal();
            }
            break;
        }
    }
    return pool;
}

} // namespace detail

// The fixed 1e5-point pool for a dataset family. Built once per process.
inline const Tensor& dataset_pool(DatasetKind kind) {
    static const Tensor ring = detail::build_pool(DatasetKind::ring);
    static const Tensor grid = detail::build_pool(DatasetKind::grid);
    static const Tensor spiral = detail::build_pool(DatasetKind::spiral);
    switch (kind) {
        case DatasetKind::grid: return grid;
        case DatasetKind::spiral: return spiral;
        default: return ring;
    }
}

// An n-point training set: the prefix of a seed-keyed permutation of the
// pool. Same seed and growing n give nested subsets (ring-100 is contained
// in ring-1000).
inline Tensor make_dataset(DatasetKind kind, std::size_t n, std::uint64_t seed) {
    if (n < 2) throw invalid_parameter("make_dataset: need at least 2 samples");
    if (n > dataset_pool_size)
        throw invalid_parameter("make_dataset: n exceeds the fixed pool size");
    const Tensor& pool = dataset_pool(kind);
    std::vector<std::uint32_t> perm(dataset_pool_size);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng rng = Rng::derive(seed, 0x646174ULL);  // dataset shuffle stream
    for (std::size_t i = dataset_pool_size - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.index(i + 1)]);
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        out.at(i, 0) = pool.at(perm[i], 0);
        out.at(i, 1) = pool.at(perm[i], 1);
    }
    return out;
}

} // namespace fakeclr
