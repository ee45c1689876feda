#pragma once

// Bak-Sneppen evolution model on a ring: each iteration the least-fit site and
// its two ring neighbours receive fresh U[0, 1) fitness values.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopnet/error.hpp"
#include "koopnet/rng.hpp"
#include "koopnet/snapshot.hpp"

namespace koopnet::bs {

struct BsParams {
    std::size_t n = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 3) throw ConfigError("bs: ring size n must be >= 3");
    }
};

struct BsState {
    std::vector<double> fitness;
    std::size_t iteration = 0;
};

/// Index of the smallest fitness; ties go to the lowest index.
inline std::size_t argmin_fitness(std::span<const double> x) {
    return static_cast<std::size_t>(std::min_element(x.begin(), x.end()) - x.begin());
}

/// One update in place. Replacement draws happen in the order left
/// neighbour, centre, right neighbour. Returns the replaced minimum's index.
inline std::size_t bs_step(BsState& state, Rng& rng) {
    const auto n = state.fitness.size();
    if (n < 3) throw ConfigError("bs_step: ring size must be >= 3");
    const auto i = argmin_fitness(state.fitness);
    state.fitness[(i + n - 1) % n] = rng.uniform();
    state.fitness[i] = rng.uniform();
    state.fitness[(i + 1) % n] = rng.uniform();
    ++state.iteration;
    return i;
}

inline double average_fitness(std::span<const double> fitness) {
    if (fitness.empty()) throw ShapeError("average_fitness: empty state");
    return std::accumulate(fitness.begin(), fitness.end(), 0.0) / static_cast<double>(fitness.size());
}

inline double average_fitness(const BsState& state) { return average_fitness(state.fitness); }

struct BsRun {
    SnapshotMatrix snapshots;
    /// min_history[k] is the site replaced to produce snapshot row k.
    std::vector<std::size_t> min_history;
    BsState final_state;
};

/// Draws the initial ring from U[0, 1), then applies n_iterations updates and
/// records the fitness vector after each. Snapshot dt is one iteration.
inline BsRun simulate_bs(const BsParams& params, std::size_t n_iterations) {
    params.validate();
    if (n_iterations < 2) throw ConfigError("simulate_bs: n_iterations must be >= 2");
    Rng rng(params.seed);
    BsState state;
    state.fitness.resize(params.n);
    for (auto& x : state.fitness) x = rng.uniform();

    Eigen::MatrixXd data(static_cast<Eigen::Index>(n_iterations), static_cast<Eigen::Index>(params.n));
    std::vector<std::size_t> history;
    history.reserve(n_iterations);
    for (std::size_t k = 0; k < n_iterations; ++k) {
        history.push_back(bs_step(state, rng));
        for (std::size_t i = 0; i < params.n; ++i) {
            data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = state.fitness[i];
        }
    }
    return BsRun{SnapshotMatrix(std::move(data), 1.0, default_labels(params.n)), std::move(history),
                 std::move(state)};
}

/// Sample quantile with linear interpolation between order statistics
/// (position q * (n - 1)). Reorders `values`.
inline double quantile(std::vector<double>& values, double q) {
    if (values.empty()) throw InsufficientDataError("quantile: no data");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile: q must lie in [0, 1]");
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double a = values[lo];
    if (lo + 1 >= values.size()) return a;
    const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

inline constexpr double kThresholdQuantile = 0.05;
inline constexpr std::size_t kMinThresholdRows = 100;

/// Estimates the lower edge x_crit of the stationary fitness distribution as
/// a low quantile of all fitness values in rows [burn_in, T).
inline double estimate_threshold(const SnapshotMatrix& snapshots, std::size_t burn_in,
                                 double q = kThresholdQuantile) {
    if (burn_in >= snapshots.steps() || snapshots.steps() - burn_in < kMinThresholdRows) {
        throw InsufficientDataError("estimate_threshold: need at least " + std::to_string(kMinThresholdRows) +
                                    " rows after burn-in, have " +
                                    std::to_string(burn_in >= snapshots.steps() ? 0 : snapshots.steps() - burn_in));
    }
    const auto& d = snapshots.data();
    const auto rows = static_cast<Eigen::Index>(snapshots.steps() - burn_in);
    std::vector<double> pooled;
    pooled.reserve(static_cast<std::size_t>(rows * d.cols()));
    for (Eigen::Index r = static_cast<Eigen::Index>(burn_in); r < d.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.cols(); ++c) pooled.push_back(d(r, c));
    }
    return quantile(pooled, q);
}

}  // namespace koopnet::bs
