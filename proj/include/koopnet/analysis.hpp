#pragma once

// Windowed Koopman diagnostics: per-window DMD spectra, amplitude tracking,
// transition detection from amplitude jumps, fast/slow eigenvalue groups and
// spatial patterns of individual modes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <future>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "koopnet/dmd.hpp"
#include "koopnet/error.hpp"
#include "koopnet/snapshot.hpp"

namespace koopnet::analysis {

using dmd::cplx;

inline constexpr std::size_t kDefaultWindow = 200;
inline constexpr double kDefaultJumpThreshold = 1e2;

struct WindowOptions {
    std::size_t window_len = kDefaultWindow;
    /// 0 means stride = window_len (non-overlapping windows).
    std::size_t stride = 0;
    std::optional<std::size_t> rank;
    /// Worker threads; windows are independent and results keep window order.
    unsigned threads = 1;
};

struct TimescaleSplit {
    std::vector<std::size_t> slow;
    std::vector<std::size_t> fast;
    /// Decay rate separating the groups: slow means |Re mu| < split.
    double split = 0.0;
};

struct WindowAnalysis {
    std::size_t window_index = 0;
    std::size_t start_step = 0;
    std::size_t end_step = 0;
    /// Set when DMD could not run on this window; `result` is then empty.
    bool degenerate = false;
    std::string warning;
    dmd::DmdResult result;
    /// Amplitudes |b_k| ||v_k|| of non-zero eigenvalues, descending.
    std::vector<double> dominant_amplitudes;
    double max_amplitude = 0.0;
    std::vector<std::size_t> slow_group;
    std::vector<std::size_t> fast_group;
};

/// Start rows of the windows [i*stride, i*stride + window_len) that fit in t rows.
inline std::vector<std::size_t> window_starts(std::size_t t, std::size_t window_len, std::size_t stride) {
    if (window_len < 2) throw ConfigError("window length must be >= 2");
    if (stride < 1) throw ConfigError("window stride must be >= 1");
    if (t < window_len) {
        throw ShapeError("record of " + std::to_string(t) + " snapshots is shorter than one window of " +
                         std::to_string(window_len));
    }
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + window_len <= t; s += stride) starts.push_back(s);
    return starts;
}

/// Groups retained, non-zero eigenvalues by decay rate |Re mu|.
///
/// Without an explicit split the rates are sorted and cut at the largest gap
/// between neighbours (two-cluster split); the first gap wins ties. With a
/// single distinct rate everything is slow.
inline TimescaleSplit split_timescales(const dmd::DmdResult& res, std::optional<double> decay_split = std::nullopt) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < res.rank; ++k) {
        if (!res.zero_eigenvalue[k]) idx.push_back(k);
    }
    auto rate = [&](std::size_t k) { return std::abs(res.continuous(static_cast<Eigen::Index>(k)).real()); };

    TimescaleSplit out;
    if (decay_split) {
        out.split = *decay_split;
    } else {
        std::vector<double> rates;
        for (auto k : idx) rates.push_back(rate(k));
        std::sort(rates.begin(), rates.end());
        out.split = std::numeric_limits<double>::infinity();
        double best_gap = 0.0;
        for (std::size_t i = 1; i < rates.size(); ++i) {
            const double gap = rates[i] - rates[i - 1];
            if (gap > best_gap) {
                best_gap = gap;
                out.split = rates[i];
            }
        }
    }
    for (auto k : idx) (rate(k) < out.split ? out.slow : out.fast).push_back(k);
    return out;
}

namespace detail {

inline WindowAnalysis analyze_window(const SnapshotMatrix& s, std::size_t index, std::size_t start,
                                     std::size_t len, std::optional<std::size_t> rank) {
    WindowAnalysis w;
    w.window_index = index;
    w.start_step = start;
    w.end_step = start + len;
    try {
        w.result = dmd::dmd(s.slice(start, len), rank);
    } catch (const DegenerateDataError& e) {
        w.degenerate = true;
        w.warning = e.what();
        return w;
    }
    for (std::size_t k = 0; k < w.result.rank; ++k) {
        if (!w.result.zero_eigenvalue[k]) w.dominant_amplitudes.push_back(w.result.amplitude(k));
    }
    std::sort(w.dominant_amplitudes.begin(), w.dominant_amplitudes.end(), std::greater<>());
    w.max_amplitude = w.dominant_amplitudes.empty() ? 0.0 : w.dominant_amplitudes.front();
    auto split = split_timescales(w.result);
    w.slow_group = std::move(split.slow);
    w.fast_group = std::move(split.fast);
    return w;
}

}  // namespace detail

/// Runs DMD on every window of the record. A window whose data is degenerate
/// comes back flagged instead of aborting the batch.
inline std::vector<WindowAnalysis> windowed_dmd(const SnapshotMatrix& s, const WindowOptions& opt = {}) {
    const auto stride = opt.stride == 0 ? opt.window_len : opt.stride;
    const auto starts = window_starts(s.steps(), opt.window_len, stride);
    if (opt.rank && *opt.rank < 1) throw ConfigError("requested rank must be >= 1");

    std::vector<WindowAnalysis> out(starts.size());
    const auto workers = std::max(1U, std::min<unsigned>(opt.threads, static_cast<unsigned>(starts.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < starts.size(); ++i) {
            out[i] = detail::analyze_window(s, i, starts[i], opt.window_len, opt.rank);
        }
        return out;
    }
    std::vector<std::future<void>> jobs;
    for (unsigned t = 0; t < workers; ++t) {
        jobs.push_back(std::async(std::launch::async, [&, t] {
            for (std::size_t i = t; i < starts.size(); i += workers) {
                out[i] = detail::analyze_window(s, i, starts[i], opt.window_len, opt.rank);
            }
        }));
    }
    for (auto& j : jobs) j.get();
    return out;
}

struct ModeEntry {
    std::size_t index = 0;
    cplx eigenvalue;
    cplx continuous;
    Eigen::VectorXcd mode;
    double amplitude = 0.0;
};

inline ModeEntry mode_entry(const dmd::DmdResult& res, std::size_t k) {
    const auto i = static_cast<Eigen::Index>(k);
    return ModeEntry{k, res.eigenvalues(i), res.continuous(i), res.modes.col(i), res.amplitude(k)};
}

/// The k strongest modes by amplitude; ties go to the lower |Im mu|, then the
/// lower index. k is clamped to the retained rank.
inline std::vector<ModeEntry> dominant_modes(const dmd::DmdResult& res, std::size_t k) {
    if (k < 1) throw ConfigError("dominant_modes: k must be >= 1");
    std::vector<std::size_t> idx(res.rank);
    for (std::size_t i = 0; i < res.rank; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double aa = res.amplitude(a);
        const double ab = res.amplitude(b);
        if (aa != ab) return aa > ab;
        const double fa = std::abs(res.continuous(static_cast<Eigen::Index>(a)).imag());
        const double fb = std::abs(res.continuous(static_cast<Eigen::Index>(b)).imag());
        if (fa != fb) return fa < fb;
        return a < b;
    });
    idx.resize(std::min(k, res.rank));
    std::vector<ModeEntry> out;
    for (auto i : idx) out.push_back(mode_entry(res, i));
    return out;
}

enum class JumpDirection { rise, fall, either };

inline std::string_view to_string(JumpDirection d) {
    switch (d) {
        case JumpDirection::rise: return "rise";
        case JumpDirection::fall: return "fall";
        case JumpDirection::either: return "either";
    }
    return "either";
}

inline JumpDirection parse_direction(std::string_view s) {
    if (s == "rise") return JumpDirection::rise;
    if (s == "fall") return JumpDirection::fall;
    if (s == "either") return JumpDirection::either;
    throw ConfigError("unknown jump direction '" + std::string(s) + "' (expected rise, fall or either)");
}

struct TransitionCriterion {
    double jump_threshold = kDefaultJumpThreshold;
    /// `rise` only accepts max_amplitude(w) / max_amplitude(w-1) >= threshold;
    /// `fall` only its reciprocal; `either` accepts a fold change of at
    /// least `threshold` in both directions.
    JumpDirection direction = JumpDirection::either;
};

struct TransitionReport {
    std::vector<double> max_amplitudes;
    std::optional<std::size_t> transition_window;
    /// max_amplitude(w) / max_amplitude(w-1) at the flagged boundary.
    double jump_ratio = 0.0;
    /// max(ratio, 1/ratio) at the flagged boundary.
    double fold_change = 0.0;
    /// Number of boundaries meeting the criterion (the first one is reported).
    std::size_t qualifying_boundaries = 0;
    TransitionCriterion criterion;
};

/// Scans consecutive windows for an order-of-magnitude change of the maximum
/// mode amplitude. Boundaries touching a window with zero amplitude (degenerate
/// data) are skipped.
inline TransitionReport detect_transition(std::span<const double> max_amplitudes, TransitionCriterion c = {}) {
    if (max_amplitudes.size() < 2) throw InsufficientDataError("detect_transition: need at least 2 windows");
    if (!(c.jump_threshold > 1.0)) throw ConfigError("detect_transition: jump threshold must exceed 1");
    TransitionReport rep;
    rep.criterion = c;
    rep.max_amplitudes.assign(max_amplitudes.begin(), max_amplitudes.end());
    for (std::size_t w = 1; w < max_amplitudes.size(); ++w) {
        const double prev = max_amplitudes[w - 1];
        const double cur = max_amplitudes[w];
        if (!(prev > 0.0) || !(cur > 0.0)) continue;
        const double ratio = cur / prev;
        const bool rise = ratio >= c.jump_threshold;
        const bool fall = 1.0 / ratio >= c.jump_threshold;
        const bool hit = c.direction == JumpDirection::rise   ? rise
                         : c.direction == JumpDirection::fall ? fall
                                                              : (rise || fall);
        if (!hit) continue;
        if (rep.qualifying_boundaries++ == 0) {
            rep.transition_window = w;
            rep.jump_ratio = ratio;
            rep.fold_change = std::max(ratio, 1.0 / ratio);
        }
    }
    return rep;
}

inline TransitionReport detect_transition(std::span<const WindowAnalysis> windows, TransitionCriterion c = {}) {
    std::vector<double> amps;
    amps.reserve(windows.size());
    for (const auto& w : windows) amps.push_back(w.degenerate ? 0.0 : w.max_amplitude);
    return detect_transition(std::span<const double>(amps), c);
}

struct ZeroFrequencyOptions {
    /// |Im mu| below this counts as zero frequency; default 1e-6 * pi / dt.
    std::optional<double> frequency_tol;
    /// Skip the stationary mode (|mu| dt <= stationary_tol, i.e. lambda ~ 1),
    /// which carries the window's time-average rather than its dynamics.
    bool skip_stationary = false;
    double stationary_tol = 1e-6;
};

/// Strongest non-oscillating mode of a window.
inline ModeEntry zero_frequency_mode(const dmd::DmdResult& res, const ZeroFrequencyOptions& opt = {}) {
    const double ftol = opt.frequency_tol.value_or(1e-6 * std::numbers::pi / res.dt);
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < res.rank; ++k) {
        if (res.zero_eigenvalue[k]) continue;
        const auto mu = res.continuous(static_cast<Eigen::Index>(k));
        if (std::abs(mu.imag()) >= ftol) continue;
        if (opt.skip_stationary && std::abs(mu) * res.dt <= opt.stationary_tol) continue;
        if (!best || res.amplitude(k) > res.amplitude(*best)) best = k;
    }
    if (!best) throw NotFoundError("zero_frequency_mode: no eigenvalue within the frequency tolerance");
    return mode_entry(res, *best);
}

/// Index of the eigenvalue closest to lambda = 1 (the mode that can be
/// followed from window to window), if any non-zero eigenvalue exists.
inline std::optional<std::size_t> stationary_mode_index(const dmd::DmdResult& res) {
    std::optional<std::size_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < res.rank; ++k) {
        if (res.zero_eigenvalue[k]) continue;
        const double d = std::abs(res.eigenvalues(static_cast<Eigen::Index>(k)) - cplx(1.0, 0.0));
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

struct NodeMagnitude {
    std::size_t node = 0;
    std::string label;
    double magnitude = 0.0;
};

/// Contiguous run of nodes [first, last] with similar magnitudes.
struct NodeGroup {
    std::size_t first = 0;
    std::size_t last = 0;
    double min_magnitude = 0.0;
    double max_magnitude = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return last - first + 1; }
};

struct SpatialPattern {
    std::vector<NodeMagnitude> nodes;
    std::vector<NodeGroup> groups;
};

inline constexpr double kGroupBand = 0.10;
/// Components below this fraction of the largest one belong to no group.
inline constexpr double kNegligibleComponent = 1e-9;

/// Per-node magnitudes |v_i| of a mode, and the contiguous groups of nodes
/// whose magnitudes stay within kGroupBand of the group's largest value.
inline SpatialPattern spatial_pattern(const Eigen::VectorXcd& mode, std::span<const std::string> labels = {}) {
    if (mode.size() < 1) throw ShapeError("spatial_pattern: empty mode");
    if (!labels.empty() && labels.size() != static_cast<std::size_t>(mode.size())) {
        throw ShapeError("spatial_pattern: label count does not match mode length");
    }
    SpatialPattern out;
    double peak = 0.0;
    for (Eigen::Index i = 0; i < mode.size(); ++i) {
        const auto n = static_cast<std::size_t>(i);
        const double m = std::abs(mode(i));
        peak = std::max(peak, m);
        out.nodes.push_back({n, labels.empty() ? "n" + std::to_string(n) : labels[n], m});
    }
    const double floor = kNegligibleComponent * peak;
    std::optional<NodeGroup> cur;
    for (const auto& nm : out.nodes) {
        if (!(nm.magnitude > floor)) {
            if (cur) out.groups.push_back(*cur);
            cur.reset();
            continue;
        }
        if (cur) {
            const double lo = std::min(cur->min_magnitude, nm.magnitude);
            const double hi = std::max(cur->max_magnitude, nm.magnitude);
            if (hi - lo <= kGroupBand * hi) {
                cur->last = nm.node;
                cur->min_magnitude = lo;
                cur->max_magnitude = hi;
                continue;
            }
            out.groups.push_back(*cur);
        }
        cur = NodeGroup{nm.node, nm.node, nm.magnitude, nm.magnitude};
    }
    if (cur) out.groups.push_back(*cur);
    return out;
}

}  // namespace koopnet::analysis
