#pragma once

// Integrate-and-fire oscillator (IFO) lattice.
//
// Each node carries a phase theta in [0, 1) that drifts at unit rate. Its
// energy is the concave map E(theta) = (1 - exp(-gamma theta)) / (1 - exp(-gamma)),
// so E(0) = 0 and E(1) = 1. A node whose energy reaches e_crit fires: its
// phase resets to 0 and every lattice neighbour receives an energy kick of
// epsilon. Kicks can push neighbours over threshold, and the resulting
// avalanche is resolved instantly before the clock moves again.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopnet/error.hpp"
#include "koopnet/rng.hpp"
#include "koopnet/snapshot.hpp"

namespace koopnet::ifo {

enum class Boundary { open, periodic };

inline std::string_view to_string(Boundary b) { return b == Boundary::open ? "open" : "periodic"; }

inline Boundary parse_boundary(std::string_view s) {
    if (s == "open") return Boundary::open;
    if (s == "periodic") return Boundary::periodic;
    throw ConfigError("unknown boundary '" + std::string(s) + "' (expected open or periodic)");
}

/// 4-neighbourhood on a rows x cols grid, nodes numbered row-major.
///
/// Periodic wrap-around never produces self-loops or duplicate neighbours, so
/// thin periodic lattices (one or two rows) have the degree of their distinct
/// neighbours.
class Lattice {
public:
    Lattice(std::size_t rows, std::size_t cols, Boundary boundary) : rows_(rows), cols_(cols) {
        neighbours_.resize(rows * cols);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                auto& nb = neighbours_[r * cols + c];
                auto add = [&](std::ptrdiff_t rr, std::ptrdiff_t cc) {
                    const auto R = static_cast<std::ptrdiff_t>(rows);
                    const auto C = static_cast<std::ptrdiff_t>(cols);
                    if (boundary == Boundary::periodic) {
                        rr = (rr + R) % R;
                        cc = (cc + C) % C;
                    } else if (rr < 0 || rr >= R || cc < 0 || cc >= C) {
                        return;
                    }
                    const auto j = static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc);
                    if (j != r * cols + c && std::find(nb.begin(), nb.end(), j) == nb.end()) nb.push_back(j);
                };
                const auto rr = static_cast<std::ptrdiff_t>(r);
                const auto cc = static_cast<std::ptrdiff_t>(c);
                add(rr - 1, cc);
                add(rr + 1, cc);
                add(rr, cc - 1);
                add(rr, cc + 1);
                std::sort(nb.begin(), nb.end());
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return neighbours_.size(); }
    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] const std::vector<std::size_t>& neighbours(std::size_t i) const { return neighbours_.at(i); }

    [[nodiscard]] std::size_t max_degree() const noexcept {
        std::size_t d = 0;
        for (const auto& nb : neighbours_) d = std::max(d, nb.size());
        return d;
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::vector<std::size_t>> neighbours_;
};

struct IfoParams {
    double gamma = 2.0;
    double epsilon = 0.145;
    double e_crit = 1.0;
    double dt = 0.01;
    std::size_t rows = 8;
    std::size_t cols = 8;
    Boundary boundary = Boundary::open;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t nodes() const noexcept { return rows * cols; }
    [[nodiscard]] Lattice lattice() const { return Lattice(rows, cols, boundary); }

    /// Throws ConfigError naming the first violated invariant.
    void validate() const {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("ifo: gamma must be > 0");
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("ifo: epsilon must be >= 0");
        // Phases live on [0, 1] and E(1) = 1, so a threshold above 1 is unreachable.
        if (!(e_crit > 0.0) || e_crit > 1.0) throw ConfigError("ifo: e_crit must lie in (0, 1]");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("ifo: dt must be > 0");
        if (rows < 1 || cols < 1) throw ConfigError("ifo: rows and cols must be >= 1");
        const auto degree = lattice().max_degree();
        if (static_cast<double>(degree) * epsilon >= e_crit) {
            throw ConfigError("ifo: coupling is not dissipative (max degree " + std::to_string(degree) +
                              " * epsilon >= e_crit)");
        }
    }
};

struct IfoState {
    std::vector<double> theta;
    double time = 0.0;
};

struct AvalancheRecord {
    double start_time = 0.0;
    /// Total number of firings; a node that fires twice counts twice.
    std::size_t size = 0;
    /// Distinct nodes that fired, ascending.
    std::vector<std::size_t> participants;
    /// Iteration that produced the avalanche (filled in by simulate_ifo).
    std::size_t step = 0;
};

/// E(theta) = K (1 - exp(-gamma theta)) with K = 1 / (1 - exp(-gamma)).
inline double energy_of_phase(double theta, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("energy_of_phase: gamma must be > 0");
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw DomainError("energy_of_phase: theta " + std::to_string(theta) + " outside [0, 1]");
    }
    return std::expm1(-gamma * theta) / std::expm1(-gamma);
}

/// Inverse of energy_of_phase: theta = -ln(1 - e / K) / gamma.
inline double phase_of_energy(double e, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("phase_of_energy: gamma must be > 0");
    if (!(e >= 0.0 && e <= 1.0)) {
        throw DomainError("phase_of_energy: energy " + std::to_string(e) + " outside [0, 1]");
    }
    if (e == 1.0) return 1.0;
    return -std::log1p(e * std::expm1(-gamma)) / gamma;
}

/// Phase at which a node reaches e_crit.
inline double firing_phase(const IfoParams& p) {
    return p.e_crit == 1.0 ? 1.0 : phase_of_energy(p.e_crit, p.gamma);
}

/// Uniform drift: every phase and the clock move forward by dt.
inline IfoState advance(IfoState state, double dt) {
    if (!(dt > 0.0)) throw DomainError("advance: dt must be > 0");
    for (auto& t : state.theta) t += dt;
    state.time += dt;
    return state;
}

/// Largest number of firings a single avalanche may contain.
inline std::size_t avalanche_bound(const IfoParams& p) {
    const auto n = p.nodes();
    if (p.epsilon == 0.0) return n;
    return n * static_cast<std::size_t>(std::ceil(p.e_crit / p.epsilon));
}

/// Fires every node at threshold until the lattice is quiescent, in place.
///
/// Sweeps are synchronous: the set of nodes at threshold is fixed at the start
/// of a sweep, those nodes reset to phase 0 (visited in ascending index), and
/// their kicks are summed and applied afterwards. Kicks only land on nodes that
/// did not fire in the same sweep; nodes that fired in an earlier sweep do
/// receive them. A kick that would carry a node past e_crit clamps it at
/// threshold, so it fires in the next sweep and the surplus is lost.
inline std::optional<AvalancheRecord> resolve_avalanche(IfoState& state, const IfoParams& params,
                                                        const Lattice& lattice) {
    const auto n = state.theta.size();
    if (n != lattice.size()) throw ShapeError("resolve_avalanche: state size does not match lattice");
    const double theta_c = firing_phase(params);

    std::vector<std::size_t> firing;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(state.theta[i])) throw DomainError("resolve_avalanche: non-finite phase");
        if (state.theta[i] >= theta_c) firing.push_back(i);
    }
    if (firing.empty()) return std::nullopt;

    AvalancheRecord rec;
    rec.start_time = state.time;
    std::vector<char> fired_ever(n, 0);
    std::vector<char> in_sweep(n, 0);
    std::vector<unsigned> kicks(n, 0);
    const auto bound = avalanche_bound(params);

    while (!firing.empty()) {
        for (auto i : firing) {
            state.theta[i] = 0.0;
            in_sweep[i] = 1;
            fired_ever[i] = 1;
        }
        rec.size += firing.size();
        if (rec.size > bound) {
            throw InternalError("resolve_avalanche: avalanche exceeded " + std::to_string(bound) + " firings");
        }
        for (auto i : firing) {
            for (auto j : lattice.neighbours(i)) {
                if (!in_sweep[j]) ++kicks[j];
            }
        }
        std::vector<std::size_t> next;
        for (std::size_t j = 0; j < n; ++j) {
            if (kicks[j] == 0) continue;
            const double e = energy_of_phase(state.theta[j], params.gamma) + params.epsilon * kicks[j];
            state.theta[j] = e >= params.e_crit ? theta_c : phase_of_energy(e, params.gamma);
            if (state.theta[j] >= theta_c) next.push_back(j);
            kicks[j] = 0;
        }
        for (auto i : firing) in_sweep[i] = 0;
        firing = std::move(next);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (fired_ever[i]) rec.participants.push_back(i);
    }
    return rec;
}

/// Value-semantic form of resolve_avalanche.
inline std::pair<IfoState, std::optional<AvalancheRecord>> resolve_avalanche(IfoState state,
                                                                              const IfoParams& params) {
    params.validate();
    const auto lattice = params.lattice();
    auto rec = resolve_avalanche(state, params, lattice);
    return {std::move(state), std::move(rec)};
}

struct IfoRun {
    SnapshotMatrix snapshots;
    std::vector<AvalancheRecord> avalanches;
    IfoState final_state;
};

/// Runs n_steps iterations of {advance by dt; resolve avalanches} and records
/// the phase vector after each iteration. Without an initial state the phases
/// are drawn i.i.d. uniform on [0, 1) from params.seed.
inline IfoRun simulate_ifo(const IfoParams& params, std::size_t n_steps,
                           std::optional<IfoState> initial = std::nullopt) {
    params.validate();
    // A snapshot matrix needs two rows.
    if (n_steps < 2) throw ConfigError("simulate_ifo: n_steps must be >= 2");
    const auto lattice = params.lattice();
    const auto n = params.nodes();

    IfoState state;
    if (initial) {
        state = std::move(*initial);
        if (state.theta.size() != n) throw ShapeError("simulate_ifo: initial state has wrong size");
    } else {
        Rng rng(params.seed);
        state.theta.resize(n);
        for (auto& t : state.theta) t = rng.uniform();
    }
    // Settle an initial state that already sits at threshold.
    resolve_avalanche(state, params, lattice);

    Eigen::MatrixXd data(static_cast<Eigen::Index>(n_steps), static_cast<Eigen::Index>(n));
    std::vector<AvalancheRecord> avalanches;
    const double t0 = state.time;
    for (std::size_t k = 0; k < n_steps; ++k) {
        for (auto& t : state.theta) t += params.dt;
        // Multiply rather than accumulate so event times stay exact multiples of dt.
        state.time = t0 + static_cast<double>(k + 1) * params.dt;
        if (auto rec = resolve_avalanche(state, params, lattice)) {
            rec->step = k;
            avalanches.push_back(std::move(*rec));
        }
        for (std::size_t i = 0; i < n; ++i) data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = state.theta[i];
    }
    return IfoRun{SnapshotMatrix(std::move(data), params.dt, default_labels(n)), std::move(avalanches),
                  std::move(state)};
}

/// Maps a phase snapshot matrix to node energies.
inline SnapshotMatrix to_energy(const SnapshotMatrix& phases, double gamma) {
    Eigen::MatrixXd e = phases.data().unaryExpr([gamma](double t) { return energy_of_phase(t, gamma); });
    return SnapshotMatrix(std::move(e), phases.dt(), phases.labels());
}

struct SyncOnset {
    /// Iteration of the first avalanche of the synchronized regime.
    std::size_t step = 0;
    /// Recurrence period in iterations.
    std::size_t period = 0;
};

/// Onset of full synchronization in an avalanche log: the first avalanche
/// after which every avalanche involves all n_nodes nodes and recurs with a
/// fixed period (within one iteration of jitter). At least min_repeats
/// system-wide avalanches are required.
inline std::optional<SyncOnset> synchronization_onset(const std::vector<AvalancheRecord>& log,
                                                      std::size_t n_nodes, std::size_t min_repeats = 3) {
    if (log.empty()) return std::nullopt;
    std::size_t i = log.size();
    while (i > 0 && log[i - 1].participants.size() == n_nodes) --i;
    // log[i..] is the maximal tail of system-wide avalanches.
    if (log.size() - i < std::max<std::size_t>(min_repeats, 2)) return std::nullopt;

    // Walk back from the end while the spacing stays within one iteration of the final period.
    const std::size_t last = log.size() - 1;
    std::size_t lo = log[last].step - log[last - 1].step;
    std::size_t hi = lo;
    std::size_t start = last - 1;
    while (start > i) {
        const auto gap = log[start].step - log[start - 1].step;
        const auto nlo = std::min(lo, gap);
        const auto nhi = std::max(hi, gap);
        if (nhi - nlo > 1) break;
        lo = nlo;
        hi = nhi;
        --start;
    }
    if (log.size() - start < std::max<std::size_t>(min_repeats, 2)) return std::nullopt;
    return SyncOnset{log[start].step, (log[last].step - log[start].step) / (last - start)};
}

}  // namespace koopnet::ifo
