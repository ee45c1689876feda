#pragma once

// Exact dynamic mode decomposition (DMD).
//
// Given snapshot pairs (X, Xp) with Xp ~ A X, the least-squares operator
// A = Xp X^+ is never formed. Instead it is compressed onto the leading left
// singular vectors of X:
//
//     X = U S V^T,   A~ = U^T Xp V S^-1,   A~ W = W L
//
// and the Koopman modes are lifted back with v_k = Xp V S^-1 w_k / lambda_k.
// Amplitudes are the least-squares coefficients of the first snapshot in the
// mode basis.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "koopnet/error.hpp"
#include "koopnet/snapshot.hpp"

namespace koopnet::dmd {

using cplx = std::complex<double>;

struct SnapshotPairs {
    /// N x (T-1): snapshots 0..T-2 as columns.
    Eigen::MatrixXd x;
    /// N x (T-1): snapshots 1..T-1 as columns.
    Eigen::MatrixXd xp;
};

inline SnapshotPairs build_snapshot_pairs(const SnapshotMatrix& s) {
    const auto t = static_cast<Eigen::Index>(s.steps());
    if (t < 2) throw ShapeError("build_snapshot_pairs: need at least 2 snapshots");
    return SnapshotPairs{s.data().topRows(t - 1).transpose(), s.data().bottomRows(t - 1).transpose()};
}

/// Eigenvalues with |lambda| at or below this fraction of the spectral radius
/// (or of 1, whichever is larger) are treated as exact zeros.
inline constexpr double kZeroEigenvalueTol = 1e-12;

/// mu = ln(lambda) / dt on the principal branch, Im(mu) in (-pi/dt, pi/dt].
inline cplx continuous_eigenvalue(cplx lambda, double dt) {
    if (!(dt > 0.0)) throw DomainError("continuous_eigenvalue: dt must be > 0");
    if (lambda == cplx(0.0, 0.0)) {
        throw DomainError("continuous_eigenvalue: lambda = 0 has no logarithm (infinitely fast decay)");
    }
    double arg = std::arg(lambda);
    if (arg <= -std::numbers::pi) arg = std::numbers::pi;
    return {std::log(std::abs(lambda)) / dt, arg / dt};
}

inline Eigen::VectorXcd continuous_spectrum(const Eigen::VectorXcd& lambdas, double dt) {
    Eigen::VectorXcd mu(lambdas.size());
    for (Eigen::Index k = 0; k < lambdas.size(); ++k) mu(k) = continuous_eigenvalue(lambdas(k), dt);
    return mu;
}

struct DmdResult {
    std::size_t rank = 0;
    /// Discrete-time eigenvalues, ordered by descending amplitude.
    Eigen::VectorXcd eigenvalues;
    /// ln(lambda)/dt; entries flagged in zero_eigenvalue hold -inf.
    Eigen::VectorXcd continuous;
    /// N x rank, unit-norm columns.
    Eigen::MatrixXcd modes;
    Eigen::VectorXcd amplitudes;
    /// All min(T-1, N) singular values of X, non-increasing.
    Eigen::VectorXd singular_values;
    /// True where lambda vanished; such modes are excluded from the continuous
    /// spectrum and from amplitude diagnostics.
    std::vector<bool> zero_eigenvalue;
    double dt = 1.0;

    [[nodiscard]] double amplitude(std::size_t k) const {
        const auto i = static_cast<Eigen::Index>(k);
        return std::abs(amplitudes(i)) * modes.col(i).norm();
    }

    /// Largest amplitude over non-zero eigenvalues (0 when there are none).
    [[nodiscard]] double max_amplitude() const {
        double m = 0.0;
        for (std::size_t k = 0; k < rank; ++k) {
            if (!zero_eigenvalue[k]) m = std::max(m, amplitude(k));
        }
        return m;
    }
};

inline std::size_t numerical_rank(const Eigen::VectorXd& sv, Eigen::Index rows, Eigen::Index cols) {
    if (sv.size() == 0) return 0;
    const double tol = sv(0) * static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) ++r;
    }
    return r;
}

namespace detail {

/// Index of the conjugate partner of each eigenvalue (itself for real ones).
inline std::vector<Eigen::Index> conjugate_partners(const Eigen::VectorXcd& lam) {
    const auto r = lam.size();
    std::vector<Eigen::Index> partner(static_cast<std::size_t>(r));
    std::vector<bool> used(static_cast<std::size_t>(r), false);
    for (Eigen::Index k = 0; k < r; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        partner[uk] = k;
        if (used[uk] || lam(k).imag() == 0.0) continue;
        Eigen::Index best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = k + 1; j < r; ++j) {
            if (used[static_cast<std::size_t>(j)] || lam(j).imag() == 0.0) continue;
            const double d = std::abs(lam(j) - std::conj(lam(k)));
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best >= 0 && best_d <= 1e-10 * std::max(1.0, std::abs(lam(k)))) {
            partner[uk] = best;
            partner[static_cast<std::size_t>(best)] = k;
            used[uk] = used[static_cast<std::size_t>(best)] = true;
        }
    }
    return partner;
}

}  // namespace detail

/// Exact DMD of the pairs (x, xp) sampled dt apart. `rank` caps the number of
/// retained singular directions; the numerical rank of x always applies.
inline DmdResult dmd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xp, double dt,
                     std::optional<std::size_t> rank = std::nullopt) {
    if (x.rows() != xp.rows() || x.cols() != xp.cols()) {
        throw ShapeError("dmd: X and Xp must have the same shape");
    }
    if (x.cols() < 1 || x.rows() < 1) throw ShapeError("dmd: empty snapshot pairs");
    if (!(dt > 0.0)) throw DomainError("dmd: dt must be > 0");
    if (rank && *rank < 1) throw ConfigError("dmd: requested rank must be >= 1");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    DmdResult res;
    res.dt = dt;
    res.singular_values = svd.singularValues();
    const auto numrank = numerical_rank(res.singular_values, x.rows(), x.cols());
    if (numrank == 0) throw DegenerateDataError("dmd: all singular values vanish");
    const auto r = static_cast<Eigen::Index>(rank ? std::min(*rank, numrank) : numrank);

    const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
    const Eigen::VectorXd s_inv = res.singular_values.head(r).cwiseInverse();
    // Xp V S^-1, shared by the reduced operator and the exact modes.
    const Eigen::MatrixXd lifted = xp * svd.matrixV().leftCols(r) * s_inv.asDiagonal();
    const Eigen::MatrixXd reduced = u.transpose() * lifted;

    Eigen::EigenSolver<Eigen::MatrixXd> eig(reduced, true);
    if (eig.info() != Eigen::Success) throw DegenerateDataError("dmd: eigendecomposition did not converge");
    const Eigen::VectorXcd lam = eig.eigenvalues();
    const Eigen::MatrixXcd w = eig.eigenvectors();

    double radius = 0.0;
    for (Eigen::Index k = 0; k < r; ++k) radius = std::max(radius, std::abs(lam(k)));
    const double zero_tol = kZeroEigenvalueTol * std::max(1.0, radius);

    Eigen::MatrixXcd modes(x.rows(), r);
    std::vector<bool> is_zero(static_cast<std::size_t>(r));
    for (Eigen::Index k = 0; k < r; ++k) {
        const bool zero = std::abs(lam(k)) <= zero_tol;
        is_zero[static_cast<std::size_t>(k)] = zero;
        Eigen::VectorXcd v = zero ? Eigen::VectorXcd(u.cast<cplx>() * w.col(k))
                                  : Eigen::VectorXcd(lifted.cast<cplx>() * w.col(k) / lam(k));
        double nrm = v.norm();
        if (!(nrm > 0.0)) {
            // Exact mode collapsed; fall back to the projected mode.
            v = u.cast<cplx>() * w.col(k);
            nrm = v.norm();
        }
        modes.col(k) = v / nrm;
    }

    const Eigen::VectorXcd x0 = x.col(0).cast<cplx>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> msvd(modes, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXcd b = msvd.solve(x0);

    // Real data: the least-squares problem is invariant under conjugating a
    // pair, so averaging a pair's coefficients keeps the residual optimal and
    // makes the symmetry exact.
    const auto partner = detail::conjugate_partners(lam);
    for (Eigen::Index k = 0; k < r; ++k) {
        const auto j = partner[static_cast<std::size_t>(k)];
        if (j > k) {
            const cplx avg = 0.5 * (b(k) + std::conj(b(j)));
            b(k) = avg;
            b(j) = std::conj(avg);
        } else if (j == k && lam(k).imag() == 0.0 && modes.col(k).imag().isZero(0.0)) {
            b(k) = cplx(b(k).real(), 0.0);
        }
    }

    // Dominance order: descending amplitude; a conjugate pair shares the larger
    // of its two amplitudes so it stays adjacent (positive frequency first).
    std::vector<double> key(static_cast<std::size_t>(r));
    for (Eigen::Index k = 0; k < r; ++k) {
        const auto j = partner[static_cast<std::size_t>(k)];
        key[static_cast<std::size_t>(k)] = std::max(std::abs(b(k)), std::abs(b(j)));
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
        const auto ua = static_cast<std::size_t>(a);
        const auto uc = static_cast<std::size_t>(c);
        if (key[ua] != key[uc]) return key[ua] > key[uc];
        const double fa = std::abs(lam(a).imag());
        const double fc = std::abs(lam(c).imag());
        if (fa != fc) return fa < fc;
        const auto pa = std::min(a, partner[ua]);
        const auto pc = std::min(c, partner[uc]);
        if (pa != pc) return pa < pc;
        return lam(a).imag() > lam(c).imag();
    });

    res.rank = static_cast<std::size_t>(r);
    res.eigenvalues.resize(r);
    res.continuous.resize(r);
    res.modes.resize(x.rows(), r);
    res.amplitudes.resize(r);
    res.zero_eigenvalue.resize(static_cast<std::size_t>(r));
    for (Eigen::Index k = 0; k < r; ++k) {
        const auto src = order[static_cast<std::size_t>(k)];
        const bool zero = is_zero[static_cast<std::size_t>(src)];
        res.eigenvalues(k) = lam(src);
        res.continuous(k) = zero ? cplx(-std::numeric_limits<double>::infinity(), 0.0)
                                 : continuous_eigenvalue(lam(src), dt);
        res.modes.col(k) = modes.col(src);
        res.amplitudes(k) = b(src);
        res.zero_eigenvalue[static_cast<std::size_t>(k)] = zero;
    }
    return res;
}

inline DmdResult dmd(const SnapshotMatrix& s, std::optional<std::size_t> rank = std::nullopt) {
    const auto pairs = build_snapshot_pairs(s);
    return dmd(pairs.x, pairs.xp, s.dt(), rank);
}

/// lambda^n by repeated squaring.
inline cplx integer_power(cplx lambda, std::size_t n) {
    cplx result(1.0, 0.0);
    while (n > 0) {
        if (n & 1U) result *= lambda;
        lambda *= lambda;
        n >>= 1U;
    }
    return result;
}

/// Real part of sum_k b_k lambda_k^step v_k: the model's prediction of
/// snapshot `step` of the window.
inline Eigen::VectorXd reconstruct(const DmdResult& res, std::size_t step) {
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(res.modes.rows());
    for (std::size_t k = 0; k < res.rank; ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        const cplx p = res.zero_eigenvalue[k] ? cplx(step == 0 ? 1.0 : 0.0, 0.0)
                                              : integer_power(res.eigenvalues(i), step);
        acc += res.amplitudes(i) * p * res.modes.col(i);
    }
    return acc.real();
}

}  // namespace koopnet::dmd
