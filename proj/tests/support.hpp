#pragma once

// Known-generator fixtures shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "koopnet/rng.hpp"
#include "koopnet/snapshot.hpp"

namespace testsupport {

using cplx = std::complex<double>;

struct LinearSystem {
    Eigen::MatrixXd a;
    std::vector<cplx> eigenvalues;
};

/// Random real diagonalizable n x n map with distinct eigenvalues of modulus
/// in [0.8, 1.05]: a mix of real values and conjugate pairs, conjugated by a
/// random well-conditioned basis.
inline LinearSystem random_linear_system(koopnet::Rng& rng, std::size_t n) {
    const auto dim = static_cast<Eigen::Index>(n);
    while (true) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(dim, dim);
        std::vector<cplx> eig;
        const auto pairs = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n / 2 + 1));
        Eigen::Index k = 0;
        for (std::size_t p = 0; p < pairs && k + 1 < dim; ++p, k += 2) {
            const double r = rng.uniform(0.8, 1.05);
            const double phi = rng.uniform(0.1, 3.0);
            const double re = r * std::cos(phi);
            const double im = r * std::sin(phi);
            d(k, k) = re;
            d(k, k + 1) = -im;
            d(k + 1, k) = im;
            d(k + 1, k + 1) = re;
            eig.emplace_back(re, im);
            eig.emplace_back(re, -im);
        }
        for (; k < dim; ++k) {
            const double r = rng.uniform(0.8, 1.05) * (rng.uniform() < 0.3 ? -1.0 : 1.0);
            d(k, k) = r;
            eig.emplace_back(r, 0.0);
        }
        double sep = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < eig.size(); ++i) {
            for (std::size_t j = i + 1; j < eig.size(); ++j) sep = std::min(sep, std::abs(eig[i] - eig[j]));
        }
        if (sep < 0.05) continue;

        Eigen::MatrixXd p(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            for (Eigen::Index j = 0; j < dim; ++j) p(i, j) = rng.uniform(-1.0, 1.0);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(p);
        const auto sv = svd.singularValues();
        if (sv(dim - 1) <= 0.0 || sv(0) / sv(dim - 1) > 50.0) continue;
        return LinearSystem{p * d * p.inverse(), eig};
    }
}

/// Random real map on R^(2 pairs) whose eigenvalues are all non-real
/// conjugate pairs (no zero-frequency dynamics).
inline LinearSystem random_oscillatory_system(koopnet::Rng& rng, std::size_t pairs) {
    while (true) {
        auto sys = random_linear_system(rng, 2 * pairs);
        bool all_complex = true;
        for (const auto& l : sys.eigenvalues) all_complex = all_complex && l.imag() != 0.0;
        if (all_complex) return sys;
    }
}

inline Eigen::VectorXd random_vector(koopnet::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(lo, hi);
    return v;
}

/// T x N record of x_{k+1} = a x_k + c.
inline Eigen::MatrixXd iterate(const Eigen::MatrixXd& a, Eigen::VectorXd x, std::size_t t,
                               const Eigen::VectorXd* c = nullptr) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(t), x.size());
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
        out.row(k) = x.transpose();
        x = a * x;
        if (c) x += *c;
    }
    return out;
}

/// Largest distance between two eigenvalue lists under the best one-to-one
/// matching (exhaustive over permutations; lists are small).
inline double match_error(std::vector<cplx> got, const std::vector<cplx>& want) {
    if (got.size() != want.size()) return std::numeric_limits<double>::infinity();
    std::vector<std::size_t> perm(got.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0.0;
        for (std::size_t i = 0; i < perm.size() && worst < best; ++i) {
            worst = std::max(worst, std::abs(got[perm[i]] - want[i]));
        }
        best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

inline std::vector<cplx> to_vector(const Eigen::VectorXcd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace testsupport
