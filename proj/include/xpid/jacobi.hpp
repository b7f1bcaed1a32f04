#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "xpid/error.hpp"

namespace xpid {

struct SymmetricEigen {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns match `values`
    int sweeps = 0;
    bool converged = false;
};

inline double hs_norm(const Eigen::MatrixXd& S) { return std::sqrt(S.cwiseAbs2().sum()); }

/// Cyclic Jacobi rotations for a small dense symmetric matrix.
/// Stops once every off-diagonal entry is below 1e-14 * ||S||_HS (at most 100 sweeps).
inline SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& S_in, double rel_tol = 1e-14, int max_sweeps = 100) {
    if (S_in.rows() != S_in.cols()) throw Error(ErrorCode::DimensionMismatch, "jacobi_eigen needs a square matrix");
    const Eigen::Index N = S_in.rows();
    Eigen::MatrixXd S = 0.5 * (S_in + S_in.transpose());
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(N, N);
    const double threshold = rel_tol * hs_norm(S);

    SymmetricEigen out;
    for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < N; ++p)
            for (Eigen::Index q = p + 1; q < N; ++q) off = std::max(off, std::abs(S(p, q)));
        if (off <= threshold) {
            out.converged = true;
            out.sweeps = sweep;
            break;
        }
        if (sweep == max_sweeps) {
            out.sweeps = sweep;
            break;
        }
        for (Eigen::Index p = 0; p < N; ++p) {
            for (Eigen::Index q = p + 1; q < N; ++q) {
                const double apq = S(p, q);
                if (std::abs(apq) <= threshold) continue;
                const double theta = (S(q, q) - S(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < N; ++k) {
                    const double skp = S(k, p), skq = S(k, q);
                    S(k, p) = c * skp - s * skq;
                    S(k, q) = s * skp + c * skq;
                }
                for (Eigen::Index k = 0; k < N; ++k) {
                    const double spk = S(p, k), sqk = S(q, k);
                    S(p, k) = c * spk - s * sqk;
                    S(q, k) = s * spk + c * sqk;
                }
                for (Eigen::Index k = 0; k < N; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return S(a, a) < S(b, b); });
    out.values.resize(N);
    out.vectors.resize(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        out.values(i) = S(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = V.col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace xpid
