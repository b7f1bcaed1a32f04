#pragma once

// Lyapunov certificates for extended PID / PD gains.
//
// P is built so that P e_last = gains and Q = -(PA + A^T P) is diagonal; the
// certificate then only needs P > 0 and PA + A^T P + 2 kbar I < 0.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <variant>

#include <Eigen/Core>

#include "xpid/design.hpp"
#include "xpid/jacobi.hpp"

namespace xpid {

/// Shift matrix with the negated gains in the last row.
inline Eigen::MatrixXd companion(const GainVector& g) {
    const auto N = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    for (Eigen::Index i = 0; i + 1 < N; ++i) A(i, i + 1) = 1.0;
    for (Eigen::Index j = 0; j < N; ++j) A(N - 1, j) = -g.values()[static_cast<std::size_t>(j)];
    return A;
}

namespace detail {

// p_{0j} = 2 c_0 c_{j+1} (j < N), p_{iN} = c_i, p_{ij} = 2 c_i c_{j+1} - p_{i-1,j+1}.
inline Eigen::MatrixXd diagonalizing_P(std::span<const double> c) {
    const auto N = static_cast<Eigen::Index>(c.size()) - 1;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N + 1, N + 1);
    auto k = [&](Eigen::Index i) { return c[static_cast<std::size_t>(i)]; };
    for (Eigen::Index i = 0; i <= N; ++i) {
        for (Eigen::Index j = i; j < N; ++j) {
            P(i, j) = 2.0 * k(i) * k(j + 1);
            if (i > 0) P(i, j) -= P(i - 1, j + 1);
        }
        P(i, N) = k(i);
    }
    for (Eigen::Index i = 0; i <= N; ++i)
        for (Eigen::Index j = 0; j < i; ++j) P(i, j) = P(j, i);
    return P;
}

}  // namespace detail

/// Recursive diagonalizing Lyapunov matrix for PID gains (k0..kn).
inline Eigen::MatrixXd build_P(const GainVector& g) {
    if (!g.is_pid()) throw Error(ErrorCode::InvalidArgument, "build_P expects PID gains");
    return detail::diagonalizing_P(g.values());
}

/// Same recursion on (k1..kn) for the PD controller.
inline Eigen::MatrixXd build_P0(const GainVector& g) {
    if (g.is_pid()) throw Error(ErrorCode::InvalidArgument, "build_P0 expects PD gains");
    return detail::diagonalizing_P(g.values());
}

inline Eigen::MatrixXd lyapunov_matrix(const GainVector& g) { return g.is_pid() ? build_P(g) : build_P0(g); }

/// Diagonal of Q = -(PA + A^T P): (2 c0^2, 2 (c_i^2 - p_{i-1,i})).
inline Eigen::VectorXd q_diagonal(const GainVector& g) {
    const Eigen::MatrixXd P = lyapunov_matrix(g);
    const auto c = g.values();
    const auto N = static_cast<Eigen::Index>(c.size());
    Eigen::VectorXd q(N);
    q(0) = 2.0 * c[0] * c[0];
    for (Eigen::Index i = 1; i < N; ++i) {
        const double ci = c[static_cast<std::size_t>(i)];
        q(i) = 2.0 * (ci * ci - P(i - 1, i));
    }
    return q;
}

struct LyapunovCertificate {
    Eigen::MatrixXd P;
    Eigen::VectorXd Q;            // diagonal of -(PA + A^T P)
    double min_eig_P = 0.0;
    double max_eig_P = 0.0;
    double min_eig_negdef = 0.0;  // smallest eigenvalue of -(PA + A^T P + 2 kbar I)
    double kbar = 0.0;
    double q_offdiag_residue = 0.0;  // max |off-diagonal of PA + A^T P|
};

enum class CertificateCondition { NotPositiveDefinite, NotNegativeDefinite };

inline const char* to_string(CertificateCondition c) {
    return c == CertificateCondition::NotPositiveDefinite ? "NotPositiveDefinite" : "NotNegativeDefinite";
}

struct Rejection {
    CertificateCondition condition;
    double eigenvalue = 0.0;  // offending eigenvalue (min of P, or max of PA + A^T P + 2 kbar I)
    double min_eig_P = 0.0;
    double max_eig_lyap = 0.0;
    std::string message;
};

using CertificateResult = std::variant<LyapunovCertificate, Rejection>;

inline bool accepted(const CertificateResult& r) { return std::holds_alternative<LyapunovCertificate>(r); }

/// Builds P for the gains and checks P > 0 and PA + A^T P + 2 kbar I < 0 by
/// symmetric eigenvalues. kbar uses k0..kn for PID and k1..kn for PD.
inline CertificateResult verify_certificate(const GainVector& g, double L, double M) {
    if (!(L >= 0.0) || !(M >= 0.0)) throw Error(ErrorCode::InvalidArgument, "L and M must be nonnegative");
    const Eigen::MatrixXd P = lyapunov_matrix(g);
    const Eigen::MatrixXd A = companion(g);
    const Eigen::MatrixXd lyap = P * A + A.transpose() * P;

    double sum = 0.0;
    for (double v : g.values()) sum += v;
    const double kbar = sum * L + g.k(g.n()) * M * M;

    const auto N = lyap.rows();
    const Eigen::MatrixXd shifted = lyap + 2.0 * kbar * Eigen::MatrixXd::Identity(N, N);
    const SymmetricEigen eig_P = jacobi_eigen(P);
    const SymmetricEigen eig_S = jacobi_eigen(shifted);
    const double min_p = eig_P.values(0);
    const double max_s = eig_S.values(N - 1);

    if (!(min_p > 0.0)) {
        return Rejection{CertificateCondition::NotPositiveDefinite, min_p, min_p, max_s,
                         "P is not positive definite (min eigenvalue " + std::to_string(min_p) + ")"};
    }
    if (!(max_s < 0.0)) {
        return Rejection{CertificateCondition::NotNegativeDefinite, max_s, min_p, max_s,
                         "PA + A'P + 2 kbar I is not negative definite (max eigenvalue " + std::to_string(max_s) + ")"};
    }

    LyapunovCertificate cert;
    cert.P = P;
    cert.Q = -lyap.diagonal();
    cert.min_eig_P = min_p;
    cert.max_eig_P = eig_P.values(N - 1);
    cert.min_eig_negdef = -max_s;
    cert.kbar = kbar;
    double residue = 0.0;
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
            if (i != j) residue = std::max(residue, std::abs(lyap(i, j)));
    cert.q_offdiag_residue = residue;
    return cert;
}

/// Computable constants for E|x - z*|^2 <= C1 (|x0 - z*|^2 + |u*|^2) e^{-rate t} + C2 ||g(z*)||_HS^2,
/// from V = Y'PY/2 with LV <= -(mu/2)|Y|^2 + kn ||g(z*)||^2 and mu = min_eig_negdef.
inline void attach_certificate_constants(BoundConstants& bc, const LyapunovCertificate& cert, const GainVector& g) {
    const double k0 = g.k(g.first_index());
    const double kn = g.k(g.n());
    const double ratio = cert.max_eig_P / cert.min_eig_P;
    const double rate = cert.min_eig_negdef / cert.max_eig_P;
    bc.prop1_rate = rate;
    bc.prop1_C1 = ratio * std::max(1.0, g.is_pid() ? 1.0 / (k0 * k0) : 1.0);
    bc.prop1_C2 = 2.0 * kn / (rate * cert.min_eig_P);
}

}  // namespace xpid
