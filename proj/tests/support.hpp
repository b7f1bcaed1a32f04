#pragma once

// Generators and independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "xpid/xpid.hpp"

namespace xpid::testing {

/// Code of the xpid::Error thrown by f; fails the test if nothing is thrown.
template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no exception";
    return ErrorCode::InvalidArgument;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
    double normal() { return std::normal_distribution<double>()(eng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

/// Random gain vector that passes the admissibility inequality for (L, M).
///
/// Shape ratios r satisfy r_i^2 > 2 r_{i-1} r_{i+1}; every term of the
/// inequality is then A s^2 - B s for a scale s, so the admissible scales are
/// exactly s > s* = max (B + kbar/s) / A. The scale is s* times a factor in
/// (1, 3], sometimes within 1e-3 of the boundary.
struct GainSample {
    GainVector gains;
    double L = 0.0;
    double M = 0.0;
};

inline GainSample random_admissible(Rng& rng, int n, bool pid = true) {
    const int count = pid ? n + 1 : n;
    std::vector<double> r(static_cast<std::size_t>(count));
    r[0] = 1.0;
    if (count > 1) r[1] = rng.log_uniform(0.3, 5.0);
    for (int i = 2; i < count; ++i) {
        const auto si = static_cast<std::size_t>(i);
        r[si] = rng.uniform(0.05, 0.95) * r[si - 1] * r[si - 1] / (2.0 * r[si - 2]);
    }
    const double L = rng.uniform(0.0, 1.0);
    const double M = rng.uniform(0.0, 1.0);
    double sum = 0.0;
    for (double v : r) sum += v;
    const double K = sum * L + r.back() * M * M;  // kbar / s

    // Terms as (A, B) with value A s^2 - B s.
    std::vector<std::pair<double, double>> terms{{r[0] * r[0], 0.0}};
    for (int i = 1; i + 1 < count; ++i) {
        const auto si = static_cast<std::size_t>(i);
        terms.emplace_back(r[si] * r[si] - 2.0 * r[si - 1] * r[si + 1], 0.0);
    }
    if (count > 1) terms.emplace_back(r.back() * r.back(), r[r.size() - 2]);
    double s_star = 0.0;
    for (const auto& [A, B] : terms) s_star = std::max(s_star, (B + K) / A);
    s_star = std::max(s_star, 1e-3);

    double factor = rng.coin(0.2) ? 1.0 + rng.uniform(1e-6, 1e-3) : rng.uniform(1.0, 3.0);
    for (int attempt = 0;; ++attempt) {
        std::vector<double> k(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) k[i] = s_star * factor * r[i];
        GainVector g = pid ? GainVector::pid(k) : GainVector::pd(k);
        const auto rep = pid ? check_inequality(g, L, M) : check_inequality_pd(g, L, M);
        if (rep.admissible || attempt > 40) return {g, L, M};
        factor *= 1.0 + 1e-3;
    }
}

/// Positive coefficients a_0..a_N with a_N = 1 and log-uniform spread.
inline PolyCoeffs random_positive_poly(Rng& rng, int degree) {
    std::vector<double> a(static_cast<std::size_t>(degree + 1));
    for (auto& v : a) v = rng.log_uniform(0.05, 20.0);
    a.back() = 1.0;
    return PolyCoeffs(a);
}

/// a_i = q^{i^2} times a log-uniform jitter of at most `jitter`.
inline PolyCoeffs geometric_square_poly(int degree, double q, Rng* rng = nullptr, double jitter = 1.0) {
    std::vector<double> a;
    for (int i = 0; i <= degree; ++i)
        a.push_back(std::pow(q, i * i) * (rng ? rng->log_uniform(1.0 / jitter, jitter) : 1.0));
    return PolyCoeffs(a);
}

enum class RootClass { Stable, Unstable, Indeterminate };

/// Root oracle: eigenvalues of the monic companion matrix (dense QR via Eigen).
/// The variable is first rescaled, s = c w with c = (a_0/a_N)^{1/N}, so that
/// widely spread coefficients stay representable. Max real part within `band`
/// of zero is Indeterminate.
inline RootClass root_oracle(const PolyCoeffs& p, double band = 1e-8) {
    const int N = p.degree();
    const double c = p[0] != 0.0 ? std::pow(std::abs(p[0] / p[N]), 1.0 / N) : 1.0;
    std::vector<double> b(static_cast<std::size_t>(N + 1));
    for (int i = 0; i <= N; ++i) b[static_cast<std::size_t>(i)] = p[i] * std::pow(c, i);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i + 1 < N; ++i) C(i, i + 1) = 1.0;
    for (int j = 0; j < N; ++j) C(N - 1, j) = -b[static_cast<std::size_t>(j)] / b.back();
    const Eigen::VectorXcd roots = Eigen::EigenSolver<Eigen::MatrixXd>(C, false).eigenvalues();
    double max_re = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < roots.size(); ++i) max_re = std::max(max_re, c * roots(i).real());
    if (max_re < -band) return RootClass::Stable;
    if (max_re > band) return RootClass::Unstable;
    return RootClass::Indeterminate;
}

inline Eigen::MatrixXd random_symmetric(Rng& rng, int N) {
    Eigen::MatrixXd S(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) S(i, j) = S(j, i) = rng.normal();
    return S;
}

/// Random expression tree over x1..x{n_vars} and u, depth at most `depth`.
inline Expr random_expr(Rng& rng, int n_vars, int depth) {
    if (depth == 0 || rng.coin(0.25)) {
        if (rng.coin(0.5)) {
            const double v = rng.coin(0.3) ? static_cast<double>(rng.integer(0, 9)) : rng.log_uniform(1e-6, 1e6);
            return Expr::number(v);
        }
        return Expr::variable(rng.integer(0, n_vars));
    }
    switch (rng.integer(0, 5)) {
        case 0: return Expr::negate(random_expr(rng, n_vars, depth - 1));
        case 1: return Expr::call(static_cast<Func>(rng.integer(0, 4)), random_expr(rng, n_vars, depth - 1));
        default: {
            static constexpr NodeKind ops[] = {NodeKind::Add, NodeKind::Sub, NodeKind::Mul, NodeKind::Div};
            return Expr::binary(ops[rng.integer(0, 3)], random_expr(rng, n_vars, depth - 1),
                                random_expr(rng, n_vars, depth - 1));
        }
    }
}

/// Classic RK4 for the noise-free closed loop on (x, integral); returns the
/// stacked state every `sample_every` steps, starting at t = 0.
inline std::vector<Vec> rk4_closed_loop(const PlantSpec& plant, const GainVector& g, const Vec& y_star, Vec x,
                                        Vec integral, double horizon, double h, long sample_every) {
    const auto d = static_cast<std::size_t>(plant.d);
    const std::size_t nx = x.size();
    auto rhs = [&](const Vec& s) {
        Vec xs(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(nx));
        Vec is(s.begin() + static_cast<std::ptrdiff_t>(nx), s.end());
        Vec u(d);
        ClosedLoopState st{xs, is, 0.0};
        u = g.is_pid() ? controller_pid(st, g, y_star) : controller_pd(st, g, y_star);
        Vec out(s.size(), 0.0);
        for (std::size_t i = 0; i + d < nx; ++i) out[i] = xs[i + d];
        const Vec f = plant.eval_drift(xs, u);
        for (std::size_t c = 0; c < d; ++c) {
            out[nx - d + c] = f[c];
            out[nx + c] = y_star[c] - xs[c];
        }
        return out;
    };
    Vec s = x;
    s.insert(s.end(), integral.begin(), integral.end());
    const auto steps = static_cast<long>(std::llround(horizon / h));
    auto axpy = [](const Vec& a, double c, const Vec& b) {
        Vec r = a;
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += c * b[i];
        return r;
    };
    std::vector<Vec> out{s};
    for (long k = 0; k < steps; ++k) {
        const Vec k1 = rhs(s);
        const Vec k2 = rhs(axpy(s, h / 2, k1));
        const Vec k3 = rhs(axpy(s, h / 2, k2));
        const Vec k4 = rhs(axpy(s, h, k3));
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        if ((k + 1) % sample_every == 0) out.push_back(s);
    }
    return out;
}

}  // namespace xpid::testing
