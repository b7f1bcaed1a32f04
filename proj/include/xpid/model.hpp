#pragma once

// Plant description, equilibrium input and the coordinate changes used by the
// closed-loop analysis.
//
// State layout: x in R^{n*d} is stored as n consecutive blocks x_1..x_n, each of
// length d. Diffusion matrices are d x m, row-major.

#include <cmath>
#include <cstddef>
#include <functional>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xpid/error.hpp"

namespace xpid {

using Vec = std::vector<double>;

/// f(x; u) -> out, out has length d.
using DriftFn = std::function<void(std::span<const double> x, std::span<const double> u,
                                   std::span<double> out)>;
/// g(x) -> out, out is d x m row-major.
using DiffusionFn = std::function<void(std::span<const double> x, std::span<double> out)>;

struct PlantSpec {
    std::string name = "plant";
    int n = 1;  // relative degree
    int d = 1;  // output dimension
    int m = 1;  // Brownian dimension
    DriftFn drift;
    DiffusionFn diffusion;
    double lipschitz_L = 0.0;
    double lipschitz_M = 0.0;
    double gain_lower_b = 1.0;

    [[nodiscard]] std::size_t state_size() const { return static_cast<std::size_t>(n * d); }

    void validate() const {
        if (n < 1 || d < 1 || m < 1)
            throw Error(ErrorCode::InvalidArgument, "plant dimensions n, d, m must be >= 1");
        if (!(lipschitz_L >= 0.0) || !(lipschitz_M >= 0.0))
            throw Error(ErrorCode::InvalidArgument, "Lipschitz constants L, M must be >= 0");
        if (!(gain_lower_b > 0.0))
            throw Error(ErrorCode::InvalidArgument, "control-gain lower bound must be > 0");
        if (!drift || !diffusion)
            throw Error(ErrorCode::InvalidArgument, "plant drift and diffusion must be set");
    }

    /// Convenience wrappers that allocate; the simulator calls drift/diffusion directly.
    [[nodiscard]] Vec eval_drift(std::span<const double> x, std::span<const double> u) const {
        Vec out(static_cast<std::size_t>(d), 0.0);
        drift(x, u, out);
        return out;
    }
    [[nodiscard]] Vec eval_diffusion(std::span<const double> x) const {
        Vec out(static_cast<std::size_t>(d * m), 0.0);
        diffusion(x, out);
        return out;
    }
};

inline bool all_finite(std::span<const double> v) {
    for (double a : v)
        if (!std::isfinite(a)) return false;
    return true;
}

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
}

/// Target output, the matching state z* = (y*, 0, ..., 0) and the equilibrium input u*.
struct Setpoint {
    Vec y_star;
    Vec z_star;
    Vec u_star;
};

/// Blocks y_0..y_n of the shifted coordinates, each of length d.
/// y_0 is the integral coordinate (including the u*/k0 offset).
class BlockState {
public:
    BlockState() = default;
    BlockState(int blocks, int d) : blocks_(blocks), d_(d), data_(static_cast<std::size_t>(blocks * d), 0.0) {}

    [[nodiscard]] int blocks() const { return blocks_; }
    [[nodiscard]] int dim() const { return d_; }
    [[nodiscard]] std::span<double> block(int i) {
        return {data_.data() + static_cast<std::size_t>(i * d_), static_cast<std::size_t>(d_)};
    }
    [[nodiscard]] std::span<const double> block(int i) const {
        return {data_.data() + static_cast<std::size_t>(i * d_), static_cast<std::size_t>(d_)};
    }
    [[nodiscard]] const Vec& data() const { return data_; }
    [[nodiscard]] Vec& data() { return data_; }

    friend bool operator==(const BlockState&, const BlockState&) = default;

private:
    int blocks_ = 0;
    int d_ = 0;
    Vec data_;
};

/// Shifted coordinates (y_0, y_1, ..., y_n).
struct ShiftedState : BlockState {
    using BlockState::BlockState;
};

/// Transformed coordinates (z_0, ..., z_n).
struct ZState : BlockState {
    using BlockState::BlockState;
};

struct EquilibriumOptions {
    double tolerance = 1e-10;
    int max_iterations = 400;
};

namespace detail {

inline void check_finite(std::span<const double> v, const char* what) {
    if (!all_finite(v)) throw Error(ErrorCode::NonFinite, std::string("plant returned non-finite ") + what);
}

inline double solve_scalar(const PlantSpec& plant, std::span<const double> z, const EquilibriumOptions& opt) {
    double u = 0.0;
    double out = 0.0;
    auto F = [&](double v) {
        plant.drift(z, std::span<const double>(&v, 1), std::span<double>(&out, 1));
        if (!std::isfinite(out)) throw Error(ErrorCode::NonFinite, "plant returned non-finite drift");
        return out;
    };
    double f0 = F(u);
    if (std::abs(f0) <= opt.tolerance) return u;

    // f is increasing in u, so the root lies on the side opposite to sign(f(0)).
    double lo = 0.0, hi = 0.0, flo = f0, fhi = f0;
    double step = 1.0;
    int it = 0;
    if (f0 > 0.0) {
        for (; it < opt.max_iterations; ++it) {
            lo = -step;
            flo = F(lo);
            if (flo <= 0.0) break;
            hi = lo;
            fhi = flo;
            step *= 2.0;
        }
        if (flo > 0.0) throw Error(ErrorCode::NoConvergence, "equilibrium bracket expansion failed");
    } else {
        for (; it < opt.max_iterations; ++it) {
            hi = step;
            fhi = F(hi);
            if (fhi >= 0.0) break;
            lo = hi;
            flo = fhi;
            step *= 2.0;
        }
        if (fhi < 0.0) throw Error(ErrorCode::NoConvergence, "equilibrium bracket expansion failed");
    }
    if (std::abs(flo) <= opt.tolerance) return lo;
    if (std::abs(fhi) <= opt.tolerance) return hi;

    for (; it < opt.max_iterations; ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;  // interval exhausted
        const double fm = F(mid);
        if (std::abs(fm) <= opt.tolerance) return mid;
        if (fm < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    throw Error(ErrorCode::NoConvergence, "bisection did not reach the residual tolerance");
}

inline Vec solve_newton(const PlantSpec& plant, std::span<const double> z, const EquilibriumOptions& opt) {
    const int d = plant.d;
    Vec u(static_cast<std::size_t>(d), 0.0);
    Vec f(static_cast<std::size_t>(d)), f_trial(static_cast<std::size_t>(d)), u_trial(static_cast<std::size_t>(d));
    auto F = [&](const Vec& v, Vec& out) {
        plant.drift(z, v, out);
        check_finite(out, "drift");
        return norm2(out);
    };
    double res = F(u, f);
    Eigen::MatrixXd J(d, d);
    Eigen::VectorXd rhs(d);
    const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    for (int it = 0; it < opt.max_iterations; ++it) {
        if (res <= opt.tolerance) return u;
        for (int j = 0; j < d; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            const double h = sqrt_eps * (1.0 + std::abs(u[sj]));
            u_trial = u;
            u_trial[sj] += h;
            F(u_trial, f_trial);
            for (int i = 0; i < d; ++i) J(i, j) = (f_trial[static_cast<std::size_t>(i)] - f[static_cast<std::size_t>(i)]) / h;
        }
        for (int i = 0; i < d; ++i) rhs(i) = -f[static_cast<std::size_t>(i)];
        const Eigen::VectorXd delta = J.partialPivLu().solve(rhs);
        if (!delta.allFinite()) throw Error(ErrorCode::NonFinite, "singular finite-difference Jacobian");

        // Backtracking on |f|: the symmetric part of df/du dominates b*I, so a
        // descent step exists whenever the Jacobian estimate is accurate.
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (int i = 0; i < d; ++i) u_trial[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] + alpha * delta(i);
            const double r = F(u_trial, f_trial);
            if (r < res) {
                u = u_trial;
                f = f_trial;
                res = r;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    if (res <= opt.tolerance) return u;
    throw Error(ErrorCode::NoConvergence, "damped Newton did not reach the residual tolerance");
}

}  // namespace detail

/// Solves f(z*; u*) = 0 for the unique equilibrium input.
inline Setpoint solve_equilibrium(const PlantSpec& plant, std::span<const double> y_star,
                                  const EquilibriumOptions& opt = {}) {
    plant.validate();
    if (static_cast<int>(y_star.size()) != plant.d)
        throw Error(ErrorCode::DimensionMismatch, "setpoint length must equal d");
    if (!all_finite(y_star)) throw Error(ErrorCode::NonFinite, "setpoint is not finite");

    Setpoint sp;
    sp.y_star.assign(y_star.begin(), y_star.end());
    sp.z_star.assign(plant.state_size(), 0.0);
    std::copy(y_star.begin(), y_star.end(), sp.z_star.begin());
    if (plant.d == 1)
        sp.u_star = {detail::solve_scalar(plant, sp.z_star, opt)};
    else
        sp.u_star = detail::solve_newton(plant, sp.z_star, opt);
    return sp;
}

inline Setpoint solve_equilibrium(const PlantSpec& plant, double y_star, const EquilibriumOptions& opt = {}) {
    return solve_equilibrium(plant, std::span<const double>(&y_star, 1), opt);
}

/// y_0 = u*/k0 - integral(e), y_1 = x_1 - y*, y_i = x_i (i >= 2).
/// `integral` is the accumulated error e = y* - x_1, as carried by the controller,
/// so that u = -sum k_i y_i + u* reproduces the extended PID output exactly.
inline ShiftedState shifted_coordinates(std::span<const double> x, std::span<const double> integral,
                                        const Setpoint& sp, double k0) {
    const auto d = static_cast<int>(sp.y_star.size());
    if (d == 0 || x.size() % static_cast<std::size_t>(d) != 0 || integral.size() != static_cast<std::size_t>(d))
        throw Error(ErrorCode::DimensionMismatch, "shifted_coordinates: inconsistent dimensions");
    if (!(k0 > 0.0)) throw Error(ErrorCode::NonPositiveGain, "k0 must be positive");
    const int n = static_cast<int>(x.size()) / d;
    ShiftedState y(n + 1, d);
    for (int c = 0; c < d; ++c) {
        const auto sc = static_cast<std::size_t>(c);
        y.block(0)[sc] = sp.u_star[sc] / k0 - integral[sc];
        y.block(1)[sc] = x[sc] - sp.y_star[sc];
    }
    for (int i = 2; i <= n; ++i)
        for (int c = 0; c < d; ++c)
            y.block(i)[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>((i - 1) * d + c)];
    return y;
}

/// Inverse of shifted_coordinates: recovers (x, integral).
inline std::pair<Vec, Vec> unshift_coordinates(const ShiftedState& y, const Setpoint& sp, double k0) {
    const int d = y.dim();
    const int n = y.blocks() - 1;
    Vec x(static_cast<std::size_t>(n * d)), integral(static_cast<std::size_t>(d));
    for (int c = 0; c < d; ++c) {
        const auto sc = static_cast<std::size_t>(c);
        integral[sc] = sp.u_star[sc] / k0 - y.block(0)[sc];
        x[sc] = y.block(1)[sc] + sp.y_star[sc];
    }
    for (int i = 2; i <= n; ++i)
        for (int c = 0; c < d; ++c) x[static_cast<std::size_t>((i - 1) * d + c)] = y.block(i)[static_cast<std::size_t>(c)];
    return {x, integral};
}

namespace detail {
inline void check_betas(std::span<const double> betas, int n) {
    if (static_cast<int>(betas.size()) != n)
        throw Error(ErrorCode::DimensionMismatch, "need exactly n betas");
    for (double b : betas)
        if (!(b > 0.0) || !std::isfinite(b)) throw Error(ErrorCode::DegenerateBeta, "every beta must be positive");
}
}  // namespace detail

/// z_0 = y_0, z_i = z_{i-1} + (prod_{j<=i} beta_j) y_i.
inline ZState z_transform(const ShiftedState& y, std::span<const double> betas) {
    const int n = y.blocks() - 1;
    detail::check_betas(betas, n);
    const int d = y.dim();
    ZState z(n + 1, d);
    double prod = 1.0;
    for (int c = 0; c < d; ++c) z.block(0)[static_cast<std::size_t>(c)] = y.block(0)[static_cast<std::size_t>(c)];
    for (int i = 1; i <= n; ++i) {
        prod *= betas[static_cast<std::size_t>(i - 1)];
        for (int c = 0; c < d; ++c) {
            const auto sc = static_cast<std::size_t>(c);
            z.block(i)[sc] = z.block(i - 1)[sc] + prod * y.block(i)[sc];
        }
    }
    return z;
}

inline ShiftedState z_inverse(const ZState& z, std::span<const double> betas) {
    const int n = z.blocks() - 1;
    detail::check_betas(betas, n);
    const int d = z.dim();
    ShiftedState y(n + 1, d);
    double prod = 1.0;
    for (int c = 0; c < d; ++c) y.block(0)[static_cast<std::size_t>(c)] = z.block(0)[static_cast<std::size_t>(c)];
    for (int i = 1; i <= n; ++i) {
        prod *= betas[static_cast<std::size_t>(i - 1)];
        for (int c = 0; c < d; ++c) {
            const auto sc = static_cast<std::size_t>(c);
            y.block(i)[sc] = (z.block(i)[sc] - z.block(i - 1)[sc]) / prod;
        }
    }
    return y;
}

/// Result of sampling random point pairs against the asserted Lipschitz constants.
/// A sampler can only refute L or M, never confirm them.
struct LipschitzProbe {
    double worst_drift_ratio = 0.0;      // max |f(x;u)-f(y;u)| / |x-y|
    double worst_diffusion_ratio = 0.0;  // max ||g(x)-g(y)||_HS / |x-y|
    bool drift_refuted = false;
    bool diffusion_refuted = false;
};

inline LipschitzProbe falsify_lipschitz(const PlantSpec& plant, int samples, double radius, std::uint64_t seed) {
    plant.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-radius, radius);
    const std::size_t N = plant.state_size();
    const auto d = static_cast<std::size_t>(plant.d);
    Vec x(N), y(N), u(d), fx(d), fy(d), gx(d * static_cast<std::size_t>(plant.m)), gy(gx.size());
    LipschitzProbe probe;
    for (int s = 0; s < samples; ++s) {
        for (auto& v : x) v = unif(rng);
        for (auto& v : u) v = unif(rng);
        // Mix far-apart and nearby pairs.
        const double scale = (s % 2 == 0) ? 1.0 : 1e-3;
        for (std::size_t i = 0; i < N; ++i) y[i] = x[i] + scale * unif(rng);
        double dx = 0.0;
        for (std::size_t i = 0; i < N; ++i) dx += (x[i] - y[i]) * (x[i] - y[i]);
        dx = std::sqrt(dx);
        if (dx == 0.0) continue;
        plant.drift(x, u, fx);
        plant.drift(y, u, fy);
        plant.diffusion(x, gx);
        plant.diffusion(y, gy);
        double df = 0.0, dg = 0.0;
        for (std::size_t i = 0; i < d; ++i) df += (fx[i] - fy[i]) * (fx[i] - fy[i]);
        for (std::size_t i = 0; i < gx.size(); ++i) dg += (gx[i] - gy[i]) * (gx[i] - gy[i]);
        probe.worst_drift_ratio = std::max(probe.worst_drift_ratio, std::sqrt(df) / dx);
        probe.worst_diffusion_ratio = std::max(probe.worst_diffusion_ratio, std::sqrt(dg) / dx);
    }
    // Relative slack for round-off in the difference quotients.
    probe.drift_refuted = probe.worst_drift_ratio > plant.lipschitz_L * (1.0 + 1e-6) + 1e-9;
    probe.diffusion_refuted = probe.worst_diffusion_ratio > plant.lipschitz_M * (1.0 + 1e-6) + 1e-9;
    return probe;
}

}  // namespace xpid
