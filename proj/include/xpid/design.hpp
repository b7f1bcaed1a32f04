#pragma once

// Extended PID / PD gain vectors: admissibility inequality, closed-form design
// rules and the explicit constants of the tracking-error bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xpid/error.hpp"

namespace xpid {

enum class ControllerKind { PID, PD };

inline const char* to_string(ControllerKind kind) { return kind == ControllerKind::PID ? "PID" : "PD"; }

/// Positive controller gains. PID stores (k0, k1, ..., kn); PD stores (k1, ..., kn).
class GainVector {
public:
    static GainVector pid(std::vector<double> k) {
        if (k.size() < 2) throw Error(ErrorCode::InvalidArgument, "PID gains need at least k0, k1");
        return GainVector(ControllerKind::PID, std::move(k));
    }
    static GainVector pd(std::vector<double> k) {
        if (k.empty()) throw Error(ErrorCode::InvalidArgument, "PD gains need at least k1");
        return GainVector(ControllerKind::PD, std::move(k));
    }

    [[nodiscard]] ControllerKind kind() const { return kind_; }
    [[nodiscard]] bool is_pid() const { return kind_ == ControllerKind::PID; }
    /// Relative degree n the gains are designed for.
    [[nodiscard]] int n() const { return static_cast<int>(k_.size()) - (is_pid() ? 1 : 0); }
    [[nodiscard]] std::size_t size() const { return k_.size(); }
    [[nodiscard]] std::span<const double> values() const { return k_; }
    /// Gain with its controller index: k(0) is the integral gain (PID only).
    [[nodiscard]] double k(int i) const {
        const int offset = is_pid() ? 0 : 1;
        if (i < offset || i > n()) throw Error(ErrorCode::InvalidArgument, "gain index out of range");
        return k_[static_cast<std::size_t>(i - offset)];
    }
    /// Index of the first stored gain (0 for PID, 1 for PD).
    [[nodiscard]] int first_index() const { return is_pid() ? 0 : 1; }

    friend bool operator==(const GainVector&, const GainVector&) = default;

private:
    GainVector(ControllerKind kind, std::vector<double> k) : kind_(kind), k_(std::move(k)) {
        for (double v : k_)
            if (!(v > 0.0) || !std::isfinite(v))
                throw Error(ErrorCode::NonPositiveGain, "all gains must be positive and finite");
    }

    ControllerKind kind_;
    std::vector<double> k_;
};

struct BindingTerm {
    std::string name;
    double value = 0.0;
};

struct DesignReport {
    bool admissible = false;
    BindingTerm binding_term;
    double kbar = 0.0;   // sum k_i L + k_n M^2 (k-hat for PD)
    double margin = 0.0; // binding_term.value - kbar
    std::vector<BindingTerm> terms;
};

namespace detail {

inline std::string k_name(int i) { return "k" + std::to_string(i); }

// Shared evaluation for PID (first = 0) and PD (first = 1) gain vectors:
// min{ c_first^2 b, (c_i^2 - 2 c_{i-1} c_{i+1}) b for first < i < n, c_n^2 b - c_{n-1} }.
// For n - first == 0 (PD with n = 1) only the leading square remains.
inline DesignReport evaluate_inequality(const GainVector& g, double L, double M, double b) {
    if (!(L >= 0.0) || !(M >= 0.0)) throw Error(ErrorCode::InvalidArgument, "L and M must be nonnegative");
    if (!(b > 0.0)) throw Error(ErrorCode::InvalidArgument, "control-gain lower bound must be positive");
    const int first = g.first_index();
    const int n = g.n();
    DesignReport r;
    double sum = 0.0;
    for (int i = first; i <= n; ++i) sum += g.k(i);
    r.kbar = sum * L + g.k(n) * M * M;

    r.terms.push_back({k_name(first) + "^2", g.k(first) * g.k(first) * b});
    for (int i = first + 1; i <= n - 1; ++i) {
        const double v = (g.k(i) * g.k(i) - 2.0 * g.k(i - 1) * g.k(i + 1)) * b;
        r.terms.push_back({k_name(i) + "^2-2*" + k_name(i - 1) + "*" + k_name(i + 1), v});
    }
    if (n > first)
        r.terms.push_back({k_name(n) + "^2-" + k_name(n - 1), g.k(n) * g.k(n) * b - g.k(n - 1)});

    r.binding_term = r.terms.front();
    for (const auto& t : r.terms)
        if (t.value < r.binding_term.value) r.binding_term = t;
    r.margin = r.binding_term.value - r.kbar;
    r.admissible = r.margin > 0.0;
    return r;
}

}  // namespace detail

/// Quadratic admissibility test for extended PID gains. `b_lower` weakens the
/// unit lower bound on the symmetric part of df/du.
inline DesignReport check_inequality(const GainVector& g, double L, double M, double b_lower = 1.0) {
    if (!g.is_pid()) throw Error(ErrorCode::InvalidArgument, "check_inequality expects PID gains");
    return detail::evaluate_inequality(g, L, M, b_lower);
}

inline DesignReport check_inequality_pd(const GainVector& g, double L, double M) {
    if (g.is_pid()) throw Error(ErrorCode::InvalidArgument, "check_inequality_pd expects PD gains");
    return detail::evaluate_inequality(g, L, M, 1.0);
}

/// k0 = k, k_i = 3^{-i(i+1)/2} k.
inline GainVector geometric_gains(double k, int n) {
    if (!(k > 0.0)) throw Error(ErrorCode::NonPositiveGain, "k must be positive");
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "relative degree must be >= 1");
    std::vector<double> g(static_cast<std::size_t>(n + 1));
    g[0] = k;
    for (int i = 1; i <= n; ++i) g[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i - 1)] / std::pow(3.0, i);
    return GainVector::pid(std::move(g));
}

/// The pattern k0 = k3 = k, k1 = k2 = 2.5k used for the third-order benchmark plant.
inline GainVector sec6_pattern_gains(double k) { return GainVector::pid({k, 2.5 * k, 2.5 * k, k}); }

struct LambdaOverrides {
    std::optional<std::vector<double>> betas;
    std::optional<double> k;
};

struct LambdaDesign {
    GainVector gains;
    std::vector<double> betas;
    double k = 0.0;
    double k_threshold = 0.0;  // strict lower bound on k for these betas
};

namespace detail {
// Relative margin required by the strict design inequalities; inputs within
// round-off of a boundary (beta = 0.4, 0.1 with k = 3750) count as on it.
inline constexpr double kStrictSlack = 1e-12;
}  // namespace detail

/// Lower bound on k for the beta-product design (with the b-weakened form).
inline double lambda_k_threshold(std::span<const double> betas, double lambda, double L, double M, double b_lower) {
    double prod = 1.0;
    for (double b : betas) prod *= b;
    const double denom = lambda + 8.0 * M * M;
    return (1.0 + 3.0 * L + 2.0 * L * L / denom) / (prod * prod * b_lower);
}

/// Gains k_i = (prod_{j<=i} beta_j) k from the lambda design rule. Without
/// overrides: beta_1 = 0.9 min(1, 1/(n(lambda+8M^2))), beta_i = 0.9 beta_{i-1}/n,
/// k = 1.1 x threshold.
inline LambdaDesign lambda_gains(double lambda, double L, double M, int n, double b_lower = 1.0,
                                 const LambdaOverrides& overrides = {}) {
    if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
    if (!(L >= 0.0) || !(M >= 0.0)) throw Error(ErrorCode::InvalidArgument, "L and M must be nonnegative");
    if (!(b_lower > 0.0)) throw Error(ErrorCode::InvalidArgument, "control-gain lower bound must be positive");
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "relative degree must be >= 1");

    const double denom = lambda + 8.0 * M * M;
    const double beta1_bound = std::min(1.0, 1.0 / (n * denom));
    std::vector<double> betas;
    if (overrides.betas) {
        betas = *overrides.betas;
        if (static_cast<int>(betas.size()) != n) throw Error(ErrorCode::InvalidBeta, "need exactly n betas");
        for (double b : betas)
            if (!(b > 0.0)) throw Error(ErrorCode::InvalidBeta, "betas must be positive");
        if (!(betas[0] < beta1_bound * (1.0 - detail::kStrictSlack)))
            throw Error(ErrorCode::InvalidBeta, "beta_1 must be < min(1, 1/(n(lambda+8M^2)))");
        for (int i = 1; i < n; ++i) {
            const auto si = static_cast<std::size_t>(i);
            if (!(betas[si] < betas[si - 1] / n * (1.0 - detail::kStrictSlack)))
                throw Error(ErrorCode::InvalidBeta, "beta_" + std::to_string(i + 1) + " must be < beta_" + std::to_string(i) + "/n");
        }
    } else {
        betas.resize(static_cast<std::size_t>(n));
        betas[0] = 0.9 * beta1_bound;
        for (int i = 1; i < n; ++i) betas[static_cast<std::size_t>(i)] = 0.9 * betas[static_cast<std::size_t>(i - 1)] / n;
    }

    const double threshold = lambda_k_threshold(betas, lambda, L, M, b_lower);
    // The sufficient bound (beta^_{n-1} + 3L + beta^_n M^2) / (beta^_n^2 b) is below
    // `threshold` for n >= 2 but not for n = 1 with M > 0.
    double prod_n = 1.0;
    for (double b : betas) prod_n *= b;
    const double prod_nm1 = prod_n / betas.back();
    const double sufficient = (prod_nm1 + 3.0 * L + prod_n * M * M) / (prod_n * prod_n * b_lower);
    double k = 1.1 * std::max(threshold, sufficient);
    if (overrides.k) {
        k = *overrides.k;
        if (!(k > threshold * (1.0 + detail::kStrictSlack)))
            throw Error(ErrorCode::InvalidBeta, "k must exceed " + std::to_string(threshold));
    }

    std::vector<double> gains(static_cast<std::size_t>(n + 1));
    gains[0] = k;
    double prod = 1.0;
    for (int i = 1; i <= n; ++i) {
        prod *= betas[static_cast<std::size_t>(i - 1)];
        gains[static_cast<std::size_t>(i)] = prod * k;
    }
    GainVector g = GainVector::pid(std::move(gains));
    if (!detail::evaluate_inequality(g, L, M, b_lower).admissible)
        throw Error(ErrorCode::InvalidBeta, "overrides give gains that fail the admissibility inequality");
    return {std::move(g), std::move(betas), k, threshold};
}

struct BoundConstants {
    double thm3_coeff_exp = 0.0;  // 4 n^3 k0^2 / kn^2
    double thm3_coeff_ss = 0.0;   // 4 n / lambda
    double lambda = 0.0;
    double c3 = 0.0;              // lower steady-state coefficient
    std::optional<double> prop1_C1;
    std::optional<double> prop1_C2;
    std::optional<double> prop1_rate;
};

/// Constants of the lambda-design tracking bounds. R bounds ||df/du||.
inline BoundConstants bound_constants(const GainVector& g, double lambda, int n, double L, double M, double R) {
    if (!g.is_pid()) throw Error(ErrorCode::InvalidArgument, "bound constants are defined for PID gains");
    if (g.n() != n) throw Error(ErrorCode::DimensionMismatch, "gain vector does not match n");
    if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
    BoundConstants bc;
    const double k0 = g.k(0), kn = g.k(n);
    bc.lambda = lambda;
    bc.thm3_coeff_exp = 4.0 * n * n * n * k0 * k0 / (kn * kn);
    bc.thm3_coeff_ss = 4.0 * n / lambda;
    double sumsq = 0.0;
    for (double v : g.values()) sumsq += v * v;
    bc.c3 = lambda / (4.0 * (2.0 + 2.0 * L + M * M) * lambda + 64.0 * (n + 1) * R * R * sumsq);
    return bc;
}

}  // namespace xpid
