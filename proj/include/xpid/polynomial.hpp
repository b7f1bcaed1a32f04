#pragma once

// Stability tests for real polynomials with positive coefficients.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "xpid/design.hpp"
#include "xpid/error.hpp"

namespace xpid {

/// Coefficients a_0..a_N in ascending degree.
struct PolyCoeffs {
    std::vector<double> a;

    PolyCoeffs() = default;
    explicit PolyCoeffs(std::vector<double> coeffs) : a(std::move(coeffs)) {
        if (a.size() < 2) throw Error(ErrorCode::InvalidArgument, "polynomial degree must be >= 1");
        if (a.back() == 0.0) throw Error(ErrorCode::InvalidArgument, "leading coefficient must be nonzero");
    }

    [[nodiscard]] int degree() const { return static_cast<int>(a.size()) - 1; }
    [[nodiscard]] double operator[](int i) const { return a[static_cast<std::size_t>(i)]; }

    [[nodiscard]] double eval(double s) const {
        double v = 0.0;
        for (auto it = a.rbegin(); it != a.rend(); ++it) v = v * s + *it;
        return v;
    }

    friend bool operator==(const PolyCoeffs&, const PolyCoeffs&) = default;
};

enum class Verdict { Stable, Unstable, Indeterminate };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable: return "stable";
        case Verdict::Unstable: return "unstable";
        case Verdict::Indeterminate: return "indeterminate";
    }
    return "?";
}

/// Characteristic polynomial of the companion matrix: (k0, ..., kn, 1) for PID,
/// (k1, ..., kn, 1) for PD.
inline PolyCoeffs char_coeffs(const GainVector& g) {
    std::vector<double> a(g.values().begin(), g.values().end());
    a.push_back(1.0);
    return PolyCoeffs(std::move(a));
}

inline void require_positive(const PolyCoeffs& p) {
    for (double c : p.a)
        if (!(c > 0.0)) throw Error(ErrorCode::NonPositiveCoefficient, "all coefficients must be positive");
}

/// alpha_i = a_{i-1} a_{i+2} / (a_i a_{i+1}), i = 1..N-2.
inline std::vector<double> determining_coeffs(const PolyCoeffs& p) {
    if (p.degree() < 3) throw Error(ErrorCode::DegreeTooLow, "determining coefficients need degree >= 3");
    require_positive(p);
    std::vector<double> alpha;
    for (int i = 1; i <= p.degree() - 2; ++i) alpha.push_back(p[i - 1] * p[i + 2] / (p[i] * p[i + 1]));
    return alpha;
}

/// Sufficient test for degree >= 5: every alpha_i < 1/2 and
/// alpha_i + alpha_{i-1} alpha_i alpha_{i+1} <= 1/2 for i = 2..N-3.
/// A false result is inconclusive.
inline bool nie_stable(const PolyCoeffs& p) {
    if (p.degree() < 5) throw Error(ErrorCode::DegreeTooLow, "Nie's test needs degree >= 5; use routh_hurwitz");
    const auto alpha = determining_coeffs(p);  // alpha[0] is alpha_1
    for (double v : alpha)
        if (!(v < 0.5)) return false;
    auto al = [&](int i) { return alpha[static_cast<std::size_t>(i - 1)]; };
    for (int i = 2; i <= p.degree() - 3; ++i)
        if (!(al(i) + al(i - 1) * al(i) * al(i + 1) <= 0.5)) return false;
    return true;
}

/// First column of the Routh array (N + 1 entries). Construction stops at the
/// first exact zero, which is then the last entry returned.
inline std::vector<double> routh_first_column(const PolyCoeffs& p) {
    const int N = p.degree();
    std::vector<double> prev, cur;
    for (int i = N; i >= 0; i -= 2) prev.push_back(p[i]);
    for (int i = N - 1; i >= 0; i -= 2) cur.push_back(p[i]);
    std::vector<double> col{prev.front()};
    if (cur.empty()) return col;
    col.push_back(cur.front());
    for (int row = 2; row <= N; ++row) {
        if (cur.front() == 0.0) return col;
        std::vector<double> next;
        for (std::size_t j = 0; j + 1 < prev.size(); ++j) {
            const double b = j + 1 < cur.size() ? cur[j + 1] : 0.0;
            next.push_back((cur.front() * prev[j + 1] - prev.front() * b) / cur.front());
        }
        if (next.empty()) next.push_back(0.0);
        col.push_back(next.front());
        prev = std::move(cur);
        cur = std::move(next);
    }
    return col;
}

/// Full Routh array test; an exact zero in the first column is Indeterminate.
inline Verdict routh_hurwitz(const PolyCoeffs& p) {
    if (!(p.a.back() > 0.0)) throw Error(ErrorCode::InvalidArgument, "routh_hurwitz needs a positive leading coefficient");
    const auto col = routh_first_column(p);
    bool negative = false;
    for (double v : col) {
        if (v == 0.0) return Verdict::Indeterminate;
        if (v < 0.0) negative = true;
    }
    return negative ? Verdict::Unstable : Verdict::Stable;
}

/// Quartic Hurwitz expression a1 a2 a3 - a1^2 a4 - a0 a3^2 (positive iff stable,
/// given positive coefficients).
inline double quartic_hurwitz_expression(const PolyCoeffs& p) {
    if (p.degree() != 4) throw Error(ErrorCode::InvalidArgument, "quartic expression needs degree 4");
    return p[1] * p[2] * p[3] - p[1] * p[1] * p[4] - p[0] * p[3] * p[3];
}

/// Closed-form Hurwitz conditions for degree 1..4.
inline Verdict hurwitz_closed_form(const PolyCoeffs& p) {
    const int N = p.degree();
    if (N > 4) throw Error(ErrorCode::InvalidArgument, "closed forms cover degree <= 4");
    if (!(p.a.back() > 0.0)) throw Error(ErrorCode::InvalidArgument, "needs a positive leading coefficient");
    for (double c : p.a) {
        if (c < 0.0) return Verdict::Unstable;
        if (c == 0.0) return Verdict::Indeterminate;  // root on or crossing the axis
    }
    double expr = 1.0;
    if (N == 3) expr = p[2] * p[1] - p[0] * p[3];
    if (N == 4) expr = quartic_hurwitz_expression(p);
    if (expr == 0.0) return Verdict::Indeterminate;
    return expr > 0.0 ? Verdict::Stable : Verdict::Unstable;
}

/// Hurwitz test for the companion matrix of the gains: closed forms up to
/// degree 4, Nie's sufficient test above that with a Routh fallback.
inline Verdict is_hurwitz(const GainVector& g) {
    const PolyCoeffs p = char_coeffs(g);
    if (p.degree() <= 4) return hurwitz_closed_form(p);
    if (nie_stable(p)) return Verdict::Stable;
    return routh_hurwitz(p);
}

}  // namespace xpid
