#pragma once

// Built-in plants and expression-defined scalar plants.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "xpid/error.hpp"
#include "xpid/expr.hpp"
#include "xpid/model.hpp"

namespace xpid {

/// Third-order benchmark: f = a sin x1 + b x2 + c x3 + d + u + mu tanh(u), g = sigma.
struct Sec6Params {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0, mu = 0.0, sigma = 0.0;
};

inline PlantSpec sec6_plant(const Sec6Params& p) {
    if (std::abs(p.a) > 0.5 || std::abs(p.b) > 0.5 || std::abs(p.c) > 0.5)
        throw Error(ErrorCode::InvalidArgument, "sec6 plant needs |a|, |b|, |c| <= 1/2");
    if (!(p.mu >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sec6 plant needs mu >= 0");
    for (double v : {p.a, p.b, p.c, p.d, p.mu, p.sigma})
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "sec6 parameters must be finite");
    PlantSpec s;
    s.name = "sec6";
    s.n = 3;
    s.d = 1;
    s.m = 1;
    s.drift = [p](std::span<const double> x, std::span<const double> u, std::span<double> out) {
        out[0] = p.a * std::sin(x[0]) + p.b * x[1] + p.c * x[2] + p.d + u[0] + p.mu * std::tanh(u[0]);
    };
    s.diffusion = [sigma = p.sigma](std::span<const double>, std::span<double> out) { out[0] = sigma; };
    // |a cos x1|, |b|, |c| <= 1/2 bound the state gradient by sqrt(3)/2; df/du >= 1.
    s.lipschitz_L = std::sqrt(3.0) / 2.0;
    s.lipschitz_M = 0.0;
    s.gain_lower_b = 1.0;
    return s;
}

/// Integrator chain of degree n with f = u + offset and constant diffusion sigma.
inline PlantSpec chain_plant(int n, double offset = 0.0, double sigma = 0.0) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "chain plant needs n >= 1");
    PlantSpec s;
    s.name = "chain";
    s.n = n;
    s.drift = [offset](std::span<const double>, std::span<const double> u, std::span<double> out) {
        out[0] = u[0] + offset;
    };
    s.diffusion = [sigma](std::span<const double>, std::span<double> out) { out[0] = sigma; };
    return s;
}

/// Ornstein-Uhlenbeck process dx = -theta x dt + sigma dB; the input is ignored.
inline PlantSpec ou_plant(double sigma, double theta = 1.0) {
    if (!(theta > 0.0)) throw Error(ErrorCode::InvalidArgument, "ou plant needs theta > 0");
    PlantSpec s;
    s.name = "ou";
    s.n = 1;
    s.drift = [theta](std::span<const double> x, std::span<const double>, std::span<double> out) {
        out[0] = -theta * x[0];
    };
    s.diffusion = [sigma](std::span<const double>, std::span<double> out) { out[0] = sigma; };
    s.lipschitz_L = theta;
    return s;
}

/// Scalar plant (d = m = 1) from expression text. The diffusion may not use u.
/// L, M and b are the user's assertions; they are not derived from the text.
inline PlantSpec expression_plant(int n, const std::string& drift, const std::string& diffusion, double L, double M,
                                  double b_lower = 1.0) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "expression plant needs n >= 1");
    auto f = std::make_shared<const Expr>(parse_expr(drift, n, true));
    auto g = std::make_shared<const Expr>(parse_expr(diffusion, n, false));
    PlantSpec s;
    s.name = "expression";
    s.n = n;
    s.drift = [f](std::span<const double> x, std::span<const double> u, std::span<double> out) {
        out[0] = f->eval(x, u[0]);
    };
    s.diffusion = [g](std::span<const double> x, std::span<double> out) { out[0] = g->eval(x, 0.0); };
    s.lipschitz_L = L;
    s.lipschitz_M = M;
    s.gain_lower_b = b_lower;
    s.validate();
    return s;
}

/// Parameters accepted by each builtin name, with defaults.
inline const std::map<std::string, std::map<std::string, double>>& builtin_params() {
    static const std::map<std::string, std::map<std::string, double>> table{
        {"sec6", {{"a", 0.0}, {"b", 0.0}, {"c", 0.0}, {"d", 0.0}, {"mu", 0.0}, {"sigma", 0.0}}},
        {"chain", {{"n", 1.0}, {"offset", 0.0}, {"sigma", 0.0}}},
        {"ou", {{"sigma", 1.0}, {"theta", 1.0}}},
    };
    return table;
}

inline PlantSpec make_builtin(const std::string& name, const std::map<std::string, double>& params) {
    const auto& table = builtin_params();
    const auto it = table.find(name);
    if (it == table.end()) throw Error(ErrorCode::InvalidArgument, "unknown builtin plant '" + name + "'");
    std::map<std::string, double> p = it->second;
    for (const auto& [k, v] : params) {
        if (!p.count(k)) throw Error(ErrorCode::InvalidArgument, "plant '" + name + "' has no parameter '" + k + "'");
        p[k] = v;
    }
    if (name == "sec6") return sec6_plant({p["a"], p["b"], p["c"], p["d"], p["mu"], p["sigma"]});
    if (name == "chain") {
        const double n = p["n"];
        if (n != std::floor(n) || n < 1) throw Error(ErrorCode::InvalidArgument, "chain parameter n must be a positive integer");
        return chain_plant(static_cast<int>(n), p["offset"], p["sigma"]);
    }
    return ou_plant(p["sigma"], p["theta"]);
}

}  // namespace xpid
