#pragma once

// Checks that connect simulations and sampled states back to the analytic bounds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "xpid/certificate.hpp"
#include "xpid/design.hpp"
#include "xpid/model.hpp"
#include "xpid/simulate.hpp"

namespace xpid {

enum class EnvelopeKind {
    LambdaDesign,  // coeff_exp (|x0 - z*|^2 + |u*|^2) e^{-lambda t} + coeff_ss ||g(z*)||^2
    Certificate,   // C1 (|x0 - z*|^2 + |u*|^2) e^{-rate t} + C2 ||g(z*)||^2
};

struct EnvelopeViolation {
    std::size_t index = 0;
    double t = 0.0;
    double value = 0.0;
    double bound = 0.0;  // includes the 3-stderr allowance
};

struct EnvelopeReport {
    bool upper_ok = true;
    std::vector<EnvelopeViolation> violations;
    double min_upper_slack = std::numeric_limits<double>::infinity();  // min over t of bound - value
    bool lower_ok = true;
    double long_run = 0.0;      // time-averaged E|x - z*|^2 over the tail window
    double long_run_se = 0.0;
    double lower_bound = 0.0;   // c3 ||g(z*)||^2
    double tail_start = 0.0;
};

struct EnvelopeOptions {
    EnvelopeKind kind = EnvelopeKind::LambdaDesign;
    double z_score = 3.0;
    double tail_fraction = 0.5;  // tail window is the last half of the horizon
};

/// Compares simulated E|x - z*|^2 with the exponential-plus-floor upper envelope at
/// every recorded time and with the c3 floor over the tail window. Never throws
/// on a violation; the report lists them.
inline EnvelopeReport bound_envelope(const EnsembleStats& stats, const BoundConstants& bc, double initial_dev,
                                     double u_star_norm, double g_norm_at_zstar, const EnvelopeOptions& opt = {}) {
    EnvelopeReport rep;
    double coeff_exp = bc.thm3_coeff_exp, coeff_ss = bc.thm3_coeff_ss, rate = bc.lambda;
    if (opt.kind == EnvelopeKind::Certificate) {
        if (!bc.prop1_C1 || !bc.prop1_C2 || !bc.prop1_rate)
            throw Error(ErrorCode::InvalidArgument, "certificate envelope needs attached certificate constants");
        coeff_exp = *bc.prop1_C1;
        coeff_ss = *bc.prop1_C2;
        rate = *bc.prop1_rate;
    }
    const double start = initial_dev * initial_dev + u_star_norm * u_star_norm;
    const double floor = g_norm_at_zstar * g_norm_at_zstar;
    for (std::size_t r = 0; r < stats.size(); ++r) {
        const double t = stats.times[r];
        const double bound = coeff_exp * start * std::exp(-rate * t) + coeff_ss * floor +
                             opt.z_score * stats.mean_sq_state_dev_se[r];
        const double value = stats.mean_sq_state_dev[r];
        rep.min_upper_slack = std::min(rep.min_upper_slack, bound - value);
        if (value > bound) {
            rep.upper_ok = false;
            rep.violations.push_back({r, t, value, bound});
        }
    }
    if (stats.size() > 0) {
        rep.tail_start = stats.times.back() * (1.0 - opt.tail_fraction);
        const SteadyState ss = steady_state(stats, rep.tail_start);
        rep.long_run = ss.mean_sq_state_dev;
        rep.long_run_se = ss.mean_sq_state_dev_se;
        rep.lower_bound = bc.c3 * floor;
        rep.lower_ok = rep.long_run >= rep.lower_bound - opt.z_score * rep.long_run_se;
    }
    return rep;
}

struct DissipativityReport {
    std::size_t samples = 0;
    std::size_t violations = 0;
    double worst_margin = -std::numeric_limits<double>::infinity();             // max of z'b + c|z|^2
    double worst_normalized = -std::numeric_limits<double>::infinity();         // same divided by |z|^2
    double required_rate = 0.0;                                                 // c = (lambda + 8 M^2)/2
    Vec worst_point;
};

namespace detail {

// Drift of (y_0, ..., y_n) under the PID law u = -sum k_i y_i + u*: (y_1, y_2, ..., y_n, f(x; u)).
inline ShiftedState shifted_drift(const PlantSpec& plant, const Setpoint& sp, const GainVector& g,
                                  const ShiftedState& y) {
    const int n = plant.n, d = plant.d;
    const auto [x, integral] = unshift_coordinates(y, sp, g.k(0));
    Vec u(static_cast<std::size_t>(d));
    for (int c = 0; c < d; ++c) {
        double v = sp.u_star[static_cast<std::size_t>(c)];
        for (int i = 0; i <= n; ++i) v -= g.k(i) * y.block(i)[static_cast<std::size_t>(c)];
        u[static_cast<std::size_t>(c)] = v;
    }
    ShiftedState b(n + 1, d);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c) b.block(i)[static_cast<std::size_t>(c)] = y.block(i + 1)[static_cast<std::size_t>(c)];
    const Vec f = plant.eval_drift(x, u);
    for (int c = 0; c < d; ++c) b.block(n)[static_cast<std::size_t>(c)] = f[static_cast<std::size_t>(c)];
    return b;
}

}  // namespace detail

/// Samples z uniformly on the spheres of radius `radius` and 10 * radius and checks
/// z'b(z) <= -((lambda + 8 M^2)/2)|z|^2 for the z-coordinate closed-loop drift.
/// A sample counts as a violation when the margin exceeds `rel_tol` * |z| |b(z)|.
inline DissipativityReport dissipativity_probe(const PlantSpec& plant, const Setpoint& sp, const GainVector& g,
                                               std::span<const double> betas, double lambda, double M, int samples,
                                               double radius, std::uint64_t seed = 1, double rel_tol = 1e-9) {
    plant.validate();
    if (!g.is_pid()) throw Error(ErrorCode::InvalidArgument, "dissipativity_probe expects PID gains");
    if (g.n() != plant.n) throw Error(ErrorCode::DimensionMismatch, "gains do not match the plant");
    if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
    const int n = plant.n, d = plant.d;
    const std::size_t dim = static_cast<std::size_t>((n + 1) * d);
    DissipativityReport rep;
    rep.required_rate = 0.5 * (lambda + 8.0 * M * M);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (double r : {radius, 10.0 * radius}) {
        for (int s = 0; s < samples; ++s) {
            ZState z(n + 1, d);
            double nrm = 0.0;
            do {
                for (double& v : z.data()) v = normal(rng);
                nrm = norm2(z.data());
            } while (nrm == 0.0);
            for (double& v : z.data()) v *= r / nrm;

            const ShiftedState y = z_inverse(z, betas);
            ShiftedState by = detail::shifted_drift(plant, sp, g, y);
            const ZState bz = z_transform(by, betas);
            double zb = 0.0, z2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                zb += z.data()[i] * bz.data()[i];
                z2 += z.data()[i] * z.data()[i];
            }
            const double margin = zb + rep.required_rate * z2;
            const double scale = std::sqrt(z2) * norm2(bz.data());
            ++rep.samples;
            if (margin > rel_tol * scale) ++rep.violations;
            if (margin > rep.worst_margin) {
                rep.worst_margin = margin;
                rep.worst_point = z.data();
            }
            rep.worst_normalized = std::max(rep.worst_normalized, margin / z2);
        }
    }
    return rep;
}

/// Generator of V(x) = x'Vx at `point`: (dV/dx) b + tr(sigma' (d2V/dx2) sigma)/2
/// = 2 x'V b + tr(sigma' V sigma) for symmetric V. `b` and `sigma` are the drift
/// and diffusion values at the point.
inline double generator_eval(const Eigen::MatrixXd& V, const Eigen::VectorXd& b, const Eigen::MatrixXd& sigma,
                             const Eigen::VectorXd& point) {
    const auto N = point.size();
    if (V.rows() != N || V.cols() != N || b.size() != N || sigma.rows() != N)
        throw Error(ErrorCode::DimensionMismatch, "generator_eval: inconsistent dimensions");
    const Eigen::MatrixXd Vs = 0.5 * (V + V.transpose());
    return 2.0 * point.dot(Vs * b) + (sigma.transpose() * Vs * sigma).trace();
}

}  // namespace xpid
