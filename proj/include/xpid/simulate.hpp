#pragma once

// Euler-Maruyama Monte Carlo for the closed loop. Paths run on any number of
// workers; moments are reduced in path order so results do not depend on it.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "xpid/design.hpp"
#include "xpid/error.hpp"
#include "xpid/model.hpp"
#include "xpid/rng.hpp"

namespace xpid {

enum class ControllerMode { PID, PD, OpenLoop };

inline const char* to_string(ControllerMode m) {
    switch (m) {
        case ControllerMode::PID: return "PID";
        case ControllerMode::PD: return "PD";
        case ControllerMode::OpenLoop: return "OpenLoop";
    }
    return "?";
}

inline constexpr double kDivergenceThreshold = 1e12;

struct SimConfig {
    double dt = 1e-3;
    double horizon = 30.0;
    std::size_t paths = 1;
    std::uint64_t seed = 0;
    int record_stride = 1;
    ControllerMode controller = ControllerMode::PID;
    Vec initial_state;     // length n*d; empty means z*
    Vec initial_integral;  // length d; empty means zero
    unsigned workers = 0;  // 0: XPID_WORKERS or hardware concurrency

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "sim.dt must be positive");
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw Error(ErrorCode::InvalidArgument, "sim.horizon must be positive");
        if (dt > horizon) throw Error(ErrorCode::InvalidArgument, "sim.dt must not exceed sim.horizon");
        if (paths < 1) throw Error(ErrorCode::InvalidArgument, "sim.paths must be >= 1");
        if (record_stride < 1) throw Error(ErrorCode::InvalidArgument, "sim.record_stride must be >= 1");
    }

    [[nodiscard]] std::int64_t steps() const { return std::llround(horizon / dt); }
};

inline unsigned default_workers() {
    if (const char* env = std::getenv("XPID_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Reference point for open-loop runs: z* = (y*, 0, ..., 0) with u* = 0 (no equilibrium solve).
inline Setpoint open_loop_setpoint(const PlantSpec& plant, const Vec& y_star) {
    if (y_star.size() != static_cast<std::size_t>(plant.d))
        throw Error(ErrorCode::DimensionMismatch, "y_star must have d entries");
    Vec z(plant.state_size(), 0.0);
    std::copy(y_star.begin(), y_star.end(), z.begin());
    return {y_star, z, Vec(y_star.size(), 0.0)};
}

struct ClosedLoopState {
    Vec x;         // n blocks of length d
    Vec integral;  // accumulated e = y* - x_1
    double t = 0.0;
};

namespace detail {

// u = k0 * integral + k1 e - sum_{i>=2} k_i x_i, with e = y* - x_1; k0 term only for PID.
inline void feedback(std::span<const double> x, std::span<const double> integral, const GainVector& g,
                     std::span<const double> y_star, std::span<double> u) {
    const std::size_t d = y_star.size();
    const int n = g.n();
    for (std::size_t c = 0; c < d; ++c) {
        double v = g.k(1) * (y_star[c] - x[c]);
        for (int i = 2; i <= n; ++i) v -= g.k(i) * x[static_cast<std::size_t>(i - 1) * d + c];
        if (g.is_pid()) v += g.k(0) * integral[c];
        u[c] = v;
    }
}

inline void check_gain_dims(const ClosedLoopState& s, const GainVector& g, std::span<const double> y_star) {
    const std::size_t d = y_star.size();
    if (d == 0 || s.x.size() != static_cast<std::size_t>(g.n()) * d)
        throw Error(ErrorCode::DimensionMismatch, "state does not match gains and setpoint");
    if (g.is_pid() && s.integral.size() != d) throw Error(ErrorCode::DimensionMismatch, "integral has wrong length");
}

struct StepBuffers {
    Vec f, gmat;
};

// Returns false when an entry leaves [-1e12, 1e12] or turns non-finite.
inline bool em_step_inplace(ClosedLoopState& s, const PlantSpec& plant, std::span<const double> u,
                            std::span<const double> dW, double dt, std::span<const double> y_star,
                            StepBuffers& buf) {
    const auto d = static_cast<std::size_t>(plant.d);
    const auto m = static_cast<std::size_t>(plant.m);
    const auto n = static_cast<std::size_t>(plant.n);
    buf.f.assign(d, 0.0);
    buf.gmat.assign(d * m, 0.0);
    plant.drift(s.x, u, buf.f);
    plant.diffusion(s.x, buf.gmat);
    if (!s.integral.empty())
        for (std::size_t c = 0; c < d; ++c) s.integral[c] += (y_star[c] - s.x[c]) * dt;
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t c = 0; c < d; ++c) s.x[i * d + c] += s.x[(i + 1) * d + c] * dt;
    const std::size_t last = (n - 1) * d;
    for (std::size_t c = 0; c < d; ++c) {
        double noise = 0.0;
        for (std::size_t j = 0; j < m; ++j) noise += buf.gmat[c * m + j] * dW[j];
        s.x[last + c] += buf.f[c] * dt + noise;
    }
    s.t += dt;
    for (double v : s.x)
        if (!(std::abs(v) <= kDivergenceThreshold)) return false;
    for (double v : s.integral)
        if (!(std::abs(v) <= kDivergenceThreshold)) return false;
    return true;
}

}  // namespace detail

/// Extended PID output u = k1 e + k0 integral + k2 e' + ... + kn e^{(n-1)}, e^{(i)} = -x_{i+1}.
inline Vec controller_pid(const ClosedLoopState& s, const GainVector& g, std::span<const double> y_star) {
    if (!g.is_pid()) throw Error(ErrorCode::InvalidArgument, "controller_pid expects PID gains");
    detail::check_gain_dims(s, g, y_star);
    Vec u(y_star.size());
    detail::feedback(s.x, s.integral, g, y_star, u);
    return u;
}

/// PD output u = sum_{i=1..n} k_i e^{(i-1)}; the integral is ignored.
inline Vec controller_pd(const ClosedLoopState& s, const GainVector& g, std::span<const double> y_star) {
    if (g.is_pid()) throw Error(ErrorCode::InvalidArgument, "controller_pd expects PD gains");
    detail::check_gain_dims(s, g, y_star);
    Vec u(y_star.size());
    detail::feedback(s.x, s.integral, g, y_star, u);
    return u;
}

/// One Euler-Maruyama step with left-point drift, diffusion and integral.
/// `dW` must already carry the sqrt(dt) scaling.
inline ClosedLoopState em_step(const ClosedLoopState& state, const PlantSpec& plant, std::span<const double> u,
                               std::span<const double> dW, double dt, std::span<const double> y_star) {
    if (state.x.size() != plant.state_size() || u.size() != static_cast<std::size_t>(plant.d) ||
        dW.size() != static_cast<std::size_t>(plant.m) || y_star.size() != static_cast<std::size_t>(plant.d))
        throw Error(ErrorCode::DimensionMismatch, "em_step: inconsistent dimensions");
    if (!state.integral.empty() && state.integral.size() != static_cast<std::size_t>(plant.d))
        throw Error(ErrorCode::DimensionMismatch, "em_step: integral has wrong length");
    ClosedLoopState next = state;
    detail::StepBuffers buf;
    if (!detail::em_step_inplace(next, plant, u, dW, dt, y_star, buf))
        throw Error(ErrorCode::Diverged, "state left the finite region at t=" + std::to_string(next.t));
    return next;
}

/// Ensemble moments at the recorded times. `*_se` are standard errors of the
/// corresponding across-path means.
struct EnsembleStats {
    std::vector<double> times;
    std::vector<double> mean_sq_error, mean_sq_error_se;          // E|e|^2
    std::vector<double> mean_sq_state_dev, mean_sq_state_dev_se;  // E|x - z*|^2
    std::vector<double> mean_sq_u, mean_sq_u_se;                  // E|u|^2
    std::vector<double> var_u, var_u_se;                          // E|u - Eu|^2
    std::vector<double> mean_error, mean_error_se;                // E e (first output component)
    std::size_t paths = 0;

    [[nodiscard]] std::size_t size() const { return times.size(); }
    friend bool operator==(const EnsembleStats&, const EnsembleStats&) = default;
};

namespace detail {

// Power sums at one recorded time; `u_sum`, `uu`, `uuu` hold sum u, sum u u^T, sum |u|^2 u.
struct MomentSums {
    double e2 = 0, e4 = 0, s2 = 0, s4 = 0, u2 = 0, u4 = 0, e1 = 0, e1sq = 0;
    Vec u_sum, uu, uuu;

    explicit MomentSums(std::size_t d = 1) : u_sum(d, 0.0), uu(d * d, 0.0), uuu(d, 0.0) {}

    void add(const MomentSums& o) {
        e2 += o.e2; e4 += o.e4; s2 += o.s2; s4 += o.s4; u2 += o.u2; u4 += o.u4; e1 += o.e1; e1sq += o.e1sq;
        for (std::size_t i = 0; i < u_sum.size(); ++i) u_sum[i] += o.u_sum[i];
        for (std::size_t i = 0; i < uu.size(); ++i) uu[i] += o.uu[i];
        for (std::size_t i = 0; i < uuu.size(); ++i) uuu[i] += o.uuu[i];
    }
};

using MomentTable = std::vector<MomentSums>;

inline void add_table(MomentTable& into, const MomentTable& from) {
    for (std::size_t r = 0; r < into.size(); ++r) into[r].add(from[r]);
}

// Streaming pairwise reduction: tables arrive in chunk order and equal-level
// partial sums merge, so the summation tree depends only on the chunk count.
class PairwiseReducer {
public:
    void push(MomentTable t) {
        int level = 0;
        while (!stack_.empty() && stack_.back().level == level) {
            add_table(stack_.back().table, t);
            t = std::move(stack_.back().table);
            stack_.pop_back();
            ++level;
        }
        stack_.push_back({level, std::move(t)});
    }

    MomentTable finish() {
        MomentTable acc = std::move(stack_.back().table);
        stack_.pop_back();
        while (!stack_.empty()) {
            MomentTable left = std::move(stack_.back().table);
            stack_.pop_back();
            add_table(left, acc);
            acc = std::move(left);
        }
        return acc;
    }

private:
    struct Entry {
        int level;
        MomentTable table;
    };
    std::vector<Entry> stack_;
};

inline double se_of_mean(double sum, double sum_sq, double n) {
    if (n < 2) return 0.0;
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq / n - mean * mean) * n / (n - 1));
    return std::sqrt(var / n);
}

}  // namespace detail

/// One simulated path on the recording grid, for inspection and ODE comparisons.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> x;
    std::vector<Vec> u;
    std::vector<Vec> integral;
};

namespace detail {

struct PathContext {
    const PlantSpec& plant;
    const Setpoint& sp;
    const GainVector* gains;
    const SimConfig& cfg;
};

inline void compute_u(const PathContext& ctx, const ClosedLoopState& s, std::span<double> u) {
    if (ctx.cfg.controller == ControllerMode::OpenLoop) {
        std::fill(u.begin(), u.end(), 0.0);
        return;
    }
    feedback(s.x, s.integral, *ctx.gains, ctx.sp.y_star, u);
}

inline ClosedLoopState initial_state(const PathContext& ctx) {
    ClosedLoopState s;
    s.x = ctx.cfg.initial_state.empty() ? ctx.sp.z_star : ctx.cfg.initial_state;
    s.integral = ctx.cfg.initial_integral.empty() ? Vec(static_cast<std::size_t>(ctx.plant.d), 0.0)
                                                  : ctx.cfg.initial_integral;
    return s;
}

// Runs one path, calling `record(r, state, u)` at each recorded step. Returns
// the divergence time, or nullopt on success.
template <class Record>
std::optional<double> run_path(const PathContext& ctx, std::size_t path, Record&& record) {
    const auto d = static_cast<std::size_t>(ctx.plant.d);
    const int m = ctx.plant.m;
    const std::int64_t steps = ctx.cfg.steps();
    const double sqdt = std::sqrt(ctx.cfg.dt);
    NormalStream normals(ctx.cfg.seed, path, m);
    ClosedLoopState s = initial_state(ctx);
    Vec u(d, 0.0), dW(static_cast<std::size_t>(m), 0.0);
    StepBuffers buf;
    for (std::int64_t step = 0;; ++step) {
        compute_u(ctx, s, u);
        if (step % ctx.cfg.record_stride == 0) record(static_cast<std::size_t>(step / ctx.cfg.record_stride), s, u);
        if (step == steps) break;
        for (int j = 0; j < m; ++j) dW[static_cast<std::size_t>(j)] = sqdt * normals(static_cast<std::uint64_t>(step), j);
        if (!em_step_inplace(s, ctx.plant, u, dW, ctx.cfg.dt, ctx.sp.y_star, buf)) return s.t;
        s.t = static_cast<double>(step + 1) * ctx.cfg.dt;
    }
    return std::nullopt;
}

inline void validate_run(const PlantSpec& plant, const Setpoint& sp, const GainVector* g, const SimConfig& cfg) {
    plant.validate();
    cfg.validate();
    const auto d = static_cast<std::size_t>(plant.d);
    if (sp.y_star.size() != d || sp.z_star.size() != plant.state_size())
        throw Error(ErrorCode::DimensionMismatch, "setpoint does not match plant dimensions");
    if (!cfg.initial_state.empty() && cfg.initial_state.size() != plant.state_size())
        throw Error(ErrorCode::DimensionMismatch, "sim.initial_state must have n*d entries");
    if (!cfg.initial_integral.empty() && cfg.initial_integral.size() != d)
        throw Error(ErrorCode::DimensionMismatch, "sim.initial_integral must have d entries");
    if (cfg.controller == ControllerMode::OpenLoop) return;
    if (g == nullptr) throw Error(ErrorCode::InvalidArgument, "closed-loop simulation needs gains");
    if (g->n() != plant.n) throw Error(ErrorCode::DimensionMismatch, "gains do not match the plant's relative degree");
    if ((cfg.controller == ControllerMode::PID) != g->is_pid())
        throw Error(ErrorCode::InvalidArgument, "controller mode does not match the gain kind");
}

inline std::size_t record_count(const SimConfig& cfg) {
    return static_cast<std::size_t>(cfg.steps() / cfg.record_stride) + 1;
}

}  // namespace detail

/// Single path `path` of the ensemble that simulate_paths would produce.
inline Trajectory simulate_trajectory(const PlantSpec& plant, const Setpoint& sp, const GainVector* g,
                                      const SimConfig& cfg, std::size_t path = 0) {
    detail::validate_run(plant, sp, g, cfg);
    const detail::PathContext ctx{plant, sp, g, cfg};
    Trajectory tr;
    auto rec = [&](std::size_t, const ClosedLoopState& s, std::span<const double> u) {
        tr.times.push_back(s.t);
        tr.x.push_back(s.x);
        tr.u.emplace_back(u.begin(), u.end());
        tr.integral.push_back(s.integral);
    };
    if (auto t = detail::run_path(ctx, path, rec)) throw DivergenceError(path, *t);
    return tr;
}

inline Trajectory simulate_trajectory(const PlantSpec& plant, const Setpoint& sp, const GainVector& g,
                                      const SimConfig& cfg, std::size_t path = 0) {
    return simulate_trajectory(plant, sp, &g, cfg, path);
}

/// Chunk size used for the ordered reduction; depends only on the path count.
inline std::size_t chunk_size_for(std::size_t paths) {
    return std::max<std::size_t>(64, (paths + 4095) / 4096);
}

/// Monte Carlo ensemble. Path p draws its noise from the substream (seed, p);
/// the first diverging path (lowest index) aborts the run with DivergenceError.
inline EnsembleStats simulate_paths(const PlantSpec& plant, const Setpoint& sp, const GainVector* g,
                                    const SimConfig& cfg) {
    detail::validate_run(plant, sp, g, cfg);
    const detail::PathContext ctx{plant, sp, g, cfg};
    const auto d = static_cast<std::size_t>(plant.d);
    const std::size_t n_state = plant.state_size();
    const std::size_t records = detail::record_count(cfg);
    const std::size_t chunk = chunk_size_for(cfg.paths);
    const std::size_t n_chunks = (cfg.paths + chunk - 1) / chunk;

    std::atomic<std::size_t> next_chunk{0};
    std::atomic<std::size_t> first_diverged{std::numeric_limits<std::size_t>::max()};
    std::mutex mu;
    std::vector<std::optional<detail::MomentTable>> pending(n_chunks);
    std::size_t next_to_reduce = 0;
    detail::PairwiseReducer reducer;
    std::vector<double> diverge_time(n_chunks, 0.0);
    std::vector<std::exception_ptr> errors(n_chunks);

    auto worker = [&] {
        for (;;) {
            const std::size_t c = next_chunk.fetch_add(1);
            if (c >= n_chunks) return;
            const std::size_t begin = c * chunk;
            const std::size_t end = std::min(cfg.paths, begin + chunk);
            detail::MomentTable table(records, detail::MomentSums(d));
            try {
                for (std::size_t p = begin; p < end; ++p) {
                    if (p > first_diverged.load()) break;
                    auto rec = [&](std::size_t r, const ClosedLoopState& s, std::span<const double> u) {
                        auto& ms = table[r];
                        double e2 = 0.0, s2 = 0.0, u2 = 0.0;
                        for (std::size_t k = 0; k < d; ++k) {
                            const double e = sp.y_star[k] - s.x[k];
                            e2 += e * e;
                        }
                        for (std::size_t k = 0; k < n_state; ++k) {
                            const double dev = s.x[k] - sp.z_star[k];
                            s2 += dev * dev;
                        }
                        for (std::size_t k = 0; k < d; ++k) u2 += u[k] * u[k];
                        const double e1 = sp.y_star[0] - s.x[0];
                        ms.e2 += e2; ms.e4 += e2 * e2;
                        ms.s2 += s2; ms.s4 += s2 * s2;
                        ms.u2 += u2; ms.u4 += u2 * u2;
                        ms.e1 += e1; ms.e1sq += e1 * e1;
                        for (std::size_t i = 0; i < d; ++i) {
                            ms.u_sum[i] += u[i];
                            ms.uuu[i] += u2 * u[i];
                            for (std::size_t j = 0; j < d; ++j) ms.uu[i * d + j] += u[i] * u[j];
                        }
                    };
                    if (auto t = detail::run_path(ctx, p, rec)) {
                        std::size_t cur = first_diverged.load();
                        while (p < cur && !first_diverged.compare_exchange_weak(cur, p)) {}
                        diverge_time[c] = *t;
                        break;
                    }
                }
            } catch (...) {
                errors[c] = std::current_exception();
            }
            std::lock_guard lock(mu);
            pending[c] = std::move(table);
            while (next_to_reduce < n_chunks && pending[next_to_reduce]) {
                reducer.push(std::move(*pending[next_to_reduce]));
                pending[next_to_reduce].reset();
                ++next_to_reduce;
            }
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers ? cfg.workers : default_workers(),
                                                             static_cast<unsigned>(n_chunks)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    if (const std::size_t bad = first_diverged.load(); bad != std::numeric_limits<std::size_t>::max())
        throw DivergenceError(bad, diverge_time[bad / chunk]);

    const detail::MomentTable total = reducer.finish();
    const double N = static_cast<double>(cfg.paths);
    EnsembleStats st;
    st.paths = cfg.paths;
    for (std::size_t r = 0; r < records; ++r) {
        const auto& ms = total[r];
        st.times.push_back(static_cast<double>(r * static_cast<std::size_t>(cfg.record_stride)) * cfg.dt);
        st.mean_sq_error.push_back(ms.e2 / N);
        st.mean_sq_error_se.push_back(detail::se_of_mean(ms.e2, ms.e4, N));
        st.mean_sq_state_dev.push_back(ms.s2 / N);
        st.mean_sq_state_dev_se.push_back(detail::se_of_mean(ms.s2, ms.s4, N));
        st.mean_sq_u.push_back(ms.u2 / N);
        st.mean_sq_u_se.push_back(detail::se_of_mean(ms.u2, ms.u4, N));
        st.mean_error.push_back(ms.e1 / N);
        st.mean_error_se.push_back(detail::se_of_mean(ms.e1, ms.e1sq, N));

        // Var(u) = E|u|^2 - |ubar|^2. Its standard error uses E|u - ubar|^4 expanded
        // in raw moments: E|u|^4 + 4 ubar'S ubar - 4 ubar'T + 2 c E|u|^2 - 3 c^2.
        double c = 0.0, uSu = 0.0, uT = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double ui = ms.u_sum[i] / N;
            c += ui * ui;
            uT += ui * ms.uuu[i] / N;
            for (std::size_t j = 0; j < d; ++j) uSu += ui * (ms.uu[i * d + j] / N) * (ms.u_sum[j] / N);
        }
        const double Eu2 = ms.u2 / N;
        const double var = std::max(0.0, Eu2 - c);
        const double fourth = ms.u4 / N + 4.0 * uSu - 4.0 * uT + 2.0 * c * Eu2 - 3.0 * c * c;
        st.var_u.push_back(var);
        st.var_u_se.push_back(N < 2 ? 0.0 : std::sqrt(std::max(0.0, fourth - var * var) / (N - 1)));
    }
    return st;
}

inline EnsembleStats simulate_paths(const PlantSpec& plant, const Setpoint& sp, const GainVector& g,
                                    const SimConfig& cfg) {
    return simulate_paths(plant, sp, &g, cfg);
}

/// Open-loop ensemble (u = 0).
inline EnsembleStats simulate_open_loop(const PlantSpec& plant, const Setpoint& sp, SimConfig cfg) {
    cfg.controller = ControllerMode::OpenLoop;
    return simulate_paths(plant, sp, nullptr, cfg);
}

/// Time averages over the recorded window t >= t0. The standard errors are the
/// averages of the pointwise ones, which ignores the (positive) correlation
/// benefit and so never understates the error of the averaged estimate.
struct SteadyState {
    double mean_sq_error = 0, mean_sq_error_se = 0;
    double mean_sq_state_dev = 0, mean_sq_state_dev_se = 0;
    double mean_sq_u = 0, mean_sq_u_se = 0;
    double var_u = 0, var_u_se = 0;
    std::size_t samples = 0;
};

inline SteadyState steady_state(const EnsembleStats& st, double t0) {
    SteadyState ss;
    for (std::size_t r = 0; r < st.size(); ++r) {
        if (st.times[r] < t0) continue;
        ss.mean_sq_error += st.mean_sq_error[r];
        ss.mean_sq_error_se += st.mean_sq_error_se[r];
        ss.mean_sq_state_dev += st.mean_sq_state_dev[r];
        ss.mean_sq_state_dev_se += st.mean_sq_state_dev_se[r];
        ss.mean_sq_u += st.mean_sq_u[r];
        ss.mean_sq_u_se += st.mean_sq_u_se[r];
        ss.var_u += st.var_u[r];
        ss.var_u_se += st.var_u_se[r];
        ++ss.samples;
    }
    if (ss.samples == 0) throw Error(ErrorCode::InvalidArgument, "steady-state window is empty");
    const double k = static_cast<double>(ss.samples);
    for (double* v : {&ss.mean_sq_error, &ss.mean_sq_error_se, &ss.mean_sq_state_dev, &ss.mean_sq_state_dev_se,
                      &ss.mean_sq_u, &ss.mean_sq_u_se, &ss.var_u, &ss.var_u_se})
        *v /= k;
    return ss;
}

}  // namespace xpid
