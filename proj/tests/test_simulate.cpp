#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"

using namespace xpid;
using xpid::testing::code_of;

namespace {
const GainVector kSec6Gains = GainVector::pid({8.6, 21.5, 21.5, 8.6});

std::string csv_bytes(const EnsembleStats& st) {
    std::ostringstream os;
    write_stats_csv(os, st);
    return os.str();
}
}  // namespace

TEST(Controller, ZeroErrorGivesZeroInput) {
    const ClosedLoopState s{{1.0, 0.0, 0.0}, {0.0}, 0.0};
    EXPECT_EQ(controller_pid(s, kSec6Gains, Vec{1.0})[0], 0.0);
    const ClosedLoopState s2{{1.0, 0.0}, {}, 0.0};
    EXPECT_EQ(controller_pd(s2, GainVector::pd({3, 4}), Vec{1.0})[0], 0.0);
}

TEST(Controller, UnitErrorWithBenchmarkGains) {
    const ClosedLoopState s{{0.0, 0.0, 0.0}, {0.0}, 0.0};
    EXPECT_DOUBLE_EQ(controller_pid(s, kSec6Gains, Vec{1.0})[0], 21.5);
}

TEST(Controller, PdWithDerivative) {
    // e = 2 and de/dt = -x2 = -1.
    const ClosedLoopState s{{-1.0, 1.0}, {}, 0.0};
    EXPECT_DOUBLE_EQ(controller_pd(s, GainVector::pd({3, 4}), Vec{1.0})[0], 2.0);
}

TEST(Controller, IntegralTermAndDimensionChecks) {
    const ClosedLoopState s{{1.0, 0.0, 0.0}, {0.5}, 0.0};
    EXPECT_DOUBLE_EQ(controller_pid(s, kSec6Gains, Vec{1.0})[0], 4.3);
    const ClosedLoopState bad{{1.0, 0.0}, {0.0}, 0.0};
    EXPECT_EQ(code_of([&] { (void)controller_pid(bad, kSec6Gains, Vec{1.0}); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { (void)controller_pd(s, kSec6Gains, Vec{1.0}); }), ErrorCode::InvalidArgument);
}

TEST(EmStep, NoDriftNoNoiseOnlyChainMoves) {
    PlantSpec plant = chain_plant(3);
    plant.drift = [](std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    const ClosedLoopState s{{1.0, 2.0, 3.0}, {0.0}, 0.0};
    const ClosedLoopState next = em_step(s, plant, Vec{5.0}, Vec{0.0}, 0.1, Vec{0.0});
    EXPECT_DOUBLE_EQ(next.x[0], 1.2);
    EXPECT_DOUBLE_EQ(next.x[1], 2.3);
    EXPECT_DOUBLE_EQ(next.x[2], 3.0);
    EXPECT_DOUBLE_EQ(next.integral[0], -0.1);
    EXPECT_DOUBLE_EQ(next.t, 0.1);
}

TEST(EmStep, ScalarEulerStep) {
    const ClosedLoopState s{{0.0}, {}, 0.0};
    EXPECT_DOUBLE_EQ(em_step(s, chain_plant(1), Vec{2.0}, Vec{0.0}, 0.5, Vec{0.0}).x[0], 1.0);
}

TEST(EmStep, NoiseEntersLastBlock) {
    const ClosedLoopState s{{0.0, 0.0}, {}, 0.0};
    const ClosedLoopState next = em_step(s, chain_plant(2, 0.0, 0.5), Vec{0.0}, Vec{0.2}, 0.01, Vec{0.0});
    EXPECT_EQ(next.x[0], 0.0);
    EXPECT_DOUBLE_EQ(next.x[1], 0.1);
}

TEST(EmStep, DivergenceAndDimensions) {
    const ClosedLoopState s{{1e12}, {}, 0.0};
    EXPECT_EQ(code_of([&] { (void)em_step(s, chain_plant(1), Vec{1e12}, Vec{0.0}, 1.0, Vec{0.0}); }),
              ErrorCode::Diverged);
    EXPECT_EQ(code_of([&] { (void)em_step(s, chain_plant(1), Vec{1.0, 2.0}, Vec{0.0}, 1.0, Vec{0.0}); }),
              ErrorCode::DimensionMismatch);
}

TEST(Simulate, BrownianVariance) {
    // Open loop on f = u = 0 with constant diffusion: x(T) ~ N(0, sigma^2 T).
    const double sigma = 0.7;
    const PlantSpec plant = chain_plant(1, 0.0, sigma);
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.horizon = 1.0;
    cfg.paths = 100000;
    cfg.record_stride = 25;
    cfg.seed = 99;
    const EnsembleStats st = simulate_open_loop(plant, open_loop_setpoint(plant, Vec{0.0}), cfg);
    ASSERT_EQ(st.size(), 5u);
    for (std::size_t r = 0; r < st.size(); ++r) {
        const double expected = sigma * sigma * st.times[r];
        EXPECT_NEAR(st.mean_sq_state_dev[r], expected, 3.0 * st.mean_sq_state_dev_se[r] + 1e-15) << "t=" << st.times[r];
    }
}

TEST(Simulate, DeterministicAcrossWorkerCounts) {
    const PlantSpec plant = sec6_plant({0.4, -0.3, 0.5, 6.0, 5.2, 0.4});
    const Setpoint sp = solve_equilibrium(plant, 1.0);
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 0.5;
    cfg.paths = 700;  // several chunks, last one partial
    cfg.record_stride = 50;
    cfg.seed = 5;
    cfg.initial_state = {0.9, 0.0, 0.1};
    cfg.workers = 1;
    const EnsembleStats a = simulate_paths(plant, sp, kSec6Gains, cfg);
    cfg.workers = 8;
    const EnsembleStats b = simulate_paths(plant, sp, kSec6Gains, cfg);
    cfg.workers = 3;
    const EnsembleStats c = simulate_paths(plant, sp, kSec6Gains, cfg);
    EXPECT_TRUE(a == b);
    EXPECT_TRUE(a == c);
    EXPECT_EQ(csv_bytes(a), csv_bytes(b));
    cfg.seed = 6;
    EXPECT_FALSE(a == simulate_paths(plant, sp, kSec6Gains, cfg));
}

TEST(Simulate, TrajectoryMatchesEnsembleOfOne) {
    const PlantSpec plant = sec6_plant({0.4, -0.3, 0.5, 6.0, 5.2, 0.2});
    const Setpoint sp = solve_equilibrium(plant, 1.0);
    SimConfig cfg;
    cfg.horizon = 1.0;
    cfg.record_stride = 100;
    cfg.seed = 11;
    cfg.paths = 1;
    const Trajectory tr = simulate_trajectory(plant, sp, kSec6Gains, cfg, 0);
    const EnsembleStats st = simulate_paths(plant, sp, kSec6Gains, cfg);
    ASSERT_EQ(tr.times.size(), st.size());
    for (std::size_t r = 0; r < st.size(); ++r) {
        const double e = 1.0 - tr.x[r][0];
        EXPECT_DOUBLE_EQ(st.mean_sq_error[r], e * e);
        EXPECT_DOUBLE_EQ(st.mean_sq_u[r], tr.u[r][0] * tr.u[r][0]);
        EXPECT_DOUBLE_EQ(st.times[r], tr.times[r]);
    }
}

TEST(Simulate, NoiseFreeLinearChainMatchesRk4) {
    const PlantSpec plant = chain_plant(2);
    const GainVector g = GainVector::pid({1, 3, 4});
    ASSERT_TRUE(check_inequality(g, 0.0, 0.0).admissible);
    const Setpoint sp = solve_equilibrium(plant, 1.0);
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 10.0;
    cfg.record_stride = 10;
    cfg.initial_state = {0.0, 0.0};
    const Trajectory tr = simulate_trajectory(plant, sp, g, cfg);
    const auto ref = xpid::testing::rk4_closed_loop(plant, g, sp.y_star, {0.0, 0.0}, {0.0}, 10.0, 1e-4, 100);
    ASSERT_EQ(ref.size(), tr.x.size());
    double worst = 0.0;
    for (std::size_t r = 0; r < ref.size(); ++r) {
        for (std::size_t i = 0; i < 2; ++i) worst = std::max(worst, std::abs(tr.x[r][i] - ref[r][i]));
        worst = std::max(worst, std::abs(tr.integral[r][0] - ref[r][2]));
    }
    EXPECT_LT(worst, 10 * cfg.dt);
    EXPECT_GT(worst, 0.0);
}

TEST(Simulate, PidRemovesOffsetThatPdLeaves) {
    const PlantSpec plant = chain_plant(2, 6.0);
    const Setpoint sp = solve_equilibrium(plant, 1.0);
    EXPECT_NEAR(sp.u_star[0], -6.0, 1e-12);
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 80.0;
    cfg.record_stride = 1000;
    cfg.controller = ControllerMode::PD;
    const Trajectory pd = simulate_trajectory(plant, sp, GainVector::pd({3, 4}), cfg);
    EXPECT_NEAR(std::abs(1.0 - pd.x.back()[0]), 2.0, 0.02);
    cfg.controller = ControllerMode::PID;
    const Trajectory pid = simulate_trajectory(plant, sp, GainVector::pid({1, 3, 4}), cfg);
    EXPECT_LT(std::abs(1.0 - pid.x.back()[0]), 1e-6);
}

TEST(Simulate, PdWithoutOffsetIsUnbiased) {
    const PlantSpec plant = chain_plant(2, 0.0, 0.3);
    const Setpoint sp = solve_equilibrium(plant, 1.0);
    SimConfig cfg;
    cfg.dt = 2e-3;
    cfg.horizon = 10.0;
    cfg.paths = 2000;
    cfg.record_stride = 500;
    cfg.controller = ControllerMode::PD;
    cfg.initial_state = {0.0, 0.0};
    const EnsembleStats st = simulate_paths(plant, sp, GainVector::pd({3, 4}), cfg);
    EXPECT_LT(std::abs(st.mean_error.back()), 3.0 * st.mean_error_se.back());
    EXPECT_GT(st.mean_sq_error.back(), 0.0);
}

TEST(Simulate, DivergenceReportsLowestPath) {
    // x' = x^2 - 1 + noise: paths pushed past the unstable point at +1 blow up.
    const PlantSpec plant = expression_plant(1, "x1*x1 - 1", "1.2", 0.0, 0.0);
    const Setpoint sp = open_loop_setpoint(plant, Vec{-1.0});
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.horizon = 3.0;
    cfg.paths = 300;
    cfg.seed = 3;
    cfg.controller = ControllerMode::OpenLoop;
    cfg.initial_state = {-1.0};
    std::optional<std::size_t> first;
    for (std::size_t p = 0; p < cfg.paths && !first; ++p) {
        try {
            (void)simulate_trajectory(plant, sp, nullptr, cfg, p);
        } catch (const DivergenceError&) {
            first = p;
        }
    }
    ASSERT_TRUE(first.has_value());
    for (unsigned w : {1u, 4u}) {
        cfg.workers = w;
        try {
            (void)simulate_paths(plant, sp, nullptr, cfg);
            FAIL() << "expected divergence";
        } catch (const DivergenceError& e) {
            EXPECT_EQ(e.path(), *first);
            EXPECT_GT(e.time(), 0.0);
        }
    }
}

TEST(Simulate, ConfigValidation) {
    const PlantSpec plant = chain_plant(2);
    const Setpoint sp = solve_equilibrium(plant, 1.0);
    SimConfig cfg;
    cfg.horizon = 1.0;
    cfg.dt = 0.0;
    EXPECT_EQ(code_of([&] { (void)simulate_paths(plant, sp, GainVector::pid({1, 3, 4}), cfg); }),
              ErrorCode::InvalidArgument);
    cfg.dt = 1e-2;
    EXPECT_EQ(code_of([&] { (void)simulate_paths(plant, sp, GainVector::pid({1, 3}), cfg); }),
              ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { (void)simulate_paths(plant, sp, GainVector::pd({3, 4}), cfg); }),
              ErrorCode::InvalidArgument);
    cfg.initial_state = {1.0};
    EXPECT_EQ(code_of([&] { (void)simulate_paths(plant, sp, GainVector::pid({1, 3, 4}), cfg); }),
              ErrorCode::DimensionMismatch);
}

TEST(Simulate, ChunkSizeIndependentOfWorkers) {
    EXPECT_EQ(chunk_size_for(1), 64u);
    EXPECT_EQ(chunk_size_for(100000), 64u);
    EXPECT_EQ(chunk_size_for(1000000), 245u);
}

TEST(SteadyState, AveragesWindow) {
    EnsembleStats st;
    st.times = {0, 1, 2, 3};
    st.mean_sq_error = {9, 9, 1, 3};
    st.mean_sq_error_se = {0, 0, 0.1, 0.3};
    for (auto* v : {&st.mean_sq_state_dev, &st.mean_sq_state_dev_se, &st.mean_sq_u, &st.mean_sq_u_se, &st.var_u,
                    &st.var_u_se, &st.mean_error, &st.mean_error_se})
        v->assign(4, 0.0);
    const SteadyState ss = steady_state(st, 2.0);
    EXPECT_EQ(ss.samples, 2u);
    EXPECT_DOUBLE_EQ(ss.mean_sq_error, 2.0);
    EXPECT_DOUBLE_EQ(ss.mean_sq_error_se, 0.2);
    EXPECT_EQ(code_of([&] { (void)steady_state(st, 4.0); }), ErrorCode::InvalidArgument);
}
