#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace xpid;
using xpid::testing::code_of;
using xpid::testing::Rng;

namespace {
const double kSec6L = std::sqrt(3.0) / 2.0;
}  // namespace

TEST(GainVector, RejectsNonPositiveEntries) {
    EXPECT_EQ(code_of([] { (void)GainVector::pid({1.0, 0.0, 2.0}); }), ErrorCode::NonPositiveGain);
    EXPECT_EQ(code_of([] { (void)GainVector::pd({-1.0}); }), ErrorCode::NonPositiveGain);
    EXPECT_EQ(code_of([] { (void)GainVector::pid({1.0, NAN}); }), ErrorCode::NonPositiveGain);
}

TEST(GainVector, PaperIndexing) {
    const GainVector pid = GainVector::pid({1, 2, 3});
    EXPECT_EQ(pid.n(), 2);
    EXPECT_EQ(pid.k(0), 1);
    EXPECT_EQ(pid.k(2), 3);
    const GainVector pd = GainVector::pd({3, 4});
    EXPECT_EQ(pd.n(), 2);
    EXPECT_EQ(pd.k(1), 3);
    EXPECT_EQ(code_of([&] { (void)pd.k(0); }), ErrorCode::InvalidArgument);
}

TEST(CheckInequality, BenchmarkGainsAreAdmissible) {
    const auto r = check_inequality(GainVector::pid({8.6, 21.5, 21.5, 8.6}), kSec6L, 0.0);
    EXPECT_TRUE(r.admissible);
    EXPECT_EQ(r.binding_term.name, "k3^2-k2");
    EXPECT_NEAR(r.binding_term.value, 52.46, 1e-12);
    EXPECT_NEAR(r.kbar, 60.2 * kSec6L, 1e-12);
    EXPECT_NEAR(r.margin, 52.46 - 60.2 * kSec6L, 1e-9);
    EXPECT_NEAR(r.margin, 0.325, 1e-3);
}

TEST(CheckInequality, BenchmarkPatternBelowThresholdIsRejected) {
    const auto r = check_inequality(sec6_pattern_gains(8.5), kSec6L, 0.0);
    EXPECT_FALSE(r.admissible);
    EXPECT_NEAR(r.binding_term.value, 51.0, 1e-12);
    EXPECT_NEAR(r.kbar, 59.5 * kSec6L, 1e-12);
}

TEST(CheckInequality, BenchmarkPatternThresholdMatchesClosedForm) {
    const double threshold = (5.0 + 7.0 * std::sqrt(3.0)) / 2.0;
    EXPECT_TRUE(check_inequality(sec6_pattern_gains(threshold * (1 + 1e-9)), kSec6L, 0.0).admissible);
    EXPECT_FALSE(check_inequality(sec6_pattern_gains(threshold * (1 - 1e-9)), kSec6L, 0.0).admissible);
}

TEST(CheckInequality, SmallIntegerExample) {
    const auto r = check_inequality(GainVector::pid({1, 3, 4}), 0.0, 0.0);
    EXPECT_TRUE(r.admissible);
    EXPECT_DOUBLE_EQ(r.margin, 1.0);
    ASSERT_EQ(r.terms.size(), 3u);
    EXPECT_DOUBLE_EQ(r.terms[1].value, 1.0);
    EXPECT_DOUBLE_EQ(r.terms[2].value, 13.0);
}

TEST(CheckInequality, LowerGainBoundScalesQuadraticTerms) {
    const GainVector g = GainVector::pid({1, 3, 4});
    const auto r = check_inequality(g, 0.0, 0.0, 0.5);
    EXPECT_DOUBLE_EQ(r.terms[0].value, 0.5);
    EXPECT_DOUBLE_EQ(r.terms[1].value, 0.5);
    EXPECT_DOUBLE_EQ(r.terms[2].value, 16 * 0.5 - 3);
}

TEST(CheckInequality, ZeroMarginIsRejected) {
    // k0^2 = 1 equals kbar = (1 + 3 + 4) L with L = 1/8.
    const auto r = check_inequality(GainVector::pid({1, 3, 4}), 0.125, 0.0);
    EXPECT_EQ(r.margin, 0.0);
    EXPECT_FALSE(r.admissible);
}

TEST(CheckInequality, FirstOrderReading) {
    const auto r = check_inequality(GainVector::pid({2, 3}), 0.0, 0.0);
    ASSERT_EQ(r.terms.size(), 2u);
    EXPECT_EQ(r.terms[1].name, "k1^2-k0");
    EXPECT_DOUBLE_EQ(r.terms[1].value, 7.0);
}

TEST(CheckInequalityPd, Examples) {
    const auto a = check_inequality_pd(GainVector::pd({3, 4}), 0.0, 0.0);
    EXPECT_TRUE(a.admissible);
    EXPECT_DOUBLE_EQ(a.margin, 9.0);
    const auto b = check_inequality_pd(GainVector::pd({3, 1}), 0.0, 0.0);
    EXPECT_FALSE(b.admissible);
    EXPECT_DOUBLE_EQ(b.binding_term.value, -2.0);
    const auto c = check_inequality_pd(GainVector::pd({2}), 1.0, 0.0);
    EXPECT_TRUE(c.admissible);
    EXPECT_DOUBLE_EQ(c.binding_term.value, 4.0);
    EXPECT_DOUBLE_EQ(c.kbar, 2.0);
}

TEST(CheckInequality, KindMismatchIsAnError) {
    EXPECT_EQ(code_of([] { (void)check_inequality(GainVector::pd({1, 2}), 0, 0); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { (void)check_inequality_pd(GainVector::pid({1, 2}), 0, 0); }), ErrorCode::InvalidArgument);
}

TEST(GeometricGains, PowersOfThree) {
    const GainVector g = geometric_gains(27, 2);
    EXPECT_DOUBLE_EQ(g.k(0), 27);
    EXPECT_DOUBLE_EQ(g.k(1), 9);
    EXPECT_DOUBLE_EQ(g.k(2), 1);
}

TEST(GeometricGains, AdmissibilityAroundThreshold) {
    const auto hi = check_inequality(geometric_gains(1300, 2), 1.0, 0.0);
    EXPECT_TRUE(hi.admissible);
    EXPECT_NEAR(hi.binding_term.value, 1300.0 * 1300.0 / 729.0 - 1300.0 / 3.0, 1e-9);
    EXPECT_NEAR(hi.binding_term.value, 1884.9, 0.1);
    EXPECT_NEAR(hi.kbar, 37.0 * 1300 / 27, 1e-9);
    const auto lo = check_inequality(geometric_gains(1200, 2), 1.0, 0.0);
    EXPECT_FALSE(lo.admissible);
    EXPECT_NEAR(lo.binding_term.value, 1575.3, 0.1);
    EXPECT_NEAR(lo.kbar, 1644.4, 0.1);
}

TEST(GeometricGains, AdmissibilityIsMonotoneInK) {
    Rng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = rng.integer(1, 6);
        const double L = rng.uniform(0, 2), M = rng.uniform(0, 2);
        const double k = rng.log_uniform(1e-2, 1e9);
        if (!check_inequality(geometric_gains(k, n), L, M).admissible) continue;
        for (double f : {1.0 + 1e-9, 1.5, 10.0, 1e3})
            EXPECT_TRUE(check_inequality(geometric_gains(k * f, n), L, M).admissible) << "n=" << n << " k=" << k;
    }
}

TEST(LambdaGains, OverridesReproduceWorkedExample) {
    LambdaOverrides ov;
    ov.betas = std::vector<double>{0.4, 0.1};
    ov.k = 4000.0;
    const LambdaDesign ld = lambda_gains(1.0, 1.0, 0.0, 2, 1.0, ov);
    EXPECT_DOUBLE_EQ(ld.gains.k(0), 4000);
    EXPECT_DOUBLE_EQ(ld.gains.k(1), 1600);
    EXPECT_NEAR(ld.gains.k(2), 160, 1e-12);
    EXPECT_NEAR(ld.k_threshold, 3750, 1e-9);
    const auto r = check_inequality(ld.gains, 1.0, 0.0);
    EXPECT_TRUE(r.admissible);
    EXPECT_NEAR(r.kbar, 5760, 1e-9);
    EXPECT_NEAR(r.terms[2].value, 24000, 1e-6);
}

TEST(LambdaGains, BoundaryKIsRejected) {
    LambdaOverrides ov;
    ov.betas = std::vector<double>{0.4, 0.1};
    ov.k = 3750.0;
    EXPECT_EQ(code_of([&] { (void)lambda_gains(1.0, 1.0, 0.0, 2, 1.0, ov); }), ErrorCode::InvalidBeta);
}

TEST(LambdaGains, BetaOverridesMustBeStrict) {
    LambdaOverrides ov;
    ov.betas = std::vector<double>{0.5, 0.1};  // beta1 < 1/(n(lambda + 8M^2)) = 0.5 fails
    EXPECT_EQ(code_of([&] { (void)lambda_gains(1.0, 1.0, 0.0, 2, 1.0, ov); }), ErrorCode::InvalidBeta);
    ov.betas = std::vector<double>{0.4, 0.2};  // beta2 < beta1/n = 0.2 fails
    EXPECT_EQ(code_of([&] { (void)lambda_gains(1.0, 1.0, 0.0, 2, 1.0, ov); }), ErrorCode::InvalidBeta);
    ov.betas = std::vector<double>{0.4};
    EXPECT_EQ(code_of([&] { (void)lambda_gains(1.0, 1.0, 0.0, 2, 1.0, ov); }), ErrorCode::InvalidBeta);
}

TEST(LambdaGains, FirstOrderOverridesMustStillBeAdmissible) {
    // beta and k satisfy the strict design inequalities, yet k1^2 - k0 < k1 M^2.
    LambdaOverrides ov;
    ov.betas = std::vector<double>{0.4286};
    ov.k = 6.0;
    EXPECT_EQ(code_of([&] { (void)lambda_gains(0.1, 0.0, 0.5, 1, 1.0, ov); }), ErrorCode::InvalidBeta);
    const LambdaDesign ld = lambda_gains(0.1, 0.0, 0.5, 1, 1.0);
    EXPECT_GT(ld.k, 1.1 * ld.k_threshold);
}

TEST(LambdaGains, DefaultsAreAlwaysAdmissible) {
    for (int n = 1; n <= 8; ++n)
        for (double L : {0.0, 0.5, 1.0, 2.0})
            for (double M : {0.0, 0.5, 1.0, 2.0})
                for (double lambda : {0.1, 1.0, 5.0})
                    for (double b : {0.5, 1.0}) {
                        const LambdaDesign ld = lambda_gains(lambda, L, M, n, b);
                        EXPECT_TRUE(check_inequality(ld.gains, L, M, b).admissible)
                            << "n=" << n << " L=" << L << " M=" << M << " lambda=" << lambda << " b=" << b;
                    }
}

TEST(BoundConstants, WorkedExample) {
    const GainVector g = GainVector::pid({4000, 1600, 160});
    const BoundConstants bc = bound_constants(g, 1.0, 2, 1.0, 0.0, 1.0);
    EXPECT_NEAR(bc.thm3_coeff_exp, 20000, 1e-8);
    EXPECT_DOUBLE_EQ(bc.thm3_coeff_ss, 8);
    EXPECT_DOUBLE_EQ(bc.c3, 1.0 / (16.0 + 192.0 * (4000.0 * 4000 + 1600.0 * 1600 + 160.0 * 160)));
}

TEST(BoundConstants, C3LimitWithoutCoupling) {
    const BoundConstants bc = bound_constants(GainVector::pid({1, 2, 3}), 2.0, 2, 0.0, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(bc.c3, 1.0 / 8.0);
}

TEST(DesignReport, MarginIsLipschitzInEachGain) {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = rng.integer(1, 5);
        const auto s = xpid::testing::random_admissible(rng, n);
        const auto base = check_inequality(s.gains, s.L, s.M);
        std::vector<double> k(s.gains.values().begin(), s.gains.values().end());
        double kmax = 0;
        for (double v : k) kmax = std::max(kmax, v);
        // Each term has partial derivatives bounded by 4 kmax + L + M^2 + 1.
        const double C = 4.0 * kmax + s.L + s.M * s.M + 1.0;
        for (std::size_t i = 0; i < k.size(); ++i) {
            const double eps = 1e-7 * k[i];
            auto kp = k;
            kp[i] += eps;
            const auto moved = check_inequality(GainVector::pid(kp), s.L, s.M);
            EXPECT_LE(std::abs(moved.margin - base.margin), C * eps * (1 + 1e-6) + 1e-12 * std::abs(base.margin));
        }
    }
}
