#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "warm/blur.hpp"

using namespace warm;

TEST(BlurMask, FrozenEntryValue) {
    // k = (1, 1) on 8x8 at alpha = 1: exp(-(pi^2/2)(1/64 + 1/64)) = exp(-pi^2 / 64).
    const BlurMask m(8, 8, 1.0);
    EXPECT_NEAR(m(1, 1), 0.8570898111217011, 1e-15);
    // k = (0, 2) on 4x8 at alpha = 0.5: exp(-(pi^2/2)(0.25)(4/64)) = exp(-pi^2 * 4 / 512).
    const BlurMask m2(4, 8, 0.5);
    EXPECT_NEAR(m2(0, 2), 0.925791451203618, 1e-15);
}

TEST(BlurMask, IdentityAtZeroAndUnitDc) {
    const BlurMask zero(5, 7, 0.0);
    for (double e : zero.entries()) EXPECT_EQ(e, 1.0);
    gen::Rng rng(21);
    for (int c = 0; c < 50; ++c) {
        const BlurMask m(rng.size(1, 32), rng.size(1, 32), rng.log_uniform(1e-3, 100.0));
        EXPECT_EQ(m(0, 0), 1.0);
        for (double e : m.entries()) {
            EXPECT_GE(e, 0.0);
            EXPECT_LE(e, 1.0);
        }
    }
}

TEST(BlurMask, RejectsBadAlpha) {
    EXPECT_THROW(BlurMask(4, 4, -0.1), DomainError);
    EXPECT_THROW(BlurMask(4, 4, std::numeric_limits<double>::infinity()), DomainError);
}

TEST(BlurMask, SemigroupComposition) {
    gen::Rng rng(22);
    for (int c = 0; c < 100; ++c) {
        const std::size_t h = rng.size(1, 16), w = rng.size(1, 16);
        const double a = rng.uniform(0.0, 5.0), b = rng.uniform(0.0, 5.0);
        const BlurMask ma(h, w, a), mb(h, w, b), mab(h, w, std::hypot(a, b));
        for (std::size_t i = 0; i < mab.size(); ++i)
            EXPECT_NEAR(ma[i] * mb[i], mab[i], 1e-10) << "case " << c;
    }
}

TEST(Blur, ZeroAlphaReturnsInput) {
    gen::Rng rng(23);
    const Grid g = rng.grid(6, 5);
    EXPECT_EQ(blur(g, 0.0), g);
}

TEST(Blur, PreservesMeanAndNeverAddsEnergy) {
    gen::Rng rng(24);
    for (int c = 0; c < 50; ++c) {
        const Grid g = rng.grid(rng.size(1, 12), rng.size(1, 12));
        const Grid b = blur(g, rng.log_uniform(1e-2, 10.0));
        EXPECT_NEAR(mean(b), mean(g), 1e-12);
        EXPECT_LE(sum_of_squares(b.values()), sum_of_squares(g.values()) + 1e-12);
    }
}

TEST(Blur, SequentialBlursCompose) {
    gen::Rng rng(25);
    const Grid g = rng.grid(8, 8);
    EXPECT_LE(max_abs_diff(blur(blur(g, 0.7), 1.1), blur(g, std::hypot(0.7, 1.1))), 1e-12);
}

TEST(Blur, MatchesFiniteDifferenceHeatEquation) {
    gen::Rng rng(26);
    const std::size_t n = 8;
    oracle::Image coeffs = oracle::zeros(n, n);
    for (auto& row : coeffs)
        for (auto& v : row) v = rng.normal() / 8.0;
    Grid g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) = oracle::cosine_field(coeffs, i + 0.5, j + 0.5);

    for (double alpha : {0.5, 1.0, 2.0}) {
        const oracle::Image ref = oracle::heat_fd(coeffs, alpha, 9);
        const Grid b = blur(g, alpha);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(b(i, j) - ref[i][j]));
        EXPECT_LT(worst, 1e-3) << "alpha " << alpha;
    }
}
