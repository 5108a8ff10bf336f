#include <gtest/gtest.h>

#include "generators.hpp"
#include "warm/mixture.hpp"
#include "warm/sampler.hpp"

using namespace warm;

namespace {

GaussianMixture gaussian(std::size_t h, std::size_t w, double mean, double var) {
    const auto d = static_cast<Eigen::Index>(h * w);
    Eigen::VectorXd m = Eigen::VectorXd::LinSpaced(d, -mean, mean);
    return GaussianMixture(h, w, {1.0}, {m}, {var * Eigen::MatrixXd::Identity(d, d)});
}

// Heads that know x0 exactly: D = blur(x0, alpha), R = the residual or x0 itself.
struct KnownClean {
    Grid x0;
    bool clean_residual = false;
    PredictionPair operator()(const Grid&, double alpha, double) const {
        const Grid d = blur(x0, alpha);
        return {d, clean_residual ? x0 : x0 - d};
    }
};

struct Broken {
    PredictionPair operator()(const Grid& x, double, double) const {
        Grid bad = x;
        bad[0] = std::numeric_limits<double>::quiet_NaN();
        return {x, bad};
    }
};

SamplerConfig config(std::size_t T, double bnr, Variant v = Variant::d, StepMode m = StepMode::heun) {
    ScheduleParams p;
    p.T = T;
    p.bnr = bnr;
    p.beta_max = 20.0;
    SamplerConfig c;
    c.variant = v;
    c.step_mode = m;
    c.schedule = make_bnr_schedule(p);
    return c;
}

}  // namespace

TEST(Sampler, EulerStepWithExactHeadsIsTheTransitionMean) {
    gen::Rng rng(71);
    for (int c = 0; c < 200; ++c) {
        const ScheduleParams p = rng.schedule_params();
        SamplerConfig cfg;
        cfg.schedule = make_bnr_schedule(p);
        const Grid x0 = rng.grid(3, 4);
        const std::size_t t = rng.size(1, cfg.schedule.T);
        NoiseSource noise(rng.u64());
        const Grid xt = forward_sample(x0, cfg.schedule, t, noise);
        cfg.schedule.sigma.assign(cfg.schedule.T + 1, 0.0);
        for (Variant v : {Variant::a, Variant::c, Variant::d}) {
            cfg.variant = v;
            const KnownClean heads{x0, v == Variant::a || v == Variant::c};
            const Grid step = reverse_step(xt, heads(xt, cfg.schedule.alpha[t], cfg.schedule.beta[t]),
                                           cfg.schedule, t, cfg, noise);
            const Grid want = decomposed_transition_mean(x0, xt, cfg.schedule, t);
            EXPECT_LE(max_abs_diff(step, want), 1e-5 * std::max(1.0, cfg.schedule.beta[t]))
                << "case " << c << " variant " << to_char(v);
        }
    }
}

TEST(Sampler, VariantsAgreeOnExactHeadsWhereMasksAreInvertible) {
    gen::Rng rng(72);
    ScheduleParams p;
    p.T = 10;
    p.bnr = 0.3;
    p.beta_max = 2.0;
    const DiffusionSchedule s = make_bnr_schedule(p);
    const Grid x0 = rng.grid(4, 4);
    NoiseSource noise(1);
    for (std::size_t t = 2; t <= s.T; ++t) {
        const Grid xt = forward_sample(x0, s, t, noise);
        const PredictionPair exact = KnownClean{x0}(xt, s.alpha[t], s.beta[t]);
        const Estimates b = variant_predictions(exact, Variant::b, s, t, 1e-6);
        const Estimates d = variant_predictions(exact, Variant::d, s, t, 1e-6);
        EXPECT_LE(max_abs_diff(b.x0, x0), 1e-9);
        // d cannot see the DC coefficient; everything else is recovered.
        Grid x0_ac = x0;
        for (auto& v : x0_ac.values()) v -= mean(x0);
        Grid d_ac = d.x0;
        for (auto& v : d_ac.values()) v -= mean(d.x0);
        EXPECT_LE(max_abs_diff(d_ac, x0_ac), 1e-9);
    }
}

TEST(Sampler, PseudoInverseGuardZeroesSingularModes) {
    ScheduleParams p;
    p.T = 3;
    p.bnr = 50.0;
    const DiffusionSchedule s = make_bnr_schedule(p);
    const Grid d(4, 4, std::vector<double>(16, 1.0));
    const Estimates e = variant_predictions({d, d}, Variant::b, s, s.T, 1e-6);
    EXPECT_TRUE(e.x0.all_finite());
    EXPECT_THROW(variant_predictions({d, d}, Variant::b, s, s.T, 0.0), DomainError);
}

TEST(Sampler, NfeCounts) {
    EXPECT_EQ(nfe_for(18, StepMode::heun), 35u);
    EXPECT_EQ(nfe_for(18, StepMode::euler), 18u);
    const GaussianMixture gm = gaussian(1, 2, 1.0, 0.1);
    const OracleDenoiser oracle(gm);
    for (StepMode m : {StepMode::heun, StepMode::euler}) {
        NoiseSource noise(2);
        const SampleResult r = sample(config(18, 0.5, Variant::d, m), oracle, noise, 3, 1, 2);
        EXPECT_EQ(r.nfe, nfe_for(18, m));
    }
}

TEST(Sampler, PointMassLimit) {
    const GaussianMixture gm = gaussian(2, 2, 0.8, 1e-10);
    const OracleDenoiser oracle(gm);
    for (double bnr : {0.0, 0.5, 2.0}) {
        NoiseSource noise(3);
        const SampleResult r = sample(config(24, bnr), oracle, noise, 50, 2, 2);
        const Grid target = to_grid(gm.means()[0], 2, 2);
        for (const Grid& x : r.samples) EXPECT_LE(max_abs_diff(x, target), 1e-3) << "bnr " << bnr;
    }
}

TEST(Sampler, HeunConvergesFasterThanEuler) {
    // Deterministic chains from one prior draw; compare the state at t = 1 (beta = beta_min) with a
    // fine-grid reference. The final step to beta = 0 has fixed length and is excluded.
    ScheduleParams base;
    base.beta_min = 0.05;
    base.beta_max = 10.0;
    base.bnr = 0.5;
    Eigen::MatrixXd cov(4, 4);
    cov << 0.3, 0.1, 0.0, 0.05, 0.1, 0.2, 0.02, 0.0, 0.0, 0.02, 0.25, 0.1, 0.05, 0.0, 0.1, 0.3;
    const GaussianMixture gm(2, 2, {0.4, 0.6}, {Eigen::Vector4d(0.5, -0.5, 0.2, 0.1), Eigen::Vector4d(-0.4, 0.3, -0.2, 0.6)},
                             {cov, 0.5 * cov + 0.05 * Eigen::MatrixXd::Identity(4, 4)});
    const OracleDenoiser oracle(gm);
    auto state_at_one = [&](std::size_t T, StepMode m) {
        ScheduleParams p = base;
        p.T = T;
        SamplerConfig cfg;
        cfg.step_mode = m;
        cfg.schedule = make_bnr_schedule(p);
        NoiseSource noise(4);
        SampleOptions opts;
        opts.record_trajectories = true;
        const SampleResult r = sample(cfg, oracle, noise, 1, 2, 2, opts);
        const Trajectory& tr = r.trajectories[0];
        return tr[tr.size() - 2].x;
    };
    const Grid ref = state_at_one(2048, StepMode::heun);
    auto order = [&](StepMode m) {
        const double e1 = max_abs_diff(state_at_one(16, m), ref);
        const double e2 = max_abs_diff(state_at_one(64, m), ref);
        return std::log(e1 / e2) / std::log(4.0);
    };
    const double heun = order(StepMode::heun), euler = order(StepMode::euler);
    EXPECT_GE(heun, 1.5);
    EXPECT_GE(euler, 0.7);
    EXPECT_GT(heun, euler + 0.4);
}

TEST(Sampler, WorkerCountDoesNotChangeResults) {
    const GaussianMixture gm = gaussian(1, 2, 1.0, 0.1);
    const OracleDenoiser oracle(gm);
    SamplerConfig cfg = config(8, 0.5);
    ScheduleParams p;
    p.T = 8;
    p.eta = 1.0;
    p.beta_max = 20.0;
    cfg.schedule = make_bnr_schedule(p);
    SampleOptions one, four;
    four.workers = 4;
    NoiseSource n1(5), n2(5);
    const SampleResult a = sample(cfg, oracle, n1, 37, 1, 2, one);
    const SampleResult b = sample(cfg, oracle, n2, 37, 1, 2, four);
    EXPECT_EQ(a.samples, b.samples);
}

TEST(Sampler, ExcursionIsRecordedPerChain) {
    const GaussianMixture gm = gaussian(1, 2, 1.0, 0.1);
    const OracleDenoiser oracle(gm);
    const SamplerConfig cfg = config(6, 0.0);
    const ExcursionMeter meter(gm, cfg.schedule);
    SampleOptions opts;
    opts.excursion = &meter;
    opts.record_trajectories = true;
    NoiseSource noise(6);
    const SampleResult r = sample(cfg, oracle, noise, 5, 1, 2, opts);
    ASSERT_EQ(r.max_excursion.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_TRUE(std::isfinite(r.max_excursion[i]));
        EXPECT_EQ(r.trajectories[i].size(), cfg.schedule.T + 1);
        double top = 0.0;
        for (const auto& pt : r.trajectories[i]) top = std::max(top, *pt.manifold_distance);
        EXPECT_EQ(top, r.max_excursion[i]);
    }
}

TEST(Sampler, NonFinitePredictionsFail) {
    NoiseSource noise(7);
    EXPECT_THROW(sample(config(4, 0.5), Broken{}, noise, 2, 1, 2), NumericalError);
}

TEST(Sampler, ParsesNames) {
    EXPECT_EQ(parse_variant("c"), Variant::c);
    EXPECT_EQ(to_char(Variant::b), 'b');
    EXPECT_THROW(parse_variant("e"), DomainError);
    EXPECT_EQ(parse_step_mode("euler"), StepMode::euler);
    EXPECT_THROW(parse_step_mode("rk4"), DomainError);
}
