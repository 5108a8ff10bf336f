#include <gtest/gtest.h>

#include <filesystem>

#include "generators.hpp"
#include "warm/mixture.hpp"
#include "warm/predictor.hpp"

using namespace warm;

namespace {

void fill(TwoHeadPredictor& p, const std::string& name, std::vector<double> values) {
    const ParamTensor& t = p.tensor(name);
    ASSERT_EQ(values.size(), t.size()) << name;
    std::copy(values.begin(), values.end(), p.parameters().begin() + static_cast<long>(t.offset));
}

GaussianMixture single_gaussian() {
    Eigen::Matrix2d c;
    c << 0.4, 0.1, 0.1, 0.3;
    return GaussianMixture(1, 2, {1.0}, {Eigen::Vector2d(0.5, -0.3)}, {c});
}

}  // namespace

TEST(Predictor, HandComputedForwardPass) {
    PredictorShape shape{2, 2, 2, true, 1.0};
    TwoHeadPredictor p(shape);
    fill(p, "trunk1.weight", {0.1, 0.2, -0.1, 0.3, 0.5, -0.2, -0.3, 0.1, 0.2, 0.0, 0.1, 0.4});
    fill(p, "trunk1.bias", {0.05, -0.05});
    fill(p, "trunk2.weight", {0.5, -0.4, 0.3, 0.2});
    fill(p, "trunk2.bias", {0.0, 0.1});
    fill(p, "denoise.weight", {1, 0, 0, 1, 1, 1, -1, 0.5});
    fill(p, "denoise.bias", {0, 0.1, 0, -0.1});
    fill(p, "residual.weight", {0.2, 0.3, -0.2, 0.1, 0, 0, 0.5, -0.5});
    fill(p, "residual.bias", {0.01, 0, 0, 0});
    const PredictionPair out = p.predict(Grid(2, 2, {0.5, -0.5, 1.0, 0.0}), 1.0, 2.0);
    const double d[] = {0.1304828740016887, 0.06668483291646196, 0.30772498781815905, -0.0813045361934451};
    const double r[] = {0.042723970424644216, 0.0018197530192364739, 0.0, -0.026139209700516614};
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(out.denoised[i], d[i], 1e-14);
        EXPECT_NEAR(out.residual[i], r[i], 1e-14);
    }
}

TEST(Predictor, ZeroHeadsWithoutSkipGiveZeros) {
    TwoHeadPredictor p({3, 3, 16, false, 1.0});
    p.initialize(1, 0.0);
    gen::Rng rng(61);
    const PredictionPair out = p(rng.grid(3, 3), 0.4, 0.9);
    for (double v : out.denoised.values()) EXPECT_EQ(v, 0.0);
    for (double v : out.residual.values()) EXPECT_EQ(v, 0.0);
}

TEST(Predictor, DeterministicAndShapeChecked) {
    TwoHeadPredictor p({2, 3, 8, true, 0.5});
    p.initialize(2);
    gen::Rng rng(62);
    const Grid x = rng.grid(2, 3);
    const PredictionPair a = p(x, 0.2, 0.3), b = p(x, 0.2, 0.3);
    EXPECT_EQ(a.denoised, b.denoised);
    EXPECT_EQ(a.residual, b.residual);
    EXPECT_EQ(a.denoised.height(), 2u);
    EXPECT_EQ(a.residual.width(), 3u);
    EXPECT_THROW(p(Grid(3, 2), 0.2, 0.3), ShapeError);
    EXPECT_THROW(p(x, 0.2, 0.0), DomainError);
}

TEST(Loss, ExactTargetsAndConstantOffsets) {
    TwoHeadPredictor p({1, 2, 4, false, 1.0});
    p.initialize(3, 0.0);
    // Zero heads: with targets equal to the outputs (0), both losses vanish.
    TrainExample ex{Grid(1, 2), 1, 0.5, 1.0, Grid(1, 2, {0.1, 0.2}), Grid(1, 2), Grid(1, 2)};
    EXPECT_EQ(loss(p, {ex}).total(), 0.0);
    // Targets offset by c everywhere: each loss equals c^2.
    ex.target_d = Grid(1, 2, {-0.3, -0.3});
    ex.target_r = Grid(1, 2, {0.3, 0.3});
    const LossPair l = loss(p, {ex, ex});
    EXPECT_NEAR(l.denoiser, 0.09, 1e-15);
    EXPECT_NEAR(l.residual, 0.09, 1e-15);
}

TEST(Loss, MatchesElementwiseSummation) {
    TwoHeadPredictor p({2, 2, 8, true, 1.0});
    p.initialize(4);
    const DiffusionSchedule s = make_bnr_schedule({});
    NoiseSource noise(6);
    gen::Rng rng(63);
    const TrainBatch batch = make_batch([&](NoiseSource&) { return rng.grid(2, 2); }, s, 9, noise);
    double d = 0.0, r = 0.0;
    for (const auto& ex : batch) {
        const PredictionPair out = p(ex.x_t, ex.alpha, ex.beta);
        for (int i = 0; i < 4; ++i) {
            d += (out.denoised[i] - ex.target_d[i]) * (out.denoised[i] - ex.target_d[i]);
            r += (out.residual[i] - ex.target_r[i]) * (out.residual[i] - ex.target_r[i]);
        }
    }
    const LossPair l = loss(p, batch);
    EXPECT_NEAR(l.denoiser, d / 36.0, 1e-14);
    EXPECT_NEAR(l.residual, r / 36.0, 1e-14);
}

TEST(Batch, TargetsFollowTheForwardProcess) {
    const DiffusionSchedule s = make_bnr_schedule({});
    NoiseSource noise(7);
    gen::Rng rng(64);
    const TrainBatch batch = make_batch([&](NoiseSource&) { return rng.grid(3, 3); }, s, 20, noise);
    for (const auto& ex : batch) {
        EXPECT_GE(ex.t, 1u);
        EXPECT_LE(ex.t, s.T);
        EXPECT_EQ(ex.alpha, s.alpha[ex.t]);
        EXPECT_LE(max_abs_diff(ex.target_d, blur(ex.x0, ex.alpha)), 1e-15);
        EXPECT_LE(max_abs_diff(ex.target_r, ex.x0 - ex.target_d), 1e-15);
    }
    const TrainExample clean = make_example(rng.grid(3, 3), s, 4, noise, {true, true, true});
    EXPECT_EQ(clean.target_r, clean.x0);
}

TEST(Gradient, MatchesCentralDifferencesOnEveryParameter) {
    for (bool skip : {true, false}) {
        TwoHeadPredictor p({2, 2, 6, skip, 0.7});
        p.initialize(8, 0.5);
        const DiffusionSchedule s = make_bnr_schedule({});
        NoiseSource noise(9);
        gen::Rng rng(65);
        const TrainBatch batch = make_batch([&](NoiseSource&) { return rng.grid(2, 2); }, s, 5, noise);
        const std::vector<double> g = gradient(p, batch);
        const double h = 1e-5;
        for (std::size_t i = 0; i < p.parameters().size(); ++i) {
            const double keep = p.parameters()[i];
            p.parameters()[i] = keep + h;
            const double up = loss(p, batch).total();
            p.parameters()[i] = keep - h;
            const double down = loss(p, batch).total();
            p.parameters()[i] = keep;
            const double fd = (up - down) / (2 * h);
            EXPECT_LE(std::abs(fd - g[i]), 1e-4 * std::max(std::abs(fd), 1e-3)) << "parameter " << i;
        }
    }
}

TEST(Training, ZeroLearningRateLeavesParametersAlone) {
    TwoHeadPredictor p({1, 2, 8, true, 1.0});
    p.initialize(10);
    const auto before = p.parameters();
    const DiffusionSchedule s = make_bnr_schedule({});
    const GaussianMixture gm = single_gaussian();
    NoiseSource noise(11);
    train_step(p, make_batch([&](NoiseSource& r) { return gm.draw(r); }, s, 8, noise), 0.0);
    EXPECT_EQ(p.parameters(), before);
}

TEST(Training, NonFiniteLossAborts) {
    TwoHeadPredictor p({1, 2, 8, true, 1.0});
    p.initialize(12);
    const DiffusionSchedule s = make_bnr_schedule({});
    NoiseSource noise(13);
    TrainBatch batch = make_batch([](NoiseSource&) { return Grid(1, 2, {1e300, -1e300}); }, s, 4, noise);
    EXPECT_THROW(train_step(p, batch, 0.1), NumericalError);
}

TEST(Training, LossDropsAndApproachesTheOracle) {
    const GaussianMixture gm = single_gaussian();
    ScheduleParams sp;
    sp.T = 200;
    const DiffusionSchedule s = make_bnr_schedule(sp);
    TwoHeadPredictor p({1, 2, 64, true, 1.0});
    p.initialize(14);
    auto draw = [&](NoiseSource& r) { return gm.draw(r); };
    NoiseSource eval_noise(15);
    const TrainBatch eval = make_batch(draw, s, 512, eval_noise);
    auto oracle_gap = [&] {
        double gap = 0.0;
        for (const auto& ex : eval) {
            const PredictionPair got = p(ex.x_t, ex.alpha, ex.beta);
            const PredictionPair want = MixturePosterior(gm, ex.alpha, ex.beta).predictions(ex.x_t);
            for (int i = 0; i < 2; ++i) {
                gap += std::pow(got.denoised[i] - want.denoised[i], 2);
                gap += std::pow(got.residual[i] - want.residual[i], 2);
            }
        }
        return gap / eval.size();
    };

    const double initial = loss(p, eval).total();
    TrainingOptions opts;
    opts.lr = 0.05;
    opts.seed = 16;
    opts.steps = 500;
    train(p, draw, s, opts);
    EXPECT_LT(loss(p, eval).total(), initial);

    std::vector<double> gaps{oracle_gap()};
    for (std::size_t steps : {1500u, 4000u}) {
        opts.steps = steps;
        opts.seed += 1;
        train(p, draw, s, opts);
        gaps.push_back(oracle_gap());
    }
    for (std::size_t i = 1; i < gaps.size(); ++i) EXPECT_LE(gaps[i], gaps[i - 1]) << "checkpoint " << i;
}

TEST(Checkpoint, RoundTripIsExact) {
    TwoHeadPredictor p({2, 3, 5, false, 0.8});
    p.initialize(17);
    const auto dir = std::filesystem::temp_directory_path() / "warm_ckpt_test";
    std::filesystem::create_directories(dir);
    save_checkpoint(p, dir / "p");
    const TwoHeadPredictor q = load_checkpoint(dir / "p");
    EXPECT_EQ(q.parameters(), p.parameters());
    EXPECT_EQ(q.shape().height, 2u);
    EXPECT_EQ(q.shape().hidden, 5u);
    EXPECT_FALSE(q.shape().skip);
    EXPECT_EQ(std::filesystem::file_size(dir / "p.bin"), 8 * p.parameters().size());
    std::filesystem::resize_file(dir / "p.bin", 16);
    EXPECT_THROW(load_checkpoint(dir / "p"), Error);
    std::filesystem::remove_all(dir);
}
