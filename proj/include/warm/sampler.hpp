#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "warm/blur.hpp"
#include "warm/forward.hpp"
#include "warm/grid.hpp"
#include "warm/mixture.hpp"
#include "warm/noise.hpp"
#include "warm/prediction.hpp"
#include "warm/schedule.hpp"

namespace warm {

/// How the two heads are turned into the clean estimate and the blurry estimate.
///   a: single head R -> x0; blurry = blur(R)
///   b: single head D -> blurry; x0 = V M^+ V^T D
///   c: R -> x0 and D -> blurry, both direct
///   d: R -> residual; x0 = V (I - M)^+ V^T R, blurry = D
enum class Variant { a, b, c, d };
enum class StepMode { euler, heun };

inline char to_char(Variant v) { return static_cast<char>('a' + static_cast<int>(v)); }

inline Variant parse_variant(const std::string& s) {
    if (s.size() == 1 && s[0] >= 'a' && s[0] <= 'd') return static_cast<Variant>(s[0] - 'a');
    throw DomainError("unknown parameterization variant '" + s + "' (expected a, b, c or d)");
}

inline const char* to_string(StepMode m) { return m == StepMode::heun ? "heun" : "euler"; }

inline StepMode parse_step_mode(const std::string& s) {
    if (s == "heun") return StepMode::heun;
    if (s == "euler") return StepMode::euler;
    throw DomainError("unknown step mode '" + s + "' (expected euler or heun)");
}

struct SamplerConfig {
    Variant variant = Variant::d;
    StepMode step_mode = StepMode::heun;
    DiffusionSchedule schedule;
    double dc_guard = 1e-6;  // mask entries within this of singular are pseudo-inverted to 0
};

/// Predictor evaluations for a full chain.
inline std::size_t nfe_for(std::size_t T, StepMode mode) {
    return mode == StepMode::heun ? 2 * T - 1 : T;
}

/// Clean and blurry estimates derived from raw head outputs.
struct Estimates {
    Grid x0;
    Grid blurry;
};

inline Estimates variant_predictions(const PredictionPair& pred, Variant variant,
                                     const DiffusionSchedule& s, std::size_t t, double dc_guard) {
    if (t > s.T) throw DomainError("variant_predictions: t out of range");
    if (!(dc_guard > 0.0 && dc_guard < 1.0)) throw DomainError("dc_guard must lie in (0, 1)");
    const Grid& d = pred.denoised;
    const Grid& r = pred.residual;
    const BlurMask mask = make_blur_mask(d.height(), d.width(), s.alpha[t]);
    switch (variant) {
        case Variant::a:
            return {r, apply_blur(r, mask)};
        case Variant::b: {
            auto inv = [dc_guard](double e) { return e > dc_guard ? 1.0 / e : 0.0; };
            return {dct_inverse(scale_spectrum(dct_forward(d), mask, inv)), d};
        }
        case Variant::c:
            return {r, d};
        case Variant::d: {
            auto inv = [dc_guard](double e) { return 1.0 - e > dc_guard ? 1.0 / (1.0 - e) : 0.0; };
            return {dct_inverse(scale_spectrum(dct_forward(r), mask, inv)), d};
        }
    }
    throw DomainError("variant_predictions: bad variant");
}

namespace detail {

// V (M_{t-1} - M_t) V^T x0
inline Grid detail_increment(const Grid& x0, const DiffusionSchedule& s, std::size_t t) {
    if (s.alpha[t - 1] == s.alpha[t]) return Grid(x0.height(), x0.width());
    const BlurMask prev = make_blur_mask(x0.height(), x0.width(), s.alpha[t - 1]);
    const BlurMask cur = make_blur_mask(x0.height(), x0.width(), s.alpha[t]);
    SpectralGrid spec = dct_forward(x0);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= prev[i] - cur[i];
    return dct_inverse(spec);
}

// x_t + detail + (beta_t - keep) * velocity, velocity being the normalized direction to blurry.
inline Grid drift(const Grid& x_t, const Grid& detail, const Grid& velocity,
                  const DiffusionSchedule& s, std::size_t t, double keep) {
    Grid out = x_t + detail;
    if (s.beta[t] > 0.0) axpy(out, s.beta[t] - keep, velocity);
    return out;
}

inline Grid to_blurry_direction(const Grid& blurry, const Grid& x, double beta) {
    if (beta == 0.0) return Grid(x.height(), x.width());
    return (1.0 / beta) * (blurry - x);
}

inline void add_noise(Grid& x, double scale, NoiseSource& rng) {
    if (scale > 0.0)
        for (auto& v : x.values()) v += scale * rng.normal();
}

}  // namespace detail

/// One reverse step t -> t-1 from a single prediction:
/// x_t + V (M_{t-1} - M_t) V^T x0_hat + (beta_t - sqrt(beta_{t-1}^2 - sigma_t^2)) (blurry - x_t) / beta_t
///     + sigma_t eps.
/// For variant d this is V (M_{t-1} - M_t)(I - M_t)^+ V^T R applied to the residual head.
inline Grid reverse_step(const Grid& x_t, const PredictionPair& pred, const DiffusionSchedule& s,
                         std::size_t t, const SamplerConfig& cfg, NoiseSource& rng) {
    detail::check_step(s, t, 1);
    require_same_shape(x_t, pred.denoised, "reverse_step");
    require_same_shape(x_t, pred.residual, "reverse_step");
    const Estimates est = variant_predictions(pred, cfg.variant, s, t, cfg.dc_guard);
    Grid out = detail::drift(x_t, detail::detail_increment(est.x0, s, t),
                             detail::to_blurry_direction(est.blurry, x_t, s.beta[t]), s, t,
                             detail::retained_noise(s, t));
    detail::add_noise(out, s.sigma[t], rng);
    return out;
}

/// Heun-corrected reverse step. The deterministic drift is averaged over the prediction at t
/// and a second prediction at the Euler proposal for t-1; the sigma_t noise is added after.
/// Falls back to the Euler step when beta_{t-1} = 0 (the final step). `evaluations` counts
/// predictor calls made here.
template <Predictor P>
Grid heun_step(const Grid& x_t, const PredictionPair& pred, const P& predictor,
               const DiffusionSchedule& s, std::size_t t, const SamplerConfig& cfg,
               NoiseSource& rng, std::size_t& evaluations) {
    detail::check_step(s, t, 1);
    if (s.beta[t - 1] == 0.0) return reverse_step(x_t, pred, s, t, cfg, rng);

    const Estimates first = variant_predictions(pred, cfg.variant, s, t, cfg.dc_guard);
    const Grid v1 = detail::to_blurry_direction(first.blurry, x_t, s.beta[t]);
    const Grid proposal =
        detail::drift(x_t, detail::detail_increment(first.x0, s, t), v1, s, t, s.beta[t - 1]);

    const PredictionPair pred2 = predictor(proposal, s.alpha[t - 1], s.beta[t - 1]);
    ++evaluations;
    const Estimates second = variant_predictions(pred2, cfg.variant, s, t - 1, cfg.dc_guard);
    const Grid v2 = detail::to_blurry_direction(second.blurry, proposal, s.beta[t - 1]);

    const Grid x0_avg = 0.5 * (first.x0 + second.x0);
    const Grid v_avg = 0.5 * (v1 + v2);
    Grid out = detail::drift(x_t, detail::detail_increment(x0_avg, s, t), v_avg, s, t,
                             detail::retained_noise(s, t));
    detail::add_noise(out, s.sigma[t], rng);
    return out;
}

struct TrajectoryPoint {
    std::size_t t;
    Grid x;
    std::optional<double> manifold_distance;
};

/// States from t = T down to t = 0.
using Trajectory = std::vector<TrajectoryPoint>;

/// Mahalanobis excursion of x_t from the corrupted data law at each step of a schedule.
class ExcursionMeter {
public:
    ExcursionMeter(const GaussianMixture& gm, const DiffusionSchedule& s) {
        for (std::size_t t = 0; t <= s.T; ++t)
            levels_.push_back(corrupted_mixture(gm, s.alpha[t], s.beta[t]));
    }

    double operator()(const Grid& x, std::size_t t) const {
        return manifold_distance(levels_.at(t), x);
    }

private:
    std::vector<GaussianMixture> levels_;
};

struct SampleOptions {
    bool record_trajectories = false;
    const ExcursionMeter* excursion = nullptr;  // per-step distances, when set
    unsigned workers = 1;
};

struct SampleResult {
    std::vector<Grid> samples;
    std::vector<Trajectory> trajectories;   // filled when requested
    std::vector<double> max_excursion;      // per chain, when an ExcursionMeter is given
    std::size_t nfe = 0;                    // predictor calls per chain
};

/// Runs one chain from x_T ~ N(0, beta_T^2 I) down to t = 0.
template <Predictor P>
Grid sample_chain(const SamplerConfig& cfg, const P& predictor, std::size_t height,
                  std::size_t width, NoiseSource& rng, std::size_t& evaluations,
                  Trajectory* trajectory = nullptr, const ExcursionMeter* excursion = nullptr,
                  double* max_excursion = nullptr) {
    const DiffusionSchedule& s = cfg.schedule;
    Grid x = s.beta[s.T] * rng.normal_grid(height, width);
    auto record = [&](std::size_t t) {
        std::optional<double> dist;
        if (excursion) {
            dist = (*excursion)(x, t);
            if (max_excursion) *max_excursion = std::max(*max_excursion, *dist);
        }
        if (trajectory) trajectory->push_back({t, x, dist});
    };
    record(s.T);
    for (std::size_t t = s.T; t >= 1; --t) {
        const PredictionPair pred = predictor(x, s.alpha[t], s.beta[t]);
        ++evaluations;
        if (!pred.denoised.all_finite() || !pred.residual.all_finite())
            throw NumericalError("sampler: predictor returned non-finite values");
        x = cfg.step_mode == StepMode::heun
                ? heun_step(x, pred, predictor, s, t, cfg, rng, evaluations)
                : reverse_step(x, pred, s, t, cfg, rng);
        if (!x.all_finite()) throw NumericalError("sampler: state became non-finite");
        record(t - 1);
    }
    return x;
}

/// Draws n independent chains. Chain i uses its own stream derived from one draw of `rng`, so
/// results do not depend on the worker count.
template <Predictor P>
SampleResult sample(const SamplerConfig& cfg, const P& predictor, NoiseSource& rng, std::size_t n,
                    std::size_t height, std::size_t width, const SampleOptions& opts = {}) {
    validate(cfg.schedule);
    if (!(cfg.dc_guard > 0.0 && cfg.dc_guard < 1.0))
        throw DomainError("sampler: dc_guard must lie in (0, 1)");
    const std::uint64_t base = rng.next_u64();

    SampleResult result;
    result.samples.assign(n, Grid(height, width));
    if (opts.record_trajectories) result.trajectories.resize(n);
    if (opts.excursion) result.max_excursion.assign(n, 0.0);
    std::vector<std::size_t> calls(n, 0);

    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            NoiseSource chain_rng(derive_seed(base, i));
            result.samples[i] = sample_chain(
                cfg, predictor, height, width, chain_rng, calls[i],
                opts.record_trajectories ? &result.trajectories[i] : nullptr, opts.excursion,
                opts.excursion ? &result.max_excursion[i] : nullptr);
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(opts.workers, n));
    if (workers == 1) {
        run(0, n);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    run(std::min(n, w * chunk), std::min(n, (w + 1) * chunk));
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    result.nfe = n ? calls.front() : nfe_for(cfg.schedule.T, cfg.step_mode);
    return result;
}

}  // namespace warm
