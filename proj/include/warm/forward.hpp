#pragma once

#include <cmath>
#include <cstddef>

#include "warm/blur.hpp"
#include "warm/grid.hpp"
#include "warm/noise.hpp"
#include "warm/schedule.hpp"

namespace warm {

namespace detail {

inline void check_step(const DiffusionSchedule& s, std::size_t t, std::size_t lowest) {
    if (t < lowest || t > s.T)
        throw DomainError("step t=" + std::to_string(t) + " out of range " +
                          std::to_string(lowest) + ".." + std::to_string(s.T));
}

// Coefficient sqrt(beta[t-1]^2 - sigma[t]^2) carried by the noise direction.
inline double retained_noise(const DiffusionSchedule& s, std::size_t t) {
    const double b = s.beta[t - 1], sg = s.sigma[t];
    return std::sqrt(std::max(0.0, b * b - sg * sg));
}

// (x_t - blur(x0, alpha_t)) / beta_t, or zero for a noise-free step.
inline Grid noise_direction(const Grid& x_t, const Grid& blurred, double beta) {
    if (beta == 0.0) {
        if (!(x_t == blurred))
            throw DomainError("transition: beta_t = 0 but x_t differs from the blurred x0");
        return Grid(x_t.height(), x_t.width());
    }
    return (1.0 / beta) * (x_t - blurred);
}

}  // namespace detail

/// Draws x_t ~ N(V M_{alpha_t} V^T x0, beta_t^2 I). t = 0 returns x0 unchanged.
inline Grid forward_sample(const Grid& x0, const DiffusionSchedule& s, std::size_t t,
                           NoiseSource& rng) {
    detail::check_step(s, t, 0);
    if (t == 0) return x0;
    Grid x = blur(x0, s.alpha[t]);
    if (s.beta[t] > 0.0)
        for (auto& v : x.values()) v += s.beta[t] * rng.normal();
    return x;
}

/// Mean of q_sigma(x_{t-1} | x_t, x0):
/// blur(x0, alpha_{t-1}) + sqrt(beta_{t-1}^2 - sigma_t^2) (x_t - blur(x0, alpha_t)) / beta_t.
inline Grid transition_mean(const Grid& x0, const Grid& x_t, const DiffusionSchedule& s,
                            std::size_t t) {
    detail::check_step(s, t, 1);
    require_same_shape(x0, x_t, "transition_mean");
    Grid mean = blur(x0, s.alpha[t - 1]);
    axpy(mean, detail::retained_noise(s, t),
         detail::noise_direction(x_t, blur(x0, s.alpha[t]), s.beta[t]));
    return mean;
}

/// The same mean written as x_t + detail term + step along the direction to the blurry x0:
/// x_t + V (M_{t-1} - M_t) V^T x0 + (beta_t - sqrt(beta_{t-1}^2 - sigma_t^2)) (blur_t(x0) - x_t) / beta_t.
inline Grid decomposed_transition_mean(const Grid& x0, const Grid& x_t, const DiffusionSchedule& s,
                                       std::size_t t) {
    detail::check_step(s, t, 1);
    require_same_shape(x0, x_t, "decomposed_transition_mean");
    const BlurMask prev = make_blur_mask(x0.height(), x0.width(), s.alpha[t - 1]);
    const BlurMask cur = make_blur_mask(x0.height(), x0.width(), s.alpha[t]);

    SpectralGrid spec = dct_forward(x0);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= prev[i] - cur[i];
    Grid detail = dct_inverse(spec);

    const Grid blurred = apply_blur(x0, cur);
    Grid out = x_t + detail;
    // noise_direction is (x_t - blurred) / beta, the negative of the blurry-x0 direction.
    axpy(out, -(s.beta[t] - detail::retained_noise(s, t)),
         detail::noise_direction(x_t, blurred, s.beta[t]));
    return out;
}

/// transition_mean + sigma_t * eps.
inline Grid transition_sample(const Grid& x0, const Grid& x_t, const DiffusionSchedule& s,
                              std::size_t t, NoiseSource& rng) {
    Grid x = transition_mean(x0, x_t, s, t);
    if (s.sigma[t] > 0.0)
        for (auto& v : x.values()) v += s.sigma[t] * rng.normal();
    return x;
}

}  // namespace warm
