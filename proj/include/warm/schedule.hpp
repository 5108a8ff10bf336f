#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "warm/error.hpp"

namespace warm {

/// Corruption sequences indexed 0..T. Index 0 is clean data (alpha = beta = 0).
struct DiffusionSchedule {
    std::size_t T = 0;
    std::vector<double> alpha;  // blur std per step, pixels
    std::vector<double> beta;   // noise std per step, data units
    std::vector<double> sigma;  // reverse-step stochasticity; sigma[0] unused (0)
    std::optional<double> bnr;  // set for constant-ratio schedules, empty when BNR varies with t
};

/// Parameters shared by the schedule families.
struct ScheduleParams {
    std::size_t T = 18;
    double beta_min = 0.02;
    double beta_max = 80.0;
    double rho = 7.0;
    double bnr = 0.5;
    double eta = 0.0;
};

namespace detail {

inline void validate_params(const ScheduleParams& p) {
    if (p.T < 1) throw DomainError("schedule: T must be >= 1");
    if (!(p.beta_min > 0.0) || !(p.beta_max > p.beta_min) || !std::isfinite(p.beta_max))
        throw DomainError("schedule: need 0 < beta_min < beta_max");
    if (!(p.rho >= 1.0) || !std::isfinite(p.rho)) throw DomainError("schedule: rho must be >= 1");
    if (!(p.bnr >= 0.0) || !std::isfinite(p.bnr))
        throw DomainError("schedule: bnr must be finite and >= 0");
    if (!(p.eta >= 0.0 && p.eta <= 1.0)) throw DomainError("schedule: eta must lie in [0, 1]");
}

// Position u in [0, 1] of step t in 1..T. A single-step schedule sits at the top (u = 1).
inline double step_position(std::size_t t, std::size_t T) {
    if (T == 1) return 1.0;
    return static_cast<double>(t - 1) / static_cast<double>(T - 1);
}

// rho-power interpolation between beta_min (u = 0) and beta_max (u = 1).
inline double noise_level(const ScheduleParams& p, double u) {
    const double lo = std::pow(p.beta_min, 1.0 / p.rho);
    const double hi = std::pow(p.beta_max, 1.0 / p.rho);
    return std::pow(lo + u * (hi - lo), p.rho);
}

inline void fill_sigma(DiffusionSchedule& s, double eta) {
    s.sigma.assign(s.T + 1, 0.0);
    for (std::size_t t = 1; t <= s.T; ++t) {
        const double prev = s.beta[t - 1], cur = s.beta[t];
        if (cur <= 0.0) continue;
        const double ratio = prev / cur;
        double v = eta * prev * std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
        s.sigma[t] = std::clamp(v, 0.0, prev);
    }
}

}  // namespace detail

/// Checks monotonicity and sigma[t] <= beta[t-1]; throws DomainError on violation.
inline void validate(const DiffusionSchedule& s) {
    const std::size_t n = s.T + 1;
    if (s.T < 1 || s.alpha.size() != n || s.beta.size() != n || s.sigma.size() != n)
        throw DomainError("schedule: sequences must have T+1 entries");
    if (s.alpha[0] != 0.0 || s.beta[0] != 0.0)
        throw DomainError("schedule: alpha[0] and beta[0] must be 0");
    for (std::size_t t = 1; t < n; ++t) {
        if (s.alpha[t] < s.alpha[t - 1] || s.beta[t] < s.beta[t - 1])
            throw DomainError("schedule: alpha and beta must be non-decreasing");
        if (s.sigma[t] < 0.0 || s.sigma[t] > s.beta[t - 1])
            throw DomainError("schedule: sigma[t] must lie in [0, beta[t-1]]");
    }
}

/// Constant blur-to-noise ratio: alpha[t] = bnr * beta[t] on a rho-power noise grid.
/// sigma[t] = eta * beta[t-1] * sqrt(1 - (beta[t-1]/beta[t])^2), so eta = 0 is deterministic.
inline DiffusionSchedule make_bnr_schedule(const ScheduleParams& p) {
    detail::validate_params(p);
    DiffusionSchedule s;
    s.T = p.T;
    s.bnr = p.bnr;
    s.alpha.assign(p.T + 1, 0.0);
    s.beta.assign(p.T + 1, 0.0);
    for (std::size_t t = 1; t <= p.T; ++t) {
        s.beta[t] = detail::noise_level(p, detail::step_position(t, p.T));
        s.alpha[t] = p.bnr * s.beta[t];
    }
    detail::fill_sigma(s, p.eta);
    return s;
}

/// Knot table for the blurring-diffusion preset: BNR as a function of normalized step
/// position u in [0, 1], linearly interpolated. Low blur relative to noise at the clean end,
/// rising steeply toward the prior end, the shape of the heat-dissipation family.
inline constexpr std::array<std::array<double, 2>, 6> kBlurringDiffusionBnrKnots{{
    {0.0, 0.25},
    {0.2, 0.75},
    {0.4, 1.5},
    {0.6, 3.0},
    {0.8, 5.5},
    {1.0, 8.0},
}};

inline double blurring_diffusion_bnr(double u) {
    const auto& k = kBlurringDiffusionBnrKnots;
    if (u <= k.front()[0]) return k.front()[1];
    for (std::size_t i = 1; i < k.size(); ++i) {
        if (u <= k[i][0]) {
            const double w = (u - k[i - 1][0]) / (k[i][0] - k[i - 1][0]);
            return k[i - 1][1] + w * (k[i][1] - k[i - 1][1]);
        }
    }
    return k.back()[1];
}

/// Preset with a time-varying BNR increasing in t; the noise grid matches make_bnr_schedule and
/// `p.bnr` is ignored.
inline DiffusionSchedule make_blurring_diffusion_schedule(const ScheduleParams& p) {
    ScheduleParams q = p;
    q.bnr = 0.0;
    detail::validate_params(q);
    DiffusionSchedule s;
    s.T = p.T;
    s.alpha.assign(p.T + 1, 0.0);
    s.beta.assign(p.T + 1, 0.0);
    for (std::size_t t = 1; t <= p.T; ++t) {
        const double u = detail::step_position(t, p.T);
        s.beta[t] = detail::noise_level(q, u);
        s.alpha[t] = blurring_diffusion_bnr(u) * s.beta[t];
    }
    detail::fill_sigma(s, p.eta);
    return s;
}

/// alpha[t] / beta[t], with +inf for pure blur and 0 when both vanish.
inline double bnr_of(const DiffusionSchedule& s, std::size_t t) {
    if (t < 1 || t > s.T) throw DomainError("bnr_of: t out of range 1..T");
    const double a = s.alpha[t], b = s.beta[t];
    // alpha was built as bnr * beta; return the constructing ratio rather than re-dividing.
    if (s.bnr && a == *s.bnr * b) return *s.bnr;
    if (b == 0.0) return a > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return a / b;
}

}  // namespace warm
