#pragma once

#include <concepts>

#include "warm/grid.hpp"

namespace warm {

/// Output of a two-headed predictor at one corruption level.
struct PredictionPair {
    Grid denoised;  // estimate of the noise-free blurry signal V M_alpha V^T x0
    Grid residual;  // estimate of the missing detail x0 - V M_alpha V^T x0
};

/// Anything that maps (x_t, alpha_t, beta_t) to a PredictionPair: trained networks and
/// closed-form oracles alike.
template <class P>
concept Predictor = requires(const P& p, const Grid& x, double alpha, double beta) {
    { p(x, alpha, beta) } -> std::convertible_to<PredictionPair>;
};

}  // namespace warm
