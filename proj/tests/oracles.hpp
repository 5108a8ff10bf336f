#pragma once

// Reference computations that share no code with the library: direct sums, finite differences
// and brute-force quadrature.

#include <array>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

using Image = std::vector<std::vector<double>>;

inline Image zeros(std::size_t h, std::size_t w) { return Image(h, std::vector<double>(w, 0.0)); }

inline double dct_weight(std::size_t k, std::size_t n) {
    return k == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
}

// Orthonormal 2D DCT-II by direct quadruple summation.
inline Image dct2(const Image& x) {
    const std::size_t h = x.size(), w = x[0].size();
    const double pi = std::numbers::pi;
    Image out = zeros(h, w);
    for (std::size_t k1 = 0; k1 < h; ++k1)
        for (std::size_t k2 = 0; k2 < w; ++k2) {
            double acc = 0.0;
            for (std::size_t n1 = 0; n1 < h; ++n1)
                for (std::size_t n2 = 0; n2 < w; ++n2)
                    acc += x[n1][n2] * std::cos(pi * (n1 + 0.5) * k1 / h) *
                           std::cos(pi * (n2 + 0.5) * k2 / w);
            out[k1][k2] = dct_weight(k1, h) * dct_weight(k2, w) * acc;
        }
    return out;
}

// A smooth field given by cosine-series coefficients c[k1][k2] on an h x w pixel domain,
// evaluated at continuous position (y, x) in pixel units (pixel centres at n + 1/2).
inline double cosine_field(const Image& c, double y, double x) {
    const std::size_t h = c.size(), w = c[0].size();
    const double pi = std::numbers::pi;
    double v = 0.0;
    for (std::size_t k1 = 0; k1 < h; ++k1)
        for (std::size_t k2 = 0; k2 < w; ++k2)
            v += c[k1][k2] * dct_weight(k1, h) * dct_weight(k2, w) * std::cos(pi * k1 * y / h) *
                 std::cos(pi * k2 * x / w);
    return v;
}

// Heat equation u_t = u_yy + u_xx with zero-flux boundaries, run to time alpha^2 / 2 by
// explicit finite differences on a grid refined `r` times (r odd, so the refined cell centres
// include the pixel centres). Returns the solution sampled at the pixel centres.
inline Image heat_fd(const Image& coeffs, double alpha, std::size_t r) {
    const std::size_t h = coeffs.size(), w = coeffs[0].size();
    const std::size_t fh = h * r, fw = w * r;
    const double dx = 1.0 / static_cast<double>(r);
    Image u = zeros(fh, fw);
    for (std::size_t i = 0; i < fh; ++i)
        for (std::size_t j = 0; j < fw; ++j)
            u[i][j] = cosine_field(coeffs, (i + 0.5) * dx, (j + 0.5) * dx);

    const double t_end = 0.5 * alpha * alpha;
    const double dt_max = 0.2 * dx * dx;
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt_max));
    const double dt = steps ? t_end / static_cast<double>(steps) : 0.0;
    Image next = u;
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < fh; ++i)
            for (std::size_t j = 0; j < fw; ++j) {
                // Mirror ghost cells give the zero-flux condition at cell-centred boundaries.
                const double up = u[i == 0 ? 0 : i - 1][j], down = u[i + 1 == fh ? i : i + 1][j];
                const double left = u[i][j == 0 ? 0 : j - 1], right = u[i][j + 1 == fw ? j : j + 1];
                next[i][j] = u[i][j] + dt / (dx * dx) * (up + down + left + right - 4.0 * u[i][j]);
            }
        std::swap(u, next);
    }
    Image out = zeros(h, w);
    for (std::size_t n1 = 0; n1 < h; ++n1)
        for (std::size_t n2 = 0; n2 < w; ++n2) out[n1][n2] = u[n1 * r + r / 2][n2 * r + r / 2];
    return out;
}

// The 1x2 blur operator written out by hand: DC passes, the single AC mode is scaled by
// exp(-(pi^2/2) alpha^2 / 4). In pixel space this averages the two pixels partially.
inline void blur_1x2(double alpha, double b[2][2]) {
    const double m = std::exp(-0.5 * std::numbers::pi * std::numbers::pi * alpha * alpha / 4.0);
    b[0][0] = b[1][1] = 0.5 * (1.0 + m);
    b[0][1] = b[1][0] = 0.5 * (1.0 - m);
}

struct Gauss2 {
    double weight;
    double mean[2];
    double cov[2][2];
};

inline double gauss2_pdf(const double mean[2], const double cov[2][2], double x, double y) {
    const double det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    const double dx = x - mean[0], dy = y - mean[1];
    const double q = (cov[1][1] * dx * dx - 2.0 * cov[0][1] * dx * dy + cov[0][0] * dy * dy) / det;
    return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

// E[x0 | x_t] for x0 ~ mixture on a 1x2 grid and x_t = B x0 + beta eps, by midpoint quadrature
// over [lo, hi]^2 with n x n cells.
inline std::array<double, 2> posterior_mean_quadrature(const std::vector<Gauss2>& mix, double alpha,
                                                       double beta, const double xt[2], double lo,
                                                       double hi, std::size_t n) {
    double b[2][2];
    blur_1x2(alpha, b);
    const double step = (hi - lo) / static_cast<double>(n);
    double z = 0.0, m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double u = lo + (i + 0.5) * step, v = lo + (j + 0.5) * step;
            double prior = 0.0;
            for (const auto& g : mix) prior += g.weight * gauss2_pdf(g.mean, g.cov, u, v);
            const double r0 = xt[0] - (b[0][0] * u + b[0][1] * v);
            const double r1 = xt[1] - (b[1][0] * u + b[1][1] * v);
            const double like = std::exp(-0.5 * (r0 * r0 + r1 * r1) / (beta * beta));
            const double p = prior * like;
            z += p;
            m0 += p * u;
            m1 += p * v;
        }
    return {m0 / z, m1 / z};
}

// Smallest Mahalanobis distance to any component of a 1x2 mixture, via the explicit 2x2 inverse.
inline double mahalanobis_min(const std::vector<Gauss2>& mix, double x, double y) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : mix) {
        const double det = g.cov[0][0] * g.cov[1][1] - g.cov[0][1] * g.cov[1][0];
        const double dx = x - g.mean[0], dy = y - g.mean[1];
        const double q =
            (g.cov[1][1] * dx * dx - 2.0 * g.cov[0][1] * dx * dy + g.cov[0][0] * dy * dy) / det;
        best = std::min(best, std::sqrt(q));
    }
    return best;
}

// Energy distance (V-statistic) by the textbook double loops, for small sample sets.
inline double energy_distance(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b) {
    auto dist = [](const std::vector<double>& p, const std::vector<double>& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
        return std::sqrt(s);
    };
    auto mean_dist = [&](const auto& x, const auto& y) {
        double s = 0.0;
        for (const auto& p : x)
            for (const auto& q : y) s += dist(p, q);
        return s / static_cast<double>(x.size() * y.size());
    };
    return 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

}  // namespace oracle
