#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "warm/dct.hpp"
#include "warm/error.hpp"
#include "warm/grid.hpp"
#include "warm/noise.hpp"

namespace warm {

/// Mean squared DCT coefficient per radial-frequency bin, DC excluded.
struct RadialPSD {
    std::vector<double> frequency;  // mean radial frequency of the bin's coefficients
    std::vector<double> power;
    std::vector<std::size_t> count;  // coefficients per image in the bin
};

/// Radial frequency sqrt((k1/H)^2 + (k2/W)^2) of coefficient (k1, k2).
inline double radial_frequency(std::size_t k1, std::size_t k2, std::size_t h, std::size_t w) {
    const double a = static_cast<double>(k1) / static_cast<double>(h);
    const double b = static_cast<double>(k2) / static_cast<double>(w);
    return std::sqrt(a * a + b * b);
}

/// Bins are uniform over (0, f_max] where f_max is the largest radial frequency on the grid;
/// `bins` = 0 picks max(H, W). Empty bins are dropped.
inline RadialPSD radial_psd(std::span<const Grid> images, std::size_t bins = 0) {
    if (images.empty()) throw DomainError("radial_psd: no images");
    const std::size_t h = images[0].height(), w = images[0].width();
    if (h * w < 2) throw ShapeError("radial_psd: grid has no AC coefficients");
    if (bins == 0) bins = std::max(h, w);
    const double f_max = radial_frequency(h - 1, w - 1, h, w);

    std::vector<std::size_t> bin_of(h * w, bins);
    std::vector<double> f_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t k1 = 0; k1 < h; ++k1)
        for (std::size_t k2 = 0; k2 < w; ++k2) {
            if (k1 == 0 && k2 == 0) continue;
            const double f = radial_frequency(k1, k2, h, w);
            auto b = static_cast<std::size_t>(std::ceil(f / f_max * static_cast<double>(bins)));
            b = std::clamp<std::size_t>(b, 1, bins) - 1;
            bin_of[k1 * w + k2] = b;
            f_sum[b] += f;
            ++count[b];
        }

    std::vector<double> p_sum(bins, 0.0);
    for (const Grid& g : images) {
        if (g.height() != h || g.width() != w) throw ShapeError("radial_psd: mixed grid shapes");
        const SpectralGrid s = dct_forward(g);
        for (std::size_t i = 1; i < s.size(); ++i) p_sum[bin_of[i]] += s[i] * s[i];
    }

    RadialPSD psd;
    const double n = static_cast<double>(images.size());
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        const double c = static_cast<double>(count[b]);
        psd.frequency.push_back(f_sum[b] / c);
        psd.power.push_back(p_sum[b] / (c * n));
        psd.count.push_back(count[b]);
    }
    return psd;
}

struct PowerLawFit {
    double exponent;   // power ~ frequency^(-exponent)
    double intercept;  // log power at log frequency 0
};

/// Least squares of log power on log frequency over the mid band: the lowest and highest 10% of
/// the usable (nonzero) bins are excluded.
inline PowerLawFit fit_power_law(const RadialPSD& psd) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < psd.power.size(); ++i)
        if (psd.power[i] > 0.0 && psd.frequency[i] > 0.0)
            pts.emplace_back(std::log(psd.frequency[i]), std::log(psd.power[i]));
    if (pts.size() < 5) throw DomainError("fit_power_law: need at least 5 nonzero bins");
    std::sort(pts.begin(), pts.end());
    const std::size_t trim = pts.size() / 10;
    const std::span<const std::pair<double, double>> mid(pts.data() + trim,
                                                         pts.size() - 2 * trim);
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : mid) mx += x, my += y;
    mx /= static_cast<double>(mid.size());
    my /= static_cast<double>(mid.size());
    double sxx = 0.0, sxy = 0.0;
    for (auto [x, y] : mid) sxx += (x - mx) * (x - mx), sxy += (x - mx) * (y - my);
    const double slope = sxy / sxx;
    return {-slope, my - slope * mx};
}

/// A field whose DCT coefficient variance is f^(-exponent) (DC zero), scaled by `amplitude`.
inline Grid power_law_field(std::size_t h, std::size_t w, double exponent, NoiseSource& rng,
                            double amplitude = 1.0) {
    SpectralGrid s(h, w);
    for (std::size_t k1 = 0; k1 < h; ++k1)
        for (std::size_t k2 = 0; k2 < w; ++k2) {
            if (k1 == 0 && k2 == 0) continue;
            const double f = radial_frequency(k1, k2, h, w);
            s(k1, k2) = amplitude * std::pow(f, -0.5 * exponent) * rng.normal();
        }
    return dct_inverse(s);
}

/// Amplitude that gives power_law_field unit mean per-pixel variance.
inline double unit_power_amplitude(std::size_t h, std::size_t w, double exponent) {
    double total = 0.0;
    for (std::size_t k1 = 0; k1 < h; ++k1)
        for (std::size_t k2 = 0; k2 < w; ++k2)
            if (k1 || k2) total += std::pow(radial_frequency(k1, k2, h, w), -exponent);
    if (!(total > 0.0)) throw ShapeError("unit_power_amplitude: grid has no AC coefficients");
    return std::sqrt(static_cast<double>(h * w) / total);
}

struct BnrSelectionParams {
    double beta_min = 0.02;
    double beta_max = 8.0;
    std::size_t noise_levels = 256;  // log-spaced beta values checked
    double delta = 0.1;              // tolerated attenuation in signal-dominated bands
    double grid_step = 0.05;         // candidates are grid_step * k, k = 1..grid_count
    std::size_t grid_count = 200;
};

struct BnrSelection {
    double bnr = 0.0;
    bool feasible = false;
    std::string diagnostic;
};

namespace detail {

// True when no signal-dominated band (psd * m^2 >= beta^2) is attenuated below 1 - delta.
inline bool bnr_admissible(const RadialPSD& psd, double bnr, const std::vector<double>& levels,
                           double delta) {
    const double c = 0.5 * std::numbers::pi * std::numbers::pi;
    for (double beta : levels) {
        const double alpha = bnr * beta;
        for (std::size_t i = 0; i < psd.power.size(); ++i) {
            const double f = psd.frequency[i];
            const double m = std::exp(-c * alpha * alpha * f * f);
            if (psd.power[i] * m * m >= beta * beta && m < 1.0 - delta) return false;
        }
    }
    return true;
}

}  // namespace detail

/// Largest BNR on the candidate grid whose blur only attenuates (by more than delta) bands that
/// noise already dominates, for every noise level in [beta_min, beta_max].
inline BnrSelection select_bnr(const RadialPSD& psd, const BnrSelectionParams& p = {}) {
    if (!(p.delta > 0.0 && p.delta < 1.0)) throw DomainError("select_bnr: delta must lie in (0, 1)");
    if (!(p.beta_min > 0.0 && p.beta_max >= p.beta_min) || p.noise_levels < 1)
        throw DomainError("select_bnr: bad noise range");
    if (psd.power.empty()) throw DomainError("select_bnr: empty PSD");
    std::vector<double> levels(p.noise_levels);
    const double lo = std::log(p.beta_min), hi = std::log(p.beta_max);
    for (std::size_t i = 0; i < p.noise_levels; ++i)
        levels[i] = std::exp(p.noise_levels == 1
                                 ? lo
                                 : lo + (hi - lo) * static_cast<double>(i) /
                                            static_cast<double>(p.noise_levels - 1));
    BnrSelection out;
    for (std::size_t k = 1; k <= p.grid_count; ++k) {
        const double b = p.grid_step * static_cast<double>(k);
        if (!detail::bnr_admissible(psd, b, levels, p.delta)) continue;
        out.bnr = b;
        out.feasible = true;
    }
    if (!out.feasible)
        out.diagnostic = "no candidate BNR keeps signal-dominated bands within delta; using 0";
    return out;
}

namespace detail {

// Flattens samples into a contiguous n x d array.
inline std::vector<double> flatten(std::span<const Grid> xs, std::size_t& dim) {
    if (xs.empty()) throw DomainError("sample set is empty");
    dim = xs[0].size();
    std::vector<double> out;
    out.reserve(xs.size() * dim);
    for (const Grid& g : xs) {
        if (g.size() != dim) throw ShapeError("sample set: mixed dimensions");
        out.insert(out.end(), g.values().begin(), g.values().end());
    }
    return out;
}

// Sum over i in a, j in b of |a_i - b_j|, accumulated in fixed-size row blocks so the result
// does not depend on how work is partitioned. `self` sums only j > i (callers double it).
inline double pair_distance_sum(const std::vector<double>& a, const std::vector<double>& b,
                                std::size_t d, bool self) {
    const std::size_t na = a.size() / d, nb = b.size() / d;
    constexpr std::size_t block = 256;
    double total = 0.0;
    for (std::size_t start = 0; start < na; start += block) {
        double partial = 0.0;
        for (std::size_t i = start; i < std::min(na, start + block); ++i) {
            const double* x = a.data() + i * d;
            for (std::size_t j = self ? i + 1 : 0; j < nb; ++j) {
                const double* y = b.data() + j * d;
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = x[k] - y[k];
                    s += diff * diff;
                }
                partial += std::sqrt(s);
            }
        }
        total += partial;
    }
    return total;
}

}  // namespace detail

/// V-statistic energy distance 2 E|X-Y| - E|X-X'| - E|Y-Y'|; zero for identical sample sets.
inline double energy_distance(std::span<const Grid> xs, std::span<const Grid> ys) {
    std::size_t dx = 0, dy = 0;
    const auto a = detail::flatten(xs, dx);
    const auto b = detail::flatten(ys, dy);
    if (dx != dy) throw ShapeError("energy_distance: dimension mismatch");
    const double n = static_cast<double>(xs.size()), m = static_cast<double>(ys.size());
    const double cross = detail::pair_distance_sum(a, b, dx, false) / (n * m);
    const double self_x = 2.0 * detail::pair_distance_sum(a, a, dx, true) / (n * n);
    const double self_y = 2.0 * detail::pair_distance_sum(b, b, dx, true) / (m * m);
    return std::max(0.0, 2.0 * cross - self_x - self_y);
}

/// W1 between two empirical 1D distributions: the integral of |F - G|.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DomainError("wasserstein1: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double prev = std::min(a[0], b[0]), total = 0.0;
    while (i < a.size() || j < b.size()) {
        const double next = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
        total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
        prev = next;
        while (i < a.size() && a[i] == next) ++i;
        while (j < b.size() && b[j] == next) ++j;
    }
    return total;
}

struct QualityReport {
    double energy_distance = 0.0;
    double noise_floor = 0.0;  // energy distance between the two halves of the reference
    std::vector<double> wasserstein;  // per coordinate
    std::size_t sample_count = 0;
};

inline QualityReport quality_report(std::span<const Grid> samples, std::span<const Grid> reference) {
    if (samples.empty() || reference.empty()) throw DomainError("quality_report: empty input");
    QualityReport r;
    r.sample_count = samples.size();
    r.energy_distance = energy_distance(samples, reference);
    const std::size_t half = reference.size() / 2;
    if (half >= 1)
        r.noise_floor = energy_distance(reference.subspan(0, half), reference.subspan(half));
    const std::size_t d = samples[0].size();
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> a, b;
        for (const Grid& g : samples) a.push_back(g[k]);
        for (const Grid& g : reference) b.push_back(g[k]);
        r.wasserstein.push_back(wasserstein1(std::move(a), std::move(b)));
    }
    return r;
}

}  // namespace warm
