#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "warm/dct.hpp"
#include "warm/grid.hpp"

namespace warm {

/// Diagonal DCT-domain attenuation realizing Gaussian blur of standard deviation `alpha` pixels.
///
/// Entry (k1, k2) is the heat-kernel response exp(-(pi^2 / 2) alpha^2 (k1^2/H^2 + k2^2/W^2)),
/// i.e. the heat equation with Neumann boundaries run for time alpha^2 / 2. DC is always 1 and
/// masks compose as mask(a) * mask(b) == mask(hypot(a, b)).
class BlurMask {
public:
    BlurMask(std::size_t height, std::size_t width, double alpha)
        : height_(height), width_(width), alpha_(alpha) {
        if (!(alpha >= 0.0) || !std::isfinite(alpha))
            throw DomainError("blur mask: alpha must be finite and >= 0");
        if (height == 0 || width == 0) throw ShapeError("blur mask: empty shape");
        entries_.resize(height * width);
        const double c = 0.5 * std::numbers::pi * std::numbers::pi * alpha * alpha;
        const double h2 = static_cast<double>(height * height);
        const double w2 = static_cast<double>(width * width);
        for (std::size_t k1 = 0; k1 < height; ++k1)
            for (std::size_t k2 = 0; k2 < width; ++k2) {
                const double f2 = static_cast<double>(k1 * k1) / h2 +
                                  static_cast<double>(k2 * k2) / w2;
                entries_[k1 * width + k2] = std::exp(-c * f2);
            }
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return entries_.size(); }
    double alpha() const noexcept { return alpha_; }

    double operator()(std::size_t k1, std::size_t k2) const noexcept {
        return entries_[k1 * width_ + k2];
    }
    double operator[](std::size_t i) const noexcept { return entries_[i]; }
    const std::vector<double>& entries() const noexcept { return entries_; }

private:
    std::size_t height_;
    std::size_t width_;
    double alpha_;
    std::vector<double> entries_;
};

inline BlurMask make_blur_mask(std::size_t height, std::size_t width, double alpha) {
    return BlurMask(height, width, alpha);
}

/// Multiplies every coefficient by `factor(entry)`; the spectral workhorse behind the blur ops.
template <class F>
SpectralGrid scale_spectrum(SpectralGrid s, const BlurMask& m, F&& factor) {
    require_same_shape(s, m, "scale_spectrum");
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= factor(m[i]);
    return s;
}

inline SpectralGrid apply_mask(SpectralGrid s, const BlurMask& m) {
    return scale_spectrum(std::move(s), m, [](double e) { return e; });
}

/// V M V^T g.
inline Grid apply_blur(const Grid& g, const BlurMask& m) {
    require_same_shape(g, m, "apply_blur");
    if (m.alpha() == 0.0) return g;
    return dct_inverse(apply_mask(dct_forward(g), m));
}

inline Grid blur(const Grid& g, double alpha) {
    return apply_blur(g, make_blur_mask(g.height(), g.width(), alpha));
}

}  // namespace warm
