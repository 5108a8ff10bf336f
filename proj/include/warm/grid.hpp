#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "warm/error.hpp"

namespace warm {

namespace detail {

// Shared storage for spatial and spectral grids. Row-major, height x width.
class GridStorage {
public:
    GridStorage() = default;

    GridStorage(std::size_t height, std::size_t width, double fill = 0.0)
        : height_(height), width_(width), values_(checked_size(height, width), fill) {}

    GridStorage(std::size_t height, std::size_t width, std::vector<double> values)
        : height_(height), width_(width), values_(std::move(values)) {
        if (values_.size() != checked_size(height, width))
            throw ShapeError("grid: value count " + std::to_string(values_.size()) +
                             " does not match " + std::to_string(height) + "x" +
                             std::to_string(width));
        for (double v : values_)
            if (!std::isfinite(v)) throw DomainError("grid: non-finite value");
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t row, std::size_t col) noexcept {
        return values_[row * width_ + col];
    }
    double operator()(std::size_t row, std::size_t col) const noexcept {
        return values_[row * width_ + col];
    }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool same_shape(const GridStorage& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool all_finite() const noexcept {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const GridStorage&, const GridStorage&) = default;

private:
    static std::size_t checked_size(std::size_t height, std::size_t width) {
        if (height == 0 || width == 0) throw ShapeError("grid: height and width must be >= 1");
        return height * width;
    }

    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> values_;
};

}  // namespace detail

/// A real 2D field in pixel space (an image, or a toy sample laid out as a grid).
class Grid : public detail::GridStorage {
public:
    using GridStorage::GridStorage;
    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Orthonormal DCT-II coefficients of a Grid. Index (k1, k2) is (vertical, horizontal) frequency.
class SpectralGrid : public detail::GridStorage {
public:
    using GridStorage::GridStorage;
    friend bool operator==(const SpectralGrid&, const SpectralGrid&) = default;
};

template <class A, class B>
void require_same_shape(const A& a, const B& b, const char* what) {
    if (a.height() != b.height() || a.width() != b.width())
        throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) +
                         "x" + std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                         "x" + std::to_string(b.width()) + ")");
}

template <class G>
concept GridLike = std::is_base_of_v<detail::GridStorage, G>;

// Elementwise helpers. Operands must share a shape.

template <GridLike G>
G operator+(G a, const G& b) {
    require_same_shape(a, b, "grid +");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

template <GridLike G>
G operator-(G a, const G& b) {
    require_same_shape(a, b, "grid -");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

template <GridLike G>
G operator*(double s, G a) {
    for (auto& v : a.values()) v *= s;
    return a;
}

// a += s * b
template <GridLike G>
void axpy(G& a, double s, const G& b) {
    require_same_shape(a, b, "axpy");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

inline double max_abs_diff(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double sum_of_squares(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double mean(const Grid& g) {
    double s = 0.0;
    for (double v : g.values()) s += v;
    return s / static_cast<double>(g.size());
}

}  // namespace warm
