#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <vector>

#include "warm/grid.hpp"

namespace warm {

namespace detail {

// Orthonormal DCT-II matrix of order n, row-major: basis[k * n + x].
inline const std::vector<double>& dct_basis(std::size_t n) {
    thread_local std::map<std::size_t, std::vector<double>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    std::vector<double> basis(n * n);
    const double dn = static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / dn) : std::sqrt(2.0 / dn);
        for (std::size_t x = 0; x < n; ++x)
            basis[k * n + x] =
                scale * std::cos(std::numbers::pi * (2.0 * static_cast<double>(x) + 1.0) *
                                 static_cast<double>(k) / (2.0 * dn));
    }
    return cache.emplace(n, std::move(basis)).first->second;
}

// out = A * in along columns (transform every column), A is n x n with n = rows.
// `transpose` selects A^T.
inline void transform_columns(const std::vector<double>& a, bool transpose, std::size_t rows,
                              std::size_t cols, const double* in, double* out) {
    for (std::size_t k = 0; k < rows; ++k) {
        double* dst = out + k * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] = 0.0;
        for (std::size_t x = 0; x < rows; ++x) {
            const double w = transpose ? a[x * rows + k] : a[k * rows + x];
            const double* src = in + x * cols;
            for (std::size_t c = 0; c < cols; ++c) dst[c] += w * src[c];
        }
    }
}

// out = in * A^T along rows (transform every row), A is n x n with n = cols.
inline void transform_rows(const std::vector<double>& a, bool transpose, std::size_t rows,
                           std::size_t cols, const double* in, double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = in + r * cols;
        double* dst = out + r * cols;
        for (std::size_t k = 0; k < cols; ++k) {
            double acc = 0.0;
            for (std::size_t x = 0; x < cols; ++x)
                acc += (transpose ? a[x * cols + k] : a[k * cols + x]) * src[x];
            dst[k] = acc;
        }
    }
}

}  // namespace detail

/// Orthonormal 2D DCT-II, computed separably (columns, then rows).
inline SpectralGrid dct_forward(const Grid& g) {
    const std::size_t h = g.height(), w = g.width();
    std::vector<double> tmp(h * w);
    SpectralGrid out(h, w);
    detail::transform_columns(detail::dct_basis(h), false, h, w, g.values().data(), tmp.data());
    detail::transform_rows(detail::dct_basis(w), false, h, w, tmp.data(), out.values().data());
    return out;
}

/// Orthonormal 2D DCT-III, the exact inverse of dct_forward.
inline Grid dct_inverse(const SpectralGrid& s) {
    const std::size_t h = s.height(), w = s.width();
    std::vector<double> tmp(h * w);
    Grid out(h, w);
    detail::transform_rows(detail::dct_basis(w), true, h, w, s.values().data(), tmp.data());
    detail::transform_columns(detail::dct_basis(h), true, h, w, tmp.data(), out.values().data());
    return out;
}

}  // namespace warm
