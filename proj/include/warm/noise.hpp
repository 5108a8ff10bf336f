#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "warm/grid.hpp"

namespace warm {

/// splitmix64 finalizer; derives independent stream seeds from (seed, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed ^ (index + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic standard-normal stream. Copying forks the stream state.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    double normal() {
        ++counter_;
        return normal_(engine_);
    }

    double uniform() {
        ++counter_;
        return uniform_(engine_);
    }

    std::size_t index(std::size_t n) {
        ++counter_;
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    std::uint64_t next_u64() {
        ++counter_;
        return engine_();
    }

    Grid normal_grid(std::size_t height, std::size_t width) {
        Grid g(height, width);
        for (auto& v : g.values()) v = normal();
        return g;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace warm
