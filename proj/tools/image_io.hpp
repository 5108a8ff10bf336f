#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "warm/grid.hpp"

namespace warm::io {

/// 8-bit grayscale image as a grid in [-1, 1]. Reads binary/ASCII PGM and PNG (colour PNGs are
/// converted to gray).
Grid read_gray(const std::filesystem::path& path);

/// Every .pgm/.png file directly inside `dir`, sorted by name. Throws ConfigError on mixed shapes.
std::vector<Grid> read_gray_folder(const std::filesystem::path& dir);

void write_pgm(const std::filesystem::path& path, const Grid& g);

struct Rgb {
    std::uint8_t r, g, b;
};

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<Rgb>& pixels);

}  // namespace warm::io
