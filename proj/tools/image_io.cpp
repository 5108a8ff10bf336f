#include "image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "warm/error.hpp"

namespace warm::io {
namespace {

std::string lower_ext(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

Grid from_bytes(std::size_t h, std::size_t w, const std::vector<std::uint8_t>& px, int maxval) {
    std::vector<double> v(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) v[i] = 2.0 * px[i] / maxval - 1.0;
    return Grid(h, w, std::move(v));
}

// PGM header tokens may be separated by comments starting with '#'.
long next_token(std::istream& in) {
    std::string tok;
    while (in >> tok) {
        if (tok[0] == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        return std::stol(tok);
    }
    throw ConfigError("truncated PGM header");
}

Grid read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") throw ConfigError(path.string() + ": not a PGM file");
    const long w = next_token(in), h = next_token(in), maxval = next_token(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw ConfigError(path.string() + ": only 8-bit PGM is supported");
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w * h));
    if (magic == "P5") {
        in.get();
        in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
        if (in.gcount() != static_cast<std::streamsize>(px.size()))
            throw ConfigError(path.string() + ": truncated pixel data");
    } else {
        for (auto& p : px) p = static_cast<std::uint8_t>(next_token(in));
    }
    return from_bytes(static_cast<std::size_t>(h), static_cast<std::size_t>(w), px, static_cast<int>(maxval));
}

Grid read_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str()))
        throw ConfigError(path.string() + ": " + img.message);
    img.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
        png_image_free(&img);
        throw ConfigError(path.string() + ": " + img.message);
    }
    return from_bytes(img.height, img.width, px, 255);
}

}  // namespace

Grid read_gray(const std::filesystem::path& path) {
    const std::string e = lower_ext(path);
    if (e == ".pgm") return read_pgm(path);
    if (e == ".png") return read_png(path);
    throw ConfigError(path.string() + ": unsupported image type");
}

std::vector<Grid> read_gray_folder(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const std::string ext = lower_ext(e.path());
        if (e.is_regular_file() && (ext == ".pgm" || ext == ".png")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no .pgm or .png images in " + dir.string());
    std::vector<Grid> out;
    for (const auto& f : files) {
        out.push_back(read_gray(f));
        if (!out.back().same_shape(out.front()))
            throw ConfigError(f.string() + ": image size differs from " + files.front().string());
    }
    return out;
}

void write_pgm(const std::filesystem::path& path, const Grid& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "P5\n" << g.width() << ' ' << g.height() << "\n255\n";
    for (double v : g.values()) {
        const double b = std::clamp(std::round((v + 1.0) * 127.5), 0.0, 255.0);
        out.put(static_cast<char>(static_cast<std::uint8_t>(b)));
    }
}

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<Rgb>& pixels) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, pixels.data(), 0, nullptr))
        throw ConfigError("cannot write " + path.string() + ": " + img.message);
}

}  // namespace warm::io
