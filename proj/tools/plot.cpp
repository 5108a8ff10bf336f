#include "plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "image_io.hpp"

namespace warm::plot {
namespace {

constexpr std::array<io::Rgb, 6> kPalette{{
    {31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}, {255, 127, 14}, {23, 190, 207}}};

struct Canvas {
    int w, h;
    std::vector<io::Rgb> px;
    Canvas(int w_, int h_) : w(w_), h(h_), px(static_cast<std::size_t>(w_ * h_), {255, 255, 255}) {}
    void set(int x, int y, io::Rgb c) {
        if (x >= 0 && y >= 0 && x < w && y < h) px[static_cast<std::size_t>(y * w + x)] = c;
    }
    void line(double x0, double y0, double x1, double y1, io::Rgb c, int thick = 1) {
        const int n = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
        for (int i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
            const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
            for (int dx = -(thick / 2); dx <= thick / 2; ++dx)
                for (int dy = -(thick / 2); dy <= thick / 2; ++dy) set(x + dx, y + dy, c);
        }
    }
};

struct Axis {
    bool log;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    double map(double v) const { return log ? std::log10(v) : v; }
    void add(double v) {
        if (log && !(v > 0.0)) return;
        if (!std::isfinite(v)) return;
        lo = std::min(lo, map(v));
        hi = std::max(hi, map(v));
    }
    void finish() {
        if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    std::vector<double> ticks() const {
        std::vector<double> t;
        if (log) {
            for (double d = std::ceil(lo); d <= hi; d += 1.0) t.push_back(d);
        } else {
            for (int i = 0; i <= 10; ++i) t.push_back(lo + (hi - lo) * i / 10.0);
        }
        return t;
    }
};

}  // namespace

void write_line_chart(const std::filesystem::path& path, const Chart& chart, int width, int height) {
    Axis ax{chart.log_x}, ay{chart.log_y};
    for (const auto& s : chart.series) {
        for (double v : s.x) ax.add(v);
        for (double v : s.y) ay.add(v);
    }
    ax.finish();
    ay.finish();
    const int left = 40, right = width - 20, top = 20, bottom = height - 40;
    auto px = [&](double v) { return left + (ax.map(v) - ax.lo) / (ax.hi - ax.lo) * (right - left); };
    auto py = [&](double v) { return bottom - (ay.map(v) - ay.lo) / (ay.hi - ay.lo) * (bottom - top); };
    auto tx = [&](double m) { return left + (m - ax.lo) / (ax.hi - ax.lo) * (right - left); };
    auto ty = [&](double m) { return bottom - (m - ay.lo) / (ay.hi - ay.lo) * (bottom - top); };

    Canvas c(width, height);
    const io::Rgb grid{225, 225, 225}, ink{0, 0, 0};
    for (double t : ax.ticks()) {
        c.line(tx(t), top, tx(t), bottom, grid);
        c.line(tx(t), bottom, tx(t), bottom + 6, ink);
    }
    for (double t : ay.ticks()) {
        c.line(left, ty(t), right, ty(t), grid);
        c.line(left - 6, ty(t), left, ty(t), ink);
    }
    c.line(left, bottom, right, bottom, ink);
    c.line(left, top, left, bottom, ink);

    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const io::Rgb col = kPalette[k % kPalette.size()];
        bool have = false;
        double lx = 0, ly = 0;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            const bool ok = std::isfinite(s.x[i]) && std::isfinite(s.y[i]) &&
                            (!chart.log_x || s.x[i] > 0) && (!chart.log_y || s.y[i] > 0);
            if (!ok) {
                have = false;
                continue;
            }
            const double x = px(s.x[i]), y = py(s.y[i]);
            if (have) c.line(lx, ly, x, y, col, 2);
            for (int d = -3; d <= 3; ++d) {
                c.set(static_cast<int>(x) + d, static_cast<int>(y), col);
                c.set(static_cast<int>(x), static_cast<int>(y) + d, col);
            }
            lx = x, ly = y, have = true;
        }
    }
    io::write_png(path, static_cast<std::size_t>(width), static_cast<std::size_t>(height), c.px);
}

}  // namespace warm::plot
