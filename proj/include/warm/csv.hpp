#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "warm/error.hpp"
#include "warm/schedule.hpp"

namespace warm {

/// Shortest round-trip decimal form; identical bits always print identically.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// 64-bit FNV-1a, used to stamp reports with the configuration that produced them.
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return out;
}

/// A CSV report: optional comment lines, a header row and string cells.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_comment(std::string line) { comments_.push_back(std::move(line)); }

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != columns_.size())
            throw ShapeError("csv: row has " + std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(columns_.size()));
        rows_.push_back(std::move(cells));
    }

    const std::vector<std::string>& columns() const noexcept { return columns_; }
    const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

    std::string str() const {
        std::ostringstream os;
        for (const auto& c : comments_) os << "# " << c << '\n';
        write_line(os, columns_);
        for (const auto& r : rows_) write_line(os, r);
        return os.str();
    }

private:
    static void write_line(std::ostringstream& os, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os << ',';
            os << cells[i];
        }
        os << '\n';
    }

    std::vector<std::string> columns_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

/// Columns t, alpha, beta, sigma; one row per index 0..T.
inline CsvTable schedule_csv(const DiffusionSchedule& s) {
    CsvTable table({"t", "alpha", "beta", "sigma"});
    for (std::size_t t = 0; t <= s.T; ++t)
        table.add_row({std::to_string(t), format_double(s.alpha[t]), format_double(s.beta[t]),
                       format_double(s.sigma[t])});
    return table;
}

}  // namespace warm
