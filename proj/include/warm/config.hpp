#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "warm/csv.hpp"
#include "warm/error.hpp"

namespace warm {

/// Flat key-value configuration text.
///
///     # comment
///     key = value            whitespace around key and value is trimmed
///     list.key = 1, 2, 3     lists are comma separated
///
/// Keys are [A-Za-z0-9_.]+ and may appear once. No includes, sections or quoting.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text) {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty() || !std::all_of(key.begin(), key.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
                }))
                throw ConfigError("config line " + std::to_string(lineno) + ": bad key '" + key + "'");
            if (!cfg.values_.emplace(key, value).second)
                throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                                  key + "'");
        }
        return cfg;
    }

    static KeyValueConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return values_.contains(key); }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string text(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
        return it->second;
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }

    double real(const std::string& key) const { return to_real(key, text(key)); }
    double real(const std::string& key, double fallback) const {
        return has(key) ? real(key) : fallback;
    }

    std::uint64_t integer(const std::string& key) const { return to_integer(key, text(key)); }
    std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? integer(key) : fallback;
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = text(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
    }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        std::istringstream in(text(key));
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    std::vector<double> reals(const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : list(key)) out.push_back(to_real(key, s));
        return out;
    }

    std::vector<std::uint64_t> integers(const std::string& key) const {
        std::vector<std::uint64_t> out;
        for (const auto& s : list(key)) out.push_back(to_integer(key, s));
        return out;
    }

    /// Canonical "key=value\n" lines in key order; the basis of the config hash.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
        return out;
    }

    std::string hash() const { return hex64(fnv1a64(canonical())); }

    const std::map<std::string, std::string>& entries() const noexcept { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double to_real(const std::string& key, const std::string& s) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
        return v;
    }

    static std::uint64_t to_integer(const std::string& key, const std::string& s) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                              s + "'");
        return v;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace warm
