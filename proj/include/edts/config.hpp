#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edts {

/// Shortest text that reads back as the same double.
std::string format_double(double v);

/// Comma-separated list of numbers; throws ConfigError naming `key` on bad input.
std::vector<double> parse_number_list(std::string_view key, std::string_view text);

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat `key = value` text format. `#` starts a comment; blank lines are ignored.
// Later assignments override earlier ones.
class Config {
public:
    static Config parse(std::string_view text, std::string_view origin = "<string>");
    static Config load(const std::filesystem::path& path);

    void set(std::string key, std::string value);
    void merge(const Config& other);
    bool has(std::string_view key) const;
    void erase(std::string_view key);

    std::optional<std::string> find(std::string_view key) const;
    std::string get_string(std::string_view key) const;
    std::string get_string(std::string_view key, std::string fallback) const;
    double get_double(std::string_view key) const;
    double get_double(std::string_view key, double fallback) const;
    std::int64_t get_int(std::string_view key) const;
    std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
    bool get_bool(std::string_view key) const;
    bool get_bool(std::string_view key, bool fallback) const;

    const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

    /// Sorted `key = value` lines; parse(dump()) reproduces the same entries.
    std::string dump() const;

private:
    std::map<std::string, std::string, std::less<>> entries_;
};

} // namespace edts
