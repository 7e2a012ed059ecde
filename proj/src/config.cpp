#include "edts/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace edts {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected)
{
    throw ConfigError("config key '" + std::string(key) + "': expected " + std::string(expected) +
                      ", got '" + std::string(value) + "'");
}

} // namespace

std::string format_double(double v)
{
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::vector<double> parse_number_list(std::string_view key, std::string_view text)
{
    std::vector<double> out;
    if (trim(text).empty()) return out;
    while (true) {
        auto comma = text.find(',');
        auto item = std::string(trim(text.substr(0, comma)));
        try {
            std::size_t used = 0;
            double v = std::stod(item, &used);
            if (used != item.size()) bad_value(key, item, "a number");
            out.push_back(v);
        } catch (const std::logic_error&) {
            bad_value(key, item, "a number");
        }
        if (comma == std::string_view::npos) break;
        text = text.substr(comma + 1);
    }
    return out;
}

Config Config::parse(std::string_view text, std::string_view origin)
{
    Config cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
        cfg.set(std::string(key), std::string(value));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void Config::set(std::string key, std::string value)
{
    entries_.insert_or_assign(std::move(key), std::move(value));
}

void Config::merge(const Config& other)
{
    for (const auto& [k, v] : other.entries_) set(k, v);
}

bool Config::has(std::string_view key) const
{
    return entries_.find(key) != entries_.end();
}

void Config::erase(std::string_view key)
{
    if (auto it = entries_.find(key); it != entries_.end()) entries_.erase(it);
}

std::optional<std::string> Config::find(std::string_view key) const
{
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(std::string_view key) const
{
    auto v = find(key);
    if (!v) throw ConfigError("missing config key '" + std::string(key) + "'");
    return *v;
}

std::string Config::get_string(std::string_view key, std::string fallback) const
{
    auto v = find(key);
    return v ? *v : fallback;
}

double Config::get_double(std::string_view key) const
{
    auto s = get_string(key);
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) bad_value(key, s, "a number");
        return v;
    } catch (const std::logic_error&) {
        bad_value(key, s, "a number");
    }
}

double Config::get_double(std::string_view key, double fallback) const
{
    return has(key) ? get_double(key) : fallback;
}

std::int64_t Config::get_int(std::string_view key) const
{
    auto s = get_string(key);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc{} && ptr == s.data() + s.size()) return v;
    // accept integral values written in floating notation, e.g. 1e6
    double d = get_double(key);
    if (d != static_cast<double>(static_cast<std::int64_t>(d))) bad_value(key, s, "an integer");
    return static_cast<std::int64_t>(d);
}

std::int64_t Config::get_int(std::string_view key, std::int64_t fallback) const
{
    return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(std::string_view key) const
{
    auto s = get_string(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    bad_value(key, s, "a boolean");
}

bool Config::get_bool(std::string_view key, bool fallback) const
{
    return has(key) ? get_bool(key) : fallback;
}

std::string Config::dump() const
{
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

} // namespace edts
