#include "slowfast/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "slowfast/errors.hpp"

namespace slowfast {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
            return false;
    return true;
}

double parse_double_token(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (v == "inf" || v == "Infinite") return std::numeric_limits<double>::infinity();
    if (v == "-inf" || v == "-Infinite") return -std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": cannot parse '" + v +
                          "' as a number");
    return x;
}

} // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

Config Config::parse_string(const std::string& text,
                            const std::string& origin) {
    Config cfg;
    cfg.source_ = text;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto where = [&] {
            return origin + ":" + std::to_string(lineno);
        };
        std::string s = line;
        const size_t hash = s.find_first_of("#;");
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("config " + where() +
                                  ": unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!valid_name(section))
                throw ConfigError("config " + where() +
                                  ": invalid section name '" + section + "'");
            continue;
        }
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config " + where() +
                              ": expected 'key = value', got '" + s + "'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (!valid_name(key))
            throw ConfigError("config " + where() + ": invalid key name '" +
                              key + "'");
        if (section.empty())
            throw ConfigError("config " + where() + ": key '" + key +
                              "' appears before any [section]");
        const std::string full = section + "." + key;
        if (cfg.values_.count(full))
            throw ConfigError("config " + where() + ": duplicate key " + full);
        cfg.values_[full] = value;
    }
    return cfg;
}

bool Config::has(const std::string& key) const {
    return values_.count(key) > 0;
}

std::string Config::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
        throw ConfigError("missing required config key " + key);
    return it->second;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
    return parse_double_token(key, get_string(key));
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_double_token(key, it->second);
}

long Config::get_long(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": cannot parse '" + v +
                          "' as an integer");
    return x;
}

long Config::get_long(const std::string& key, long fallback) const {
    return has(key) ? get_long(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
    std::string v = get_string(key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError("config key " + key + ": cannot parse '" + v +
                      "' as a boolean");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    const std::string raw = get_string(key);
    std::vector<double> out;
    std::string tok;
    std::istringstream in(raw);
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.push_back(parse_double_token(key, tok));
    }
    return out;
}

std::vector<double> Config::get_double_list(
    const std::string& key, const std::vector<double>& fallback) const {
    return has(key) ? get_double_list(key) : fallback;
}

void Config::require_known(const std::vector<std::string>& sections,
                           const std::vector<std::string>& known) const {
    for (const auto& [key, value] : values_) {
        const std::string section = key.substr(0, key.find('.'));
        if (std::find(sections.begin(), sections.end(), section) ==
            sections.end())
            continue;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown config key " + key);
    }
}

} // namespace slowfast
