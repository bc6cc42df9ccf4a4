#pragma once

#include <map>
#include <string>
#include <vector>

namespace slowfast {

// Sectioned key-value configuration:
//
//   # comment (also ;)
//   [section]
//   key = value
//
// Keys are addressed as "section.key". Values keep their raw text; typed
// getters parse on demand and raise ConfigError naming the full key path.
// List values are comma separated.
class Config {
public:
    Config() = default;

    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text,
                               const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key) const;
    long get_long(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<double> get_double_list(
        const std::string& key, const std::vector<double>& fallback) const;

    // Raw text of the parsed source, the input to the config hash.
    const std::string& source_text() const { return source_; }

    const std::map<std::string, std::string>& entries() const {
        return values_;
    }

    // Rejects any present key whose section appears in `sections` but which
    // is not listed in `known`. Catches typos early with the key named.
    void require_known(const std::vector<std::string>& sections,
                       const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::string> values_;
    std::string source_;
};

} // namespace slowfast
