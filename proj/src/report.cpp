#include "slowfast/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>

#include "slowfast/errors.hpp"

namespace slowfast {

std::string config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
}

nlohmann::json encode_double(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) throw ConfigError("cannot encode NaN in a report");
    return v > 0 ? "Infinite" : "-Infinite";
}

double decode_double(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "Infinite")
            return std::numeric_limits<double>::infinity();
        if (s == "-Infinite")
            return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError("expected a number or Infinite token, got " + j.dump());
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "manifest";
    j["subcommand"] = subcommand;
    j["config_hash"] = config_hash;
    j["toolkit_version"] = toolkit_version;
    j["wall_clock_utc"] = wall_clock_utc;
    j["elapsed_seconds"] = elapsed_seconds;
    j["seeds"] = seeds;
    j["parameters"] = parameters;
    j["outputs"] = outputs;
    return j;
}

RunManifest make_manifest(const std::string& subcommand, const Config& cfg) {
    RunManifest m;
    m.subcommand = subcommand;
    m.config_hash = slowfast::config_hash(cfg.source_text());
    m.wall_clock_utc = utc_timestamp();
    m.parameters = nlohmann::json::object();
    for (const auto& [key, value] : cfg.entries()) m.parameters[key] = value;
    return m;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

nlohmann::json report_envelope(const std::string& kind,
                               const RunManifest& manifest) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = kind;
    j["manifest_hash"] = manifest.config_hash;
    return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

void write_csv(const std::string& path, const RunManifest& manifest,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << "# manifest " << manifest.config_hash << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ",";
        out << header[i];
    }
    out << "\n";
    char cell[32];
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw ConfigError("csv row width does not match header in " +
                              path);
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ",";
            if (std::isfinite(row[i])) {
                // Shortest digit string that parses back to the same double.
                auto res = std::to_chars(cell, cell + sizeof(cell), row[i]);
                out.write(cell, res.ptr - cell);
            } else {
                out << (row[i] > 0 ? "Infinite" : "-Infinite");
            }
        }
        out << "\n";
    }
}

} // namespace slowfast
