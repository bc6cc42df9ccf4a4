#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "slowfast/config.hpp"

namespace slowfast {

inline constexpr const char* kToolkitVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

// FNV-1a over the raw config text, printed as 16 hex digits. Stable across
// platforms, good enough to tie outputs to the exact configuration.
std::string config_hash(const std::string& text);

// Doubles in reports: finite values stay numbers, infinities become the
// tagged tokens "Infinite" / "-Infinite" so they survive JSON round-trips.
nlohmann::json encode_double(double v);
double decode_double(const nlohmann::json& j);

// Reproducibility metadata written once per CLI invocation. Every output
// file of the run carries this manifest's config hash.
struct RunManifest {
    std::string subcommand;
    std::string config_hash;
    std::string toolkit_version = kToolkitVersion;
    std::string wall_clock_utc;
    double elapsed_seconds = 0.0;
    std::vector<std::uint64_t> seeds;
    nlohmann::json parameters; // resolved config entries
    std::vector<std::string> outputs;

    nlohmann::json to_json() const;
};

RunManifest make_manifest(const std::string& subcommand, const Config& cfg);

std::string utc_timestamp();

// Report envelope: {schema_version, kind, manifest_hash, ...payload}.
nlohmann::json report_envelope(const std::string& kind,
                               const RunManifest& manifest);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

// CSV with a leading "# manifest <hash>" comment line, then a header row
// and numeric rows.
void write_csv(const std::string& path, const RunManifest& manifest,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

} // namespace slowfast
