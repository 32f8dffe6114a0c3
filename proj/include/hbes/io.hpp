#pragma once

// Scenario CSV ingestion and emission, INI configuration, atomic file writes
// and the content hashes recorded in run manifests.

#include "hbes/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace hbes {

/// `2023-01-01T00:00:00Z`, `2023-01-01T00:00:00+01:00` or `2023-01-01 00:00`
/// (UTC assumed), to seconds since the Unix epoch.
std::int64_t parse_iso8601(const std::string& s);
/// `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_iso8601(std::int64_t seconds);

/// `timestamp,load_kw,solar_kw,wind_kw`, columns in any order, extra
/// columns ignored. Throws DataError naming the missing column or the first
/// offending row (NaN, negative, non-monotone or non-uniform timestamps).
ScenarioSeries read_scenario_csv(std::istream& is, const std::string& label);
ScenarioSeries read_scenario_csv(const std::filesystem::path& path);

/// Mean aggregation when coarsening (the step must divide the target),
/// constant interpolation when refining. `minutes` of 0 keeps the series.
ScenarioSeries resample(const ScenarioSeries& s, int minutes);

/// Scales each channel so that its peak equals the matching capacity.
ScenarioSeries normalize_to_capacities(const ScenarioSeries& s, const Capacities& caps);

void write_scenario_csv(std::ostream& os, const ScenarioSeries& s);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string content_hash(const std::string& bytes);

/// Flat `section.key -> value` view of an INI file.
using ConfigMap = std::map<std::string, std::string>;
ConfigMap read_config(const std::filesystem::path& path);
ConfigMap parse_config(std::istream& is);

/// Applies `battery.*`, `hydrogen.*`, `diesel.*`, `prices.*`, `capacities.*`
/// and `grid.dt` keys. Unknown keys in those sections throw DataError.
void apply_spec_overrides(const ConfigMap& config, MicrogridSpec& spec);

}  // namespace hbes
