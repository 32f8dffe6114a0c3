#pragma once

// Small helpers shared by the CSV readers and writers.

#include "hbes/errors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hbes::csv {

/// Shortest round-trip decimal form.
std::string fmt(double v);

/// Fixed-point form with `digits` decimals, for human-facing tables.
std::string fixed(double v, int digits);

/// Parses a finite double; throws DataError naming the row otherwise.
double parse_double(const std::string& s, std::size_t row);
std::int64_t parse_int(const std::string& s, std::size_t row);

std::vector<std::string> split(const std::string& line, char sep = ',');

/// Strips trailing CR and spaces.
std::string chomp(std::string s);

}  // namespace hbes::csv
