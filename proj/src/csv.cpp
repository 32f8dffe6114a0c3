#include "hbes/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hbes::csv {

std::string fmt(double v) {
    if (v == 0.0) v = 0.0;  // no negative zero in output
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
    return s;
}

namespace {

std::pair<const char*, const char*> trimmed(const std::string& s) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\r')) --e;
    return {b, e};
}

}  // namespace

double parse_double(const std::string& s, std::size_t row) {
    auto [b, e] = trimmed(s);
    double v = 0.0;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e || !std::isfinite(v))
        throw DataError("row " + std::to_string(row) + ": bad number '" + s + "'");
    return v;
}

std::int64_t parse_int(const std::string& s, std::size_t row) {
    auto [b, e] = trimmed(s);
    std::int64_t v = 0;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) throw DataError("row " + std::to_string(row) + ": bad integer '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, sep);) out.push_back(f);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string chomp(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
}

}  // namespace hbes::csv
