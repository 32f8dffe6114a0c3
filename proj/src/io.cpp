#include "hbes/io.hpp"

#include "hbes/csv.hpp"
#include "hbes/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace hbes {

std::int64_t parse_iso8601(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, n = 0;
    double sec = 0.0;
    const std::string s = csv::chomp(text);
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &n) != 3 || n != 10)
        throw DataError("bad timestamp '" + text + "'");
    std::size_t pos = 10;
    if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
        int m = 0;
        if (std::sscanf(s.c_str() + pos + 1, "%2d:%2d%n", &h, &mi, &m) != 2 || m != 5)
            throw DataError("bad timestamp '" + text + "'");
        pos += 1 + 5;
        if (pos < s.size() && s[pos] == ':') {
            int k = 0;
            if (std::sscanf(s.c_str() + pos + 1, "%lf%n", &sec, &k) != 1) throw DataError("bad timestamp '" + text + "'");
            pos += 1 + static_cast<std::size_t>(k);
        }
    }
    std::int64_t offset = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' && pos + 1 == s.size()) {
        } else if ((s[pos] == '+' || s[pos] == '-') && s.size() - pos == 6 && s[pos + 3] == ':') {
            int oh = 0, om = 0;
            if (std::sscanf(s.c_str() + pos + 1, "%2d:%2d", &oh, &om) != 2) throw DataError("bad timestamp '" + text + "'");
            offset = (s[pos] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
        } else {
            throw DataError("bad timestamp '" + text + "'");
        }
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec < 0 || sec >= 61) throw DataError("bad timestamp '" + text + "'");
    const auto days_since = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days_since) * 86400 + h * 3600 + mi * 60 + static_cast<std::int64_t>(sec) - offset;
}

std::string format_iso8601(std::int64_t seconds) {
    using namespace std::chrono;
    const sys_seconds tp{std::chrono::seconds{seconds}};
    const auto dp = floor<days>(tp);
    const year_month_day ymd{dp};
    const hh_mm_ss hms{tp - dp};
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

ScenarioSeries read_scenario_csv(std::istream& is, const std::string& label) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("scenario CSV is empty");
    const auto header = csv::split(csv::chomp(line));
    auto column = [&](const char* name) {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (csv::chomp(header[k]) == name) return k;
        throw DataError(std::string("scenario CSV: missing column '") + name + "'");
    };
    const std::size_t c_ts = column("timestamp"), c_l = column("load_kw"), c_s = column("solar_kw"),
                      c_w = column("wind_kw");
    const std::size_t need = std::max({c_ts, c_l, c_s, c_w}) + 1;

    std::vector<std::int64_t> ts;
    std::vector<double> L, S, W;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        line = csv::chomp(line);
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() < need) throw DataError("row " + std::to_string(row) + ": expected at least " + std::to_string(need) + " fields");
        std::int64_t t = 0;
        try {
            t = parse_iso8601(f[c_ts]);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(row) + ": " + e.what());
        }
        if (!ts.empty()) {
            if (t <= ts.back()) throw DataError("row " + std::to_string(row) + ": timestamps are not strictly increasing");
            if (ts.size() >= 2 && t - ts.back() != ts[1] - ts[0])
                throw DataError("row " + std::to_string(row) + ": timestamps are not uniformly spaced");
        }
        const double l = csv::parse_double(f[c_l], row), s = csv::parse_double(f[c_s], row),
                     w = csv::parse_double(f[c_w], row);
        if (l < 0 || s < 0 || w < 0) throw DataError("row " + std::to_string(row) + ": negative value");
        ts.push_back(t);
        L.push_back(l);
        S.push_back(s);
        W.push_back(w);
    }
    if (ts.empty()) throw DataError("scenario CSV has no data rows");
    ScenarioSeries out;
    out.label = label;
    out.timestamps = std::move(ts);
    out.load = Eigen::Map<const Vector>(L.data(), static_cast<Index>(L.size()));
    out.solar = Eigen::Map<const Vector>(S.data(), static_cast<Index>(S.size()));
    out.wind = Eigen::Map<const Vector>(W.data(), static_cast<Index>(W.size()));
    return out;
}

ScenarioSeries read_scenario_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path.string());
    return read_scenario_csv(f, path.stem().string());
}

ScenarioSeries resample(const ScenarioSeries& s, int minutes) {
    if (minutes == 0 || s.size() == 0) return s;
    if (minutes < 0) throw std::invalid_argument("resample: negative resolution");
    if (!(60 % minutes == 0 || minutes % 60 == 0))
        throw std::invalid_argument("resample: resolution must divide 60 or be a multiple of 60");
    if (s.timestamps.size() < 2) throw DataError("resample: need at least two rows to infer the step");
    const std::int64_t step = s.timestamps[1] - s.timestamps[0];
    const std::int64_t target = std::int64_t{minutes} * 60;
    if (target == step) return s;

    ScenarioSeries out;
    out.label = s.label;
    const Index n = s.size();
    if (target > step) {
        if (target % step != 0) throw DataError("resample: input step does not divide the target resolution");
        const Index k = static_cast<Index>(target / step);
        const Index m = n / k;
        if (m == 0) throw DataError("resample: series shorter than one target step");
        auto coarse = [&](const Vector& v) {
            Vector c(m);
            for (Index i = 0; i < m; ++i) c[i] = v.segment(i * k, k).mean();
            return c;
        };
        out.load = coarse(s.load);
        out.solar = coarse(s.solar);
        out.wind = coarse(s.wind);
        if (s.grid.size()) out.grid = coarse(s.grid);
        for (Index i = 0; i < m; ++i) out.timestamps.push_back(s.timestamps[static_cast<std::size_t>(i * k)]);
    } else {
        if (step % target != 0) throw DataError("resample: target resolution does not divide the input step");
        const Index k = static_cast<Index>(step / target);
        auto fine = [&](const Vector& v) {
            Vector f(n * k);
            for (Index i = 0; i < n; ++i) f.segment(i * k, k).setConstant(v[i]);
            return f;
        };
        out.load = fine(s.load);
        out.solar = fine(s.solar);
        out.wind = fine(s.wind);
        if (s.grid.size()) out.grid = fine(s.grid);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < k; ++j) out.timestamps.push_back(s.timestamps[static_cast<std::size_t>(i)] + j * target);
    }
    return out;
}

ScenarioSeries normalize_to_capacities(const ScenarioSeries& s, const Capacities& caps) {
    ScenarioSeries out = s;
    auto scale = [](Vector& v, double cap) {
        const double peak = v.size() ? v.maxCoeff() : 0.0;
        if (peak > 0) v *= cap / peak;
    };
    scale(out.load, caps.load);
    scale(out.solar, caps.solar);
    scale(out.wind, caps.wind);
    return out;
}

void write_scenario_csv(std::ostream& os, const ScenarioSeries& s) {
    s.validate();
    os << "timestamp,load_kw,solar_kw,wind_kw\n";
    for (Index t = 0; t < s.size(); ++t)
        os << format_iso8601(s.timestamps[static_cast<std::size_t>(t)]) << ',' << csv::fmt(s.load[t]) << ','
           << csv::fmt(s.solar[t]) << ',' << csv::fmt(s.wind[t]) << '\n';
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path tmp = dir / ("." + path.filename().string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write " + path.string());
        f << content;
        f.flush();
        if (!f) throw DataError("write failed for " + path.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw DataError("cannot rename onto " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ConfigMap parse_config(std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    ConfigMap out;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            out[section] = body.data();
            continue;
        }
        for (const auto& [key, value] : body) out[section + "." + key] = value.data();
    }
    return out;
}

ConfigMap read_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config " + path.string());
    return parse_config(f);
}

void apply_spec_overrides(const ConfigMap& config, MicrogridSpec& spec) {
    std::map<std::string, std::function<void(double)>> set{
        {"battery.eta_c", [&](double v) { spec.battery.eta_c = v; }},
        {"battery.eta_d", [&](double v) { spec.battery.eta_d = v; }},
        {"battery.eps", [&](double v) { spec.battery.eps = v; }},
        {"battery.p_max", [&](double v) { spec.battery.p_max = v; }},
        {"battery.e_min", [&](double v) { spec.battery.e_min = v; }},
        {"battery.e_max", [&](double v) { spec.battery.e_max = v; }},
        {"battery.e0", [&](double v) { spec.battery.e0 = v; }},
        {"hydrogen.e_min", [&](double v) { spec.hydrogen.e_min = v; }},
        {"hydrogen.e_max", [&](double v) { spec.hydrogen.e_max = v; }},
        {"hydrogen.e0", [&](double v) { spec.hydrogen.e0 = v; }},
        {"hydrogen.p_max", [&](double v) { spec.hydrogen.p_max = v; }},
        {"diesel.p_min", [&](double v) { spec.diesel.p_min = v; }},
        {"diesel.p_max", [&](double v) { spec.diesel.p_max = v; }},
        {"diesel.rd", [&](double v) { spec.diesel.rd = v; }},
        {"diesel.ru", [&](double v) { spec.diesel.ru = v; }},
        {"prices.c_L", [&](double v) { spec.prices.c_L = v; }},
        {"prices.c_D", [&](double v) { spec.prices.c_D = v; }},
        {"prices.c_B", [&](double v) { spec.prices.c_B = v; }},
        {"prices.c_H", [&](double v) { spec.prices.c_H = v; }},
        {"capacities.load", [&](double v) { spec.capacities.load = v; }},
        {"capacities.solar", [&](double v) { spec.capacities.solar = v; }},
        {"capacities.wind", [&](double v) { spec.capacities.wind = v; }},
        {"grid.dt", [&](double v) { spec.dt = v; }},
    };
    static const char* sections[] = {"battery.", "hydrogen.", "diesel.", "prices.", "capacities.", "grid."};
    for (const auto& [key, value] : config) {
        const bool ours = std::any_of(std::begin(sections), std::end(sections),
                                      [&](const char* s) { return key.rfind(s, 0) == 0; });
        if (!ours) continue;
        if (key == "hydrogen.charge_curve" || key == "hydrogen.discharge_curve") continue;  // paths, handled by the CLI
        auto it = set.find(key);
        if (it == set.end()) throw DataError("config: unknown key '" + key + "'");
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || csv::chomp(value).size() != used) throw DataError("config: '" + key + "' is not a number");
        it->second(v);
    }
}

}  // namespace hbes
