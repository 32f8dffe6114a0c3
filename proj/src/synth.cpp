#include "hbes/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

namespace hbes {

ScenarioSeries synthetic_year(std::uint64_t seed, const SynthOptions& o) {
    using namespace std::chrono;
    if (o.steps < 1 || o.step_minutes < 1) throw std::invalid_argument("synthetic_year: steps and step must be positive");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const auto origin = sys_seconds{sys_days{year{o.year} / January / 1}}.time_since_epoch().count();
    const double dt_h = o.step_minutes / 60.0;
    const double ar = std::pow(o.wind_memory, dt_h);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    ScenarioSeries s;
    s.label = "synthetic-" + std::to_string(seed);
    s.load.resize(o.steps);
    s.solar.resize(o.steps);
    s.wind.resize(o.steps);
    s.timestamps.reserve(static_cast<std::size_t>(o.steps));

    double wind_dev = 0.0, cloud = 1.0;
    long day_seen = -1;
    for (Index t = 0; t < o.steps; ++t) {
        const double hours = static_cast<double>(t) * dt_h;
        const double doy = hours / 24.0;
        const double hod = std::fmod(hours, 24.0);
        s.timestamps.push_back(origin + static_cast<std::int64_t>(t) * o.step_minutes * 60);

        // +1 in mid January, -1 in mid July.
        const double winter = std::cos(two_pi * (doy - 15.0) / 365.0);

        const double evening = std::exp(-0.5 * std::pow((hod - 19.0) / 2.5, 2));
        const double morning = 0.6 * std::exp(-0.5 * std::pow((hod - 8.0) / 2.0, 2));
        const double night = hod < 5.0 ? -0.6 : 0.0;
        double load = o.load_mean + o.load_season * winter + o.load_daily * (evening + morning + night) +
                      o.load_noise * n01(rng);
        s.load[t] = std::clamp(load, 0.0, o.caps.load);

        if (static_cast<long>(doy) != day_seen) {
            day_seen = static_cast<long>(doy);
            cloud = 0.25 + 0.75 * std::pow(u01(rng), 0.6);
        }
        const double daylen = 12.0 - 4.0 * winter;
        const double x = (hod + 0.5 * dt_h - (12.0 - 0.5 * daylen)) / daylen;
        const double bell = (x > 0.0 && x < 1.0) ? std::sin(std::numbers::pi * x) : 0.0;
        const double peak = 0.5 * (o.solar_summer + o.solar_winter) - 0.5 * (o.solar_summer - o.solar_winter) * winter;
        s.solar[t] = std::clamp(peak * bell * cloud, 0.0, o.caps.solar);

        wind_dev = ar * wind_dev + o.wind_sd * std::sqrt(1.0 - ar * ar) * n01(rng);
        const double wind = o.wind_mean + o.wind_season * winter + wind_dev;
        s.wind[t] = std::clamp(wind, 0.0, o.caps.wind);
    }
    return s;
}

}  // namespace hbes
