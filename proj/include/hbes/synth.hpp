#pragma once

// Seeded seasonal year: winter load peak, summer solar, windy winters with
// multi-day lulls. Stands in for the measured datasets in tests and demos.

#include "hbes/grid.hpp"

#include <cstdint>

namespace hbes {

struct SynthOptions {
    int year = 2023;
    Index steps = 8760;
    int step_minutes = 60;
    Capacities caps;
    double load_mean = 50.0;      // kW
    double load_season = 20.0;    // winter excess over the annual mean, kW
    double load_daily = 9.0;      // evening peak amplitude, kW
    double load_noise = 3.0;      // kW
    double solar_summer = 130.0;  // clear-sky noon output in June, kW
    double solar_winter = 20.0;   // in December, kW
    double wind_mean = 30.0;      // kW
    double wind_season = 15.0;    // winter excess, kW
    double wind_sd = 14.0;        // stationary deviation of the AR(1) component, kW
    double wind_memory = 0.985;   // AR(1) coefficient per hour
};

ScenarioSeries synthetic_year(std::uint64_t seed, const SynthOptions& options = {});

}  // namespace hbes
