#include "hbes/electrochem.hpp"

#include <cmath>
#include <functional>

namespace hbes {

const char* to_string(Direction d) { return d == Direction::Charging ? "charging" : "discharging"; }

Direction direction_from_string(const std::string& s) {
    if (s == "charging") return Direction::Charging;
    if (s == "discharging") return Direction::Discharging;
    throw std::invalid_argument("unknown curve direction '" + s + "'");
}

void ElectrolyzerParams::validate() const {
    if (!(A > 0)) throw std::invalid_argument("electrolyzer: A must be positive");
    if (N < 1) throw std::invalid_argument("electrolyzer: N must be at least 1");
    if (!(p_min_frac >= 0 && p_min_frac < 1)) throw std::invalid_argument("electrolyzer: p_min_frac must be in [0,1)");
    if (!(P_rated > 0)) throw std::invalid_argument("electrolyzer: P_rated must be positive");
    if (!(theta > 0)) throw std::invalid_argument("electrolyzer: theta must be positive");
}

void FuelCellParams::validate() const {
    if (!(J_max > 0)) throw std::invalid_argument("fuel cell: J_max must be positive");
    if (!(A > 0)) throw std::invalid_argument("fuel cell: A must be positive");
    if (N < 1) throw std::invalid_argument("fuel cell: N must be at least 1");
    if (!(theta > 0)) throw std::invalid_argument("fuel cell: theta must be positive");
    if (!(P_rated > 0)) throw std::invalid_argument("fuel cell: P_rated must be positive");
    if (!(C_O2 > 0)) throw std::invalid_argument("fuel cell: C_O2 must be positive");
}

double electrolyzer_stack_power_kw(double i, const ElectrolyzerParams& p) {
    return p.N * electrolyzer_cell_voltage(i, p) * i / 1000.0;
}

double fuelcell_stack_power_kw(double i, const FuelCellParams& p) {
    return p.N * fuelcell_cell_voltage(i, p) * i / 1000.0;
}

namespace {

// Root of f(i) = target on [lo, hi] for increasing f.
double bisect(const std::function<double(double)>& f, double target, double lo, double hi) {
    for (int k = 0; k < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++k) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Current of maximum fuel-cell power (golden section; the curve is unimodal).
double fuelcell_peak_current(const FuelCellParams& p) {
    double lo = p.i_min(), hi = p.J_max * p.A * (1.0 - 1e-9);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int k = 0; k < 200; ++k) {
        const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
        if (fuelcell_stack_power_kw(a, p) < fuelcell_stack_power_kw(b, p)) lo = a;
        else hi = b;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double electrolyzer_current_for_power(double power_kw, const ElectrolyzerParams& p) {
    if (power_kw < 0) throw std::domain_error("electrolyzer: negative power");
    if (power_kw == 0) return 0.0;
    auto f = [&](double i) { return electrolyzer_stack_power_kw(i, p); };
    double hi = 1.0;
    while (f(hi) < power_kw) {
        hi *= 2.0;
        if (hi > 1e12) throw std::domain_error("electrolyzer: power not reachable");
    }
    return bisect(f, power_kw, 0.0, hi);
}

double fuelcell_current_for_power(double power_kw, const FuelCellParams& p) {
    if (power_kw < 0) throw std::domain_error("fuel cell: negative power");
    const double i_peak = fuelcell_peak_current(p);
    if (power_kw > fuelcell_stack_power_kw(i_peak, p))
        throw std::domain_error("fuel cell: power exceeds the stack maximum");
    if (power_kw <= fuelcell_stack_power_kw(p.i_min(), p)) return p.i_min();
    return bisect([&](double i) { return fuelcell_stack_power_kw(i, p); }, power_kw, p.i_min(), i_peak);
}

double electrolyzer_rate_at_power(double power_kw, const ElectrolyzerParams& p) {
    const double i = electrolyzer_current_for_power(power_kw, p);
    const double eta = faraday_efficiency(i / p.A, p.theta, p);
    return hydrogen_mass_rate(i, p.N, eta, Direction::Charging);
}

double fuelcell_rate_at_power(double power_kw, const FuelCellParams& p) {
    if (power_kw == 0) return 0.0;
    const double i = fuelcell_current_for_power(power_kw, p);
    return hydrogen_mass_rate(i, p.N, 1.0, Direction::Discharging);
}

double electrolyzer_efficiency_at_power(double power_kw, const ElectrolyzerParams& p) {
    const double i = electrolyzer_current_for_power(power_kw, p);
    return conversion_efficiency(electrolyzer_cell_voltage(i, p), faraday_efficiency(i / p.A, p.theta, p),
                                 Direction::Charging);
}

double fuelcell_efficiency_at_power(double power_kw, const FuelCellParams& p) {
    const double i = fuelcell_current_for_power(power_kw, p);
    return conversion_efficiency(fuelcell_cell_voltage(i, p), 1.0, Direction::Discharging);
}

CurveSamples sample_electrolyzer_curve(const ElectrolyzerParams& p, int n) {
    p.validate();
    if (n < 2) throw std::invalid_argument("sample_electrolyzer_curve: need at least 2 samples");
    const Eigen::VectorXd P = Eigen::VectorXd::LinSpaced(n, p.p_min_frac * p.P_rated, p.P_rated);
    CurveSamples out;
    out.reserve(static_cast<std::size_t>(n));
    for (double x : P) out.emplace_back(x, electrolyzer_rate_at_power(x, p));
    return out;
}

CurveSamples sample_fuelcell_curve(const FuelCellParams& p, int n) {
    p.validate();
    if (n < 2) throw std::invalid_argument("sample_fuelcell_curve: need at least 2 samples");
    const Eigen::VectorXd P = Eigen::VectorXd::LinSpaced(n, 0.005 * p.P_rated, p.P_rated);
    CurveSamples out;
    out.reserve(static_cast<std::size_t>(n));
    for (double x : P) out.emplace_back(x, fuelcell_rate_at_power(x, p));
    return out;
}

}  // namespace hbes
