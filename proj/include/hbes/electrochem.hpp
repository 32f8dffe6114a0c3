#pragma once

// Semi-empirical alkaline electrolyzer and PEM fuel-cell models.
//
// Scalar kernels are templates so they accept double, float or any type with
// the usual arithmetic and std::log overloads; stack-level helpers that
// invert power to current work in double.

#include "hbes/diagnostics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hbes {

namespace constants {
inline constexpr double faraday = 96485.0;       // C/mol
inline constexpr double molar_mass_h2 = 0.002016;  // kg/mol
inline constexpr double gas_constant = 8.314;    // J/(K mol)
inline constexpr double lhv_kwh_per_kg = 33.33;
inline constexpr double hhv_kwh_per_kg = 39.4;
inline constexpr double joule_per_kwh = 3.6e6;
}  // namespace constants

enum class Direction { Charging, Discharging };

const char* to_string(Direction d);
Direction direction_from_string(const std::string& s);

/// Alkaline electrolyzer at 90 degC and 10 bar. The logarithm in the voltage
/// model is natural, so `s` is the base-10 literature value divided by ln 10.
struct ElectrolyzerParams {
    double U_rev = 1.229;
    double r1 = 4.45153e-5;
    double r2 = 6.88874e-9;
    double d1 = -3.12996e-6;
    double d2 = 4.47137e-7;
    double s = 0.14690;
    double t1 = -0.01539;
    double t2 = 2.00181;
    double t3 = 15.24178;
    double f1 = 478645.74;
    double f2 = -2953.15;
    double f3 = 1.03960;
    double f4 = -0.00104;
    double A = 0.1;
    int N = 28;
    double theta = 90.0;
    double P_op = 10.0;
    double p_min_frac = 0.15;
    double P_rated = 50.0;

    void validate() const;
};

/// PEM fuel cell at 333.15 K. C_O2 follows the Henry-law estimate
/// 1 / (5.08e6 exp(-498 / theta)).
struct FuelCellParams {
    double dG = 237.1e3;
    double dS = 164.0;
    double theta = 333.15;
    double theta_ref = 298.15;
    double P_H2 = 1.0;
    double P_O2 = 1.0;
    double a1 = 0.948;
    double a2 = -0.0032;
    double a3 = -7.6e-5;
    double a4 = 0.9e-4;
    double r_M = 0.02;
    double l = 1.78e-4;
    double R_c = 4e-4;
    double B_con = 0.016;
    double J_max = 15000.0;
    double C_O2 = 1.0 / (5.08e6 * std::exp(-498.0 / 333.15));
    double A = 0.05;
    int N = 253;
    double P_rated = 50.0;
    double i_min_per_area = 1e-3;  // i_min = i_min_per_area * A

    double i_min() const { return i_min_per_area * A; }
    void validate() const;
};

template <class S>
S electrolyzer_cell_voltage(S i, const ElectrolyzerParams& p) {
    using std::log;
    if (i < S(0)) throw std::domain_error("electrolyzer_cell_voltage: negative current");
    const S j = i / S(p.A);
    const S ohmic = (S(p.r1 + p.d1) + S(p.r2 * p.theta) + S(p.d2 * p.P_op)) * j;
    const S tcoef = S(p.t1 + p.t2 / p.theta + p.t3 / (p.theta * p.theta));
    return S(p.U_rev) + ohmic + S(p.s) * log(tcoef * j + S(1));
}

/// Faraday efficiency; raw values above 1 are clamped with a diagnostic.
template <class S>
S faraday_efficiency(S j, double theta, const ElectrolyzerParams& p) {
    if (j < S(0)) throw std::domain_error("faraday_efficiency: negative current density");
    const S j2 = j * j;
    const S den = S(p.f1 + p.f2 * theta) + j2;
    if (!(den > S(0))) throw std::invalid_argument("faraday_efficiency: f1 + f2*theta + j^2 must be positive");
    S eta = j2 / den * S(p.f3 + p.f4 * theta);
    if (eta > S(1)) {
        diagnostic("faraday_efficiency: raw value exceeds 1, clamped");
        eta = S(1);
    }
    if (eta < S(0)) eta = S(0);
    return eta;
}

/// kg/h produced (charging) or consumed (discharging) by a stack of n cells.
template <class S>
S hydrogen_mass_rate(S i, int n_cells, S eta_F, Direction dir) {
    if (i < S(0)) throw std::domain_error("hydrogen_mass_rate: negative current");
    const S base = S(3600.0 * constants::molar_mass_h2 / (2.0 * constants::faraday)) * i * S(n_cells);
    return dir == Direction::Charging ? eta_F * base : base;
}

/// Charging: eta_F M LHV / (2 F U). Discharging: 2 F U / (M HHV).
/// Heating values are converted to J/kg so the result is dimensionless.
template <class S>
S conversion_efficiency(S u_cell, S eta_F, Direction dir) {
    if (!(u_cell > S(0))) throw std::domain_error("conversion_efficiency: cell voltage must be positive");
    using namespace constants;
    if (dir == Direction::Charging)
        return eta_F * S(molar_mass_h2 * lhv_kwh_per_kg * joule_per_kwh / (2.0 * faraday)) / u_cell;
    return S(2.0 * faraday / (molar_mass_h2 * hhv_kwh_per_kg * joule_per_kwh)) * u_cell;
}

/// Nernst potential minus activation, ohmic and concentration losses. The
/// concentration loss is -B ln(1 - J/J_max), which is non-negative.
template <class S>
S fuelcell_cell_voltage(S i, const FuelCellParams& p) {
    using std::log;
    if (i < S(p.i_min())) throw std::domain_error("fuelcell_cell_voltage: current below i_min");
    const S J = i / S(p.A);
    if (!(J < S(p.J_max))) throw std::domain_error("fuelcell_cell_voltage: current density at or above J_max");
    const double T = p.theta;
    const double e_nernst = (p.dG - p.dS * (T - p.theta_ref) +
                             constants::gas_constant * T * (std::log(p.P_H2) + 0.5 * std::log(p.P_O2))) /
                            (2.0 * constants::faraday);
    const S u_act = S(p.a1 + p.a2 * T + p.a3 * T * std::log(p.C_O2)) + S(p.a4 * T) * log(i);
    const S u_ohm = i * S(p.r_M * p.l / p.A + p.R_c);
    const S u_con = -S(p.B_con) * log(S(1) - J / S(p.J_max));
    return S(e_nernst) - u_act - u_ohm - u_con;
}

// Stack-level views (double precision).

double electrolyzer_stack_power_kw(double i, const ElectrolyzerParams& p);
double fuelcell_stack_power_kw(double i, const FuelCellParams& p);

/// Current that draws `power_kw` from the electrolyzer stack (bisection).
double electrolyzer_current_for_power(double power_kw, const ElectrolyzerParams& p);
/// Current at which the fuel-cell stack delivers `power_kw` on the rising
/// branch of its power curve (bisection).
double fuelcell_current_for_power(double power_kw, const FuelCellParams& p);

/// Hydrogen production (kg/h) at electrolyzer input power `power_kw`.
double electrolyzer_rate_at_power(double power_kw, const ElectrolyzerParams& p);
/// Hydrogen consumption (kg/h) at fuel-cell output power `power_kw`.
double fuelcell_rate_at_power(double power_kw, const FuelCellParams& p);

/// Charging efficiency h LHV / P at electrolyzer input power.
double electrolyzer_efficiency_at_power(double power_kw, const ElectrolyzerParams& p);
/// Discharging efficiency P / (h HHV) at fuel-cell output power.
double fuelcell_efficiency_at_power(double power_kw, const FuelCellParams& p);

using CurveSamples = std::vector<std::pair<double, double>>;  // (kW, kg/h)

/// Dense samples of the production curve on [p_min_frac P_rated, P_rated].
CurveSamples sample_electrolyzer_curve(const ElectrolyzerParams& p, int n = 201);
/// Dense samples of the consumption curve on (0, P_rated]; the first sample
/// sits at 0.5% of rated power.
CurveSamples sample_fuelcell_curve(const FuelCellParams& p, int n = 201);

}  // namespace hbes
