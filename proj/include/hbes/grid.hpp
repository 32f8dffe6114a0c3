#pragma once

// Microgrid data model, per-step dynamics, stage cost and the dispatch
// program builder shared by the offline, online and receding-horizon solvers.

#include "hbes/piecewise.hpp"
#include "hbes/program.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hbes {

struct BatterySpec {
    double eta_c = 0.9;
    double eta_d = 0.9;
    double eps = 0.01 / 720.0;  // self-discharge per hour (1%/month)
    double p_max = 50.0;        // kW
    double e_min = 0.0;         // kWh
    double e_max = 100.0;       // kWh
    double e0 = 50.0;           // kWh
};

struct HydrogenSpec {
    PiecewiseCurve charge_curve;     // kW -> kg/h
    PiecewiseCurve discharge_curve;  // kW -> kg/h
    double e_min = 0.0;              // kg
    double e_max = 20000.0 / constants::lhv_kwh_per_kg;  // 20 MWh of hydrogen
    double e0 = 10000.0 / constants::lhv_kwh_per_kg;
    double p_max = 50.0;             // kW, both directions
    Vector hydrogen_load;            // kg per step, empty means zero
};

struct DieselSpec {
    double p_min = 0.0;
    double p_max = 50.0;
    double rd = 50.0;  // kW per step
    double ru = 50.0;
};

struct Prices {
    double c_L = 5.0;
    double c_D = 0.3;
    double c_B = 0.02;
    double c_H = 0.03;
};

struct Capacities {
    double wind = 100.0;
    double solar = 100.0;
    double load = 100.0;
};

struct MicrogridSpec {
    BatterySpec battery;
    HydrogenSpec hydrogen;
    DieselSpec diesel;
    Vector grid_import_cap;  // kW per step, empty means island (0)
    Prices prices;
    Capacities capacities;
    double dt = 1.0;  // hours per step
    bool allow_price_inversion = false;  // permit c_B >= c_H

    double hydrogen_load(Index t) const { return t < hydrogen.hydrogen_load.size() ? hydrogen.hydrogen_load[t] : 0.0; }
    double grid_cap(Index t) const { return t < grid_import_cap.size() ? grid_import_cap[t] : 0.0; }

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

/// Table-2 style test system with the default two-segment fitted curves.
MicrogridSpec default_spec();

/// Exogenous series. Timestamps are seconds since the Unix epoch (UTC).
struct ScenarioSeries {
    std::vector<std::int64_t> timestamps;
    Vector load;   // kW
    Vector solar;  // kW
    Vector wind;   // kW
    Vector grid;   // optional availability channel, may be empty
    std::string label;

    Index size() const { return load.size(); }
    double renewable(Index t) const { return solar[t] + wind[t]; }
    double dt_hours() const;

    /// Steps [start, start + len).
    ScenarioSeries slice(Index start, Index len) const;

    /// Throws std::invalid_argument on unequal lengths, negative values or
    /// non-uniform timestamps.
    void validate() const;
};

struct DispatchDecision {
    double p_b_c = 0, p_b_d = 0;
    double p_h_c = 0, p_h_d = 0;
    int seg_c = 0, seg_d = 0;    // active segment of each curve
    double w_c = 0, w_d = 0;     // duty fraction of the step spent in that segment
    double p_d = 0, p_l = 0, p_r = 0, p_g = 0;
    double h_c = 0, h_d = 0;     // kg/h
    double e_b = 0;              // kWh at the end of the step
    double e_h = 0;              // kg at the end of the step
};

struct CostBreakdown {
    double c_L = 0, c_D = 0, c_B = 0, c_H = 0, total = 0;

    CostBreakdown& operator+=(const CostBreakdown& o);
};

double battery_soc_step(double e, double p_c, double p_d, const MicrogridSpec& spec, double dt);
double hydrogen_soc_step(double e, double h_c, double h_d, double h_load, double dt);
CostBreakdown stage_cost(const DispatchDecision& x, const MicrogridSpec& spec, double dt);

/// Duty-weighted rate of operating the curve at mean power p for a fraction
/// w of the step: w * curve(p / w), with the level clamped to the domain.
double duty_rate(const PiecewiseCurve& curve, double p, double w);

// Program builder ------------------------------------------------------------

enum class SegmentMode {
    Binary,  // one-hot binaries per step, exact piecewise model
    Fixed,   // segment per step given by a schedule, LP/QP
    Hull,    // convex hull of the segments (sum of duties <= 1), LP/QP
};

struct SegmentSchedule {
    std::vector<int> seg_c, seg_d;
};

struct SocPenalty {
    double phi = 0.0;  // $/kg^2
    Vector reference;  // kg, end-of-step reference per program step
};

struct HorizonOptions {
    SegmentMode mode = SegmentMode::Binary;
    SegmentSchedule schedule;  // used by Fixed, indexed by program step
    std::optional<SocPenalty> soc_penalty;
    bool terminal = true;      // E_T >= E_0 for both storages
    Index start = 0;           // offset of the first step in the scenario series
    Index spec_start = -1;     // offset into the spec series, negative means `start`
    bool exogenous_rows = true;  // false drops the balance row and uses capacities for p_l, p_r
    std::optional<double> e_b0, e_h0;  // initial state, defaults to the spec
    std::optional<double> p_d_prev;    // diesel output before the first step (ramp)
};

/// Column indices of one step's variables.
struct StepVars {
    Index p_b_c, p_b_d, p_h_c, p_h_d, p_d, p_l, p_r, p_g, e_b, e_h;
    std::vector<Index> pc, wc, zc;  // per charge segment (zc empty unless Binary)
    std::vector<Index> pd, wd, zd;  // per discharge segment
};

/// Variable and row census per step with Kc charge and Kd discharge segments:
///   variables   10 + 2 (Kc + Kd)            (+ Kc + Kd binaries in Binary mode)
///   equalities  5 (battery, hydrogen, balance, two power sums)  (+ 2 one-hot rows in Binary mode)
///               (4 without the exogenous balance row)
///   inequalities 2 (Kc + Kd) segment power windows
///                + Kc + Kd duty links (Binary) or 2 duty sums (Hull)
///                + 2 ramp rows for every step with a predecessor
/// SoC bounds, the terminal conditions and all power limits are bounds.
struct HorizonProgram {
    StandardFormProgram program;
    std::vector<StepVars> steps;
    Index horizon = 0;
    Index start = 0;
};

HorizonProgram build_horizon_program(const MicrogridSpec& spec, const ScenarioSeries& scenario, Index horizon,
                                     const HorizonOptions& options = {});

/// Decisions of every step of a solved program. Segment indices are the
/// active (largest-duty) segment.
std::vector<DispatchDecision> extract_trajectory(const HorizonProgram& hp, const MicrogridSpec& spec,
                                                 const Vector& x);

/// Segment schedule (largest duty per step) of a trajectory.
SegmentSchedule schedule_of(const std::vector<DispatchDecision>& traj);

struct Violation {
    Index step;
    std::string tag;
    double residual;
};

struct ValidateOptions {
    Index start = 0;
    double tol = 1e-6;
    std::optional<double> e_b0, e_h0, p_d_prev;
    bool terminal = false;
    bool check_curves = true;  // hydrogen rates must follow the planning curves
};

std::vector<Violation> validate_trajectory(const std::vector<DispatchDecision>& traj, const MicrogridSpec& spec,
                                           const ScenarioSeries& scenario, const ValidateOptions& options = {});

/// Power balance residual (supply minus demand) in kW.
double balance_residual(const DispatchDecision& x, double load);

}  // namespace hbes
