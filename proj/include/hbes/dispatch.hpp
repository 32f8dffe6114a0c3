#pragma once

// Rollout engine for the five dispatch methods, ex-post reconciliation of
// committed decisions against the revealed uncertainty, and the metrics
// behind the method comparison table.
//
//   M0  perfect-foresight plan over the whole scenario
//   M1  virtual-queue OCO tracking the kernel-blended hydrogen reference
//   M2  receding-horizon MPC tracking the same reference
//   M3  OCO without a reference (hull segments)
//   M4  MPC without a reference (hull segments)

#include "hbes/grid.hpp"
#include "hbes/oco.hpp"
#include "hbes/reference.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hbes {

enum class Method { M0, M1, M2, M3, M4 };
enum class EfficiencyModel { E1, E2, E3 };
enum class ForecastKind { Persistence, OracleNoise };

const char* to_string(Method m);
const char* to_string(EfficiencyModel e);
const char* to_string(ForecastKind f);
Method method_from_string(const std::string& s);
EfficiencyModel efficiency_from_string(const std::string& s);
ForecastKind forecast_from_string(const std::string& s);

/// Curves used for planning: E1 the fitted piecewise curves, E2 constant 63%
/// both ways, E3 constant 53% charging and 45% discharging. Physics always
/// follows the fitted curves.
MicrogridSpec planning_spec(const MicrogridSpec& truth, EfficiencyModel model);

struct MpcConfig {
    Index horizon = 24;
    ForecastKind forecast = ForecastKind::Persistence;
    double sigma_f = 0.0;  // relative noise of the oracle forecast
    std::uint64_t seed = 0;
};

struct OcoTuning {
    double alpha0 = 16.0;
    double beta0 = 0.05;
    double gamma_fraction = 0.5;  // gamma0 as a fraction of 1 / (sqrt(2) G)
    double kappa = 0.5;
    double c = 0.5;
    Index calibration_steps = 168;
};

struct MethodConfig {
    Method method = Method::M0;
    EfficiencyModel efficiency = EfficiencyModel::E1;
    double phi = 0.1;     // $/kg^2, SoC tracking weight
    double sigma = 0.3;   // kernel bandwidth
    MpcConfig mpc;
    OcoTuning oco;
    OfflineOptions offline;

    bool uses_reference() const { return method == Method::M1 || method == Method::M2; }
};

/// Realized state at the start of a step.
struct StepState {
    Index t = 0;
    double e_b = 0.0;
    double e_h = 0.0;
    std::optional<double> p_d_prev;
};

/// Maps a committed decision onto physically realizable operation for the
/// revealed load and renewable availability. Hydrogen rates follow the true
/// curves of `spec`, storage powers are clamped to power and SoC limits and
/// the balance is restored by a fixed merit order that keeps the committed
/// storage setpoints where it can:
///   shortfall: renewables up to availability, diesel within its ramp, grid
///              import up to the cap, cut battery charging, cut hydrogen
///              charging, battery discharge headroom, hydrogen discharge
///              headroom, loss of load;
///   surplus:   cut loss of load, diesel down to its floor, cut grid import,
///              cut battery discharge, cut hydrogen discharge, battery
///              charging headroom, hydrogen charging headroom, curtailment.
/// Committed loss of load is discarded and re-derived by the merit order. A
/// decision that is already feasible is returned unchanged, unless it sheds
/// load while renewables, diesel or grid import have headroom.
DispatchDecision reconcile(const DispatchDecision& committed, double load, double renewable, const MicrogridSpec& spec,
                           const StepState& state);

/// First action of the receding-horizon program over `forecast` (a series
/// covering at least the window starting at index 0), starting from `state`.
/// With a reference, segments are fixed from `schedule` and the SoC penalty
/// phi (e_h - reference)^2 is added; otherwise hull segments are used.
DispatchDecision mpc_step(const MicrogridSpec& spec, const StepState& state, const ScenarioSeries& forecast,
                          Index horizon, double phi, const Vector* reference, const SegmentSchedule* schedule);

struct EnergyTotals {
    CostBreakdown cost;
    double dg_mwh = 0.0;
    double lol_mwh = 0.0;
    double h2_charge_mwh = 0.0;
    double h2_discharge_mwh = 0.0;
};

EnergyTotals totals_of(const std::vector<DispatchDecision>& traj, const MicrogridSpec& spec);

struct RolloutResult {
    Method method = Method::M0;
    EfficiencyModel efficiency = EfficiencyModel::E1;
    std::vector<DispatchDecision> committed;  // theoretical
    std::vector<DispatchDecision> realized;   // practical
    EnergyTotals theoretical;
    EnergyTotals practical;
    Vector reference;                // tracked reference used, empty without one
    double reference_rmse_pct = 0.0; // realized e_h against `reference`
    std::vector<double> step_ms;
    double mean_step_ms = 0.0;
    double max_step_ms = 0.0;
    std::vector<std::string> trace;  // JSON lines, one per step (online methods)
};

struct RolloutInputs {
    const ScenarioLibrary* library = nullptr;  // required by M1 and M2
    const ReferenceSet* references = nullptr;
    bool keep_trace = false;
};

RolloutResult run_rollout(const MicrogridSpec& spec, const ScenarioSeries& scenario, const MethodConfig& config,
                          const RolloutInputs& inputs = {});

struct ComparisonRow {
    Method method = Method::M0;
    double cost_usd = 0.0;
    double dg_mwh = 0.0;
    double lol_mwh = 0.0;
    double rmse_pct = 0.0;  // hydrogen SoC against the perfect-foresight trajectory
    double step_ms = 0.0;
    double regret_usd = 0.0;
    double path_length = 0.0;
};

/// One row per config, in order. RMSE and regret are measured against the M0
/// rollout, which is run once if not in the list.
std::vector<ComparisonRow> evaluate_methods(const MicrogridSpec& spec, const ScenarioSeries& scenario,
                                            const std::vector<MethodConfig>& configs, const RolloutInputs& inputs,
                                            std::vector<RolloutResult>* rollouts = nullptr);

inline constexpr const char* kComparisonHeader = "method,cost_usd,dg_mwh,lol_mwh,rmse_pct,step_ms";

/// Comparison CSV. Step times are wall-clock measurements, so they are only
/// written when `with_timing` is set; otherwise the column holds "NA" and the
/// file is a pure function of the inputs.
void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows, bool with_timing);

/// `t,p_b_c,p_b_d,p_h_c,p_h_d,p_d,p_l,p_r,p_g,e_b,e_h`.
void write_trajectory_csv(std::ostream& os, const std::vector<DispatchDecision>& traj);

}  // namespace hbes
