#include "hbes/dispatch.hpp"

#include "hbes/csv.hpp"
#include "hbes/diagnostics.hpp"
#include "hbes/errors.hpp"
#include "hbes/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

namespace hbes {

const char* to_string(Method m) {
    switch (m) {
        case Method::M0: return "M0";
        case Method::M1: return "M1";
        case Method::M2: return "M2";
        case Method::M3: return "M3";
        case Method::M4: return "M4";
    }
    return "?";
}

const char* to_string(EfficiencyModel e) {
    switch (e) {
        case EfficiencyModel::E1: return "E1";
        case EfficiencyModel::E2: return "E2";
        case EfficiencyModel::E3: return "E3";
    }
    return "?";
}

const char* to_string(ForecastKind f) { return f == ForecastKind::Persistence ? "persistence" : "oracle_noise"; }

Method method_from_string(const std::string& s) {
    for (auto m : {Method::M0, Method::M1, Method::M2, Method::M3, Method::M4})
        if (s == to_string(m)) return m;
    throw std::invalid_argument("unknown method '" + s + "' (expected M0..M4)");
}

EfficiencyModel efficiency_from_string(const std::string& s) {
    for (auto e : {EfficiencyModel::E1, EfficiencyModel::E2, EfficiencyModel::E3})
        if (s == to_string(e)) return e;
    throw std::invalid_argument("unknown efficiency model '" + s + "' (expected E1, E2 or E3)");
}

ForecastKind forecast_from_string(const std::string& s) {
    if (s == "persistence") return ForecastKind::Persistence;
    if (s == "oracle_noise") return ForecastKind::OracleNoise;
    throw std::invalid_argument("unknown forecast '" + s + "' (expected persistence or oracle_noise)");
}

MicrogridSpec planning_spec(const MicrogridSpec& truth, EfficiencyModel model) {
    if (model == EfficiencyModel::E1) return truth;
    MicrogridSpec s = truth;
    const double eta_c = model == EfficiencyModel::E2 ? 0.63 : 0.53;
    const double eta_d = model == EfficiencyModel::E2 ? 0.63 : 0.45;
    s.hydrogen.charge_curve = constant_efficiency_curve(Direction::Charging, eta_c, 0.0, truth.hydrogen.charge_curve.p_max());
    s.hydrogen.discharge_curve =
        constant_efficiency_curve(Direction::Discharging, eta_d, 0.0, truth.hydrogen.discharge_curve.p_max());
    return s;
}

// Reconciliation ----------------------------------------------------------------

namespace {

constexpr double kBalanceTol = 1e-9;

// Duty consistent with the curve domain: the level p / w must lie inside it.
// Without a usable committed duty the unit runs continuously when p is above
// the minimum level and duty-cycles at the minimum otherwise.
double normalize_duty(const PiecewiseCurve& c, double p, double w) {
    if (p <= 0.0) return 0.0;
    const double lo = std::min(1.0, p / c.p_max());
    const double hi = c.p_min() > 0.0 ? std::min(1.0, p / c.p_min()) : 1.0;
    if (!(w > 0.0)) return hi;
    return std::clamp(w, lo, hi);
}

double true_rate(const PiecewiseCurve& c, double p, double w) { return duty_rate(c, p, normalize_duty(c, p, w)); }

// Largest p in [0, p_hi] with rate(p) <= target; rate is non-decreasing in p.
double power_for_rate(const PiecewiseCurve& c, double p_hi, double w, double target) {
    if (target <= 0.0) return 0.0;
    if (true_rate(c, p_hi, w) <= target) return p_hi;
    double lo = 0.0, hi = p_hi;
    for (int k = 0; k < 100 && hi - lo > 1e-13 * std::max(1.0, p_hi); ++k) {
        const double mid = 0.5 * (lo + hi);
        (true_rate(c, mid, w) <= target ? lo : hi) = mid;
    }
    return lo;
}

struct Reconciler {
    const MicrogridSpec& spec;
    const StepState& st;
    double load, ren;
    DispatchDecision x;

    double dt() const { return spec.dt; }
    const PiecewiseCurve& cc() const { return spec.hydrogen.charge_curve; }
    const PiecewiseCurve& dc() const { return spec.hydrogen.discharge_curve; }
    double keep() const { return 1.0 - spec.battery.eps * dt(); }
    double d_lo() const {
        const auto& D = spec.diesel;
        return st.p_d_prev ? std::max(D.p_min, *st.p_d_prev - D.rd) : D.p_min;
    }
    double d_hi() const {
        const auto& D = spec.diesel;
        return st.p_d_prev ? std::min(D.p_max, *st.p_d_prev + D.ru) : D.p_max;
    }
    double h_c_max() const { return std::min(spec.hydrogen.p_max, cc().p_max()); }
    double h_d_max() const { return std::min(spec.hydrogen.p_max, dc().p_max()); }
    double h_load() const { return spec.hydrogen_load(st.t); }

    double supply() const { return x.p_g + x.p_r + x.p_d + x.p_b_d - x.p_b_c + x.p_h_d - x.p_h_c + x.p_l; }

    // Battery discharge that keeps the SoC at or above e_min.
    double b_d_cap() const {
        const auto& B = spec.battery;
        const double room = keep() * st.e_b + dt() * B.eta_c * x.p_b_c - B.e_min;
        return std::clamp(B.eta_d * room / dt(), 0.0, B.p_max);
    }
    double b_c_cap() const {
        const auto& B = spec.battery;
        const double room = B.e_max - keep() * st.e_b + dt() * x.p_b_d / B.eta_d;
        return std::clamp(room / (dt() * B.eta_c), 0.0, B.p_max);
    }
    // Hydrogen mass that may leave (discharge) or enter (charge) this step.
    double h_out_room() const {
        return (st.e_h - h_load() - spec.hydrogen.e_min) / dt() + true_rate(cc(), x.p_h_c, x.w_c);
    }
    double h_in_room() const {
        return (spec.hydrogen.e_max - st.e_h + h_load()) / dt() + true_rate(dc(), x.p_h_d, x.w_d);
    }

    void clamp_powers() {
        const auto& B = spec.battery;
        x.p_b_c = std::clamp(x.p_b_c, 0.0, B.p_max);
        x.p_b_d = std::clamp(x.p_b_d, 0.0, B.p_max);
        x.p_h_c = std::clamp(x.p_h_c, 0.0, h_c_max());
        x.p_h_d = std::clamp(x.p_h_d, 0.0, h_d_max());
        x.p_d = std::clamp(x.p_d, d_lo(), std::max(d_lo(), d_hi()));
        x.p_l = std::clamp(x.p_l, 0.0, load);
        x.p_r = std::clamp(x.p_r, 0.0, ren);
        x.p_g = std::clamp(x.p_g, 0.0, spec.grid_cap(st.t));
    }

    // Simultaneous charge and discharge of one store is netted out.
    void net_storage() {
        const double b = std::min(x.p_b_c, x.p_b_d);
        x.p_b_c -= b;
        x.p_b_d -= b;
        const double h = std::min(x.p_h_c, x.p_h_d);
        x.p_h_c -= h;
        x.p_h_d -= h;
    }

    void clamp_soc() {
        x.p_b_d = std::min(x.p_b_d, b_d_cap());
        x.p_b_c = std::min(x.p_b_c, b_c_cap());
        x.p_h_d = power_for_rate(dc(), x.p_h_d, x.w_d, std::max(0.0, h_out_room()));
        x.p_h_c = power_for_rate(cc(), x.p_h_c, x.w_c, std::max(0.0, h_in_room()));
    }

    static double raise(double& v, double amount, double cap) {
        const double d = std::clamp(cap - v, 0.0, amount);
        v += d;
        return d;
    }
    static double lower(double& v, double amount, double floor) {
        const double d = std::clamp(v - floor, 0.0, amount);
        v -= d;
        return d;
    }

    // Fuel cell power that fits in the SoC room.
    double h_d_cap() const {
        return power_for_rate(dc(), h_d_max(), x.w_d > 0 ? x.w_d : 1.0, std::max(0.0, h_out_room()));
    }

    void balance() {
        double gap = load - supply();
        if (gap > 0.0) {
            gap -= raise(x.p_r, gap, ren);
            gap -= raise(x.p_d, gap, d_hi());
            gap -= raise(x.p_g, gap, spec.grid_cap(st.t));
            gap -= lower(x.p_b_c, gap, 0.0);
            gap -= lower(x.p_h_c, gap, 0.0);
            gap -= raise(x.p_b_d, gap, b_d_cap());
            gap -= raise(x.p_h_d, gap, h_d_cap());
            raise(x.p_l, gap, load);
        } else if (gap < 0.0) {
            double ex = -gap;
            ex -= lower(x.p_l, ex, 0.0);
            ex -= lower(x.p_d, ex, d_lo());
            ex -= lower(x.p_g, ex, 0.0);
            ex -= lower(x.p_b_d, ex, 0.0);
            ex -= lower(x.p_h_d, ex, 0.0);
            ex -= lower(x.p_r, ex, 0.0);
            if (ex > kBalanceTol) {
                // Only a diesel floor or ramp can leave a surplus here.
                diagnostic("reconcile: surplus of " + std::to_string(ex) + " kW at step " + std::to_string(st.t) +
                           " exceeds every sink, lowering diesel below its ramp limit");
                lower(x.p_d, ex, 0.0);
            }
        }
    }

    void finish() {
        const auto& B = spec.battery;
        x.w_c = normalize_duty(cc(), x.p_h_c, x.w_c);
        x.w_d = normalize_duty(dc(), x.p_h_d, x.w_d);
        x.h_c = duty_rate(cc(), x.p_h_c, x.w_c);
        x.h_d = duty_rate(dc(), x.p_h_d, x.w_d);
        if (x.p_h_c > 0.0) x.seg_c = static_cast<int>(cc().segment_of(std::clamp(x.p_h_c / x.w_c, cc().p_min(), cc().p_max())));
        else x.seg_c = std::clamp(x.seg_c, 0, static_cast<int>(cc().size()) - 1);
        if (x.p_h_d > 0.0) x.seg_d = static_cast<int>(dc().segment_of(std::clamp(x.p_h_d / x.w_d, dc().p_min(), dc().p_max())));
        else x.seg_d = std::clamp(x.seg_d, 0, static_cast<int>(dc().size()) - 1);
        x.e_b = std::clamp(battery_soc_step(st.e_b, x.p_b_c, x.p_b_d, spec, dt()), B.e_min, B.e_max);
        x.e_h = std::clamp(hydrogen_soc_step(st.e_h, x.h_c, x.h_d, h_load(), dt()), spec.hydrogen.e_min,
                           spec.hydrogen.e_max);
    }

    bool already_feasible(const DispatchDecision& c) const {
        const auto& B = spec.battery;
        const auto& H = spec.hydrogen;
        const double tol = 1e-6;
        auto in = [&](double v, double lo, double hi) { return v >= lo - tol && v <= hi + tol; };
        if (!(in(c.p_b_c, 0, B.p_max) && in(c.p_b_d, 0, B.p_max) && in(c.p_h_c, 0, h_c_max()) &&
              in(c.p_h_d, 0, h_d_max()) && in(c.p_d, d_lo(), d_hi()) && in(c.p_l, 0, load) && in(c.p_r, 0, ren) &&
              in(c.p_g, 0, spec.grid_cap(st.t))))
            return false;
        if (std::abs(balance_residual(c, load)) > kBalanceTol) return false;
        // Shedding load while cheaper supply is idle is not accepted as is.
        if (c.p_l > 0 && (c.p_r < ren - tol || c.p_d < d_hi() - tol || c.p_g < spec.grid_cap(st.t) - tol))
            return false;
        const double eb = battery_soc_step(st.e_b, c.p_b_c, c.p_b_d, spec, dt());
        if (std::abs(eb - c.e_b) > tol || !in(c.e_b, B.e_min, B.e_max)) return false;
        // Committed rates must be what the true curves deliver at the committed duty.
        if (c.p_h_c > 0 && std::abs(normalize_duty(cc(), c.p_h_c, c.w_c) - c.w_c) > tol) return false;
        if (c.p_h_d > 0 && std::abs(normalize_duty(dc(), c.p_h_d, c.w_d) - c.w_d) > tol) return false;
        if (std::abs(duty_rate(cc(), c.p_h_c, c.w_c) - c.h_c) > tol) return false;
        if (std::abs(duty_rate(dc(), c.p_h_d, c.w_d) - c.h_d) > tol) return false;
        const double eh = hydrogen_soc_step(st.e_h, c.h_c, c.h_d, h_load(), dt());
        return std::abs(eh - c.e_h) <= tol && in(c.e_h, H.e_min, H.e_max);
    }
};

}  // namespace

DispatchDecision reconcile(const DispatchDecision& committed, double load, double renewable, const MicrogridSpec& spec,
                           const StepState& state) {
    Reconciler r{spec, state, std::max(0.0, load), std::max(0.0, renewable), committed};
    if (r.already_feasible(committed)) return committed;
    r.clamp_powers();
    r.x.p_l = 0.0;  // loss of load is an outcome of the merit order, not a setpoint
    r.net_storage();
    r.clamp_soc();
    for (int pass = 0; pass < 4; ++pass) {
        r.balance();
        r.clamp_soc();
        if (std::abs(r.supply() - r.load) <= kBalanceTol) break;
    }
    r.finish();
    const double res = r.supply() - r.load;
    if (std::abs(res) > kBalanceTol) {
        // Close the last rounding gap on loss of load or curtailment.
        if (res < 0) r.x.p_l = std::min(r.load, r.x.p_l - res);
        else if (r.x.p_r >= res) r.x.p_r -= res;
        else r.x.p_l = std::max(0.0, r.x.p_l - res);
    }
    return r.x;
}

// MPC ------------------------------------------------------------------------------

DispatchDecision mpc_step(const MicrogridSpec& spec, const StepState& state, const ScenarioSeries& forecast,
                          Index horizon, double phi, const Vector* reference, const SegmentSchedule* schedule) {
    if (horizon < 1) throw std::invalid_argument("mpc_step: horizon must be at least 1");
    const Index H = std::min(horizon, forecast.size());
    HorizonOptions o;
    o.terminal = false;
    o.start = 0;
    o.spec_start = state.t;
    o.e_b0 = state.e_b;
    o.e_h0 = state.e_h;
    o.p_d_prev = state.p_d_prev;
    if (schedule) {
        o.mode = SegmentMode::Fixed;
        o.schedule = *schedule;
    } else {
        o.mode = SegmentMode::Hull;
    }
    if (reference && phi > 0) o.soc_penalty = SocPenalty{phi, reference->head(H)};
    auto hp = build_horizon_program(spec, forecast, H, o);
    auto sol = solve_qp(hp.program);
    if (!sol.ok()) {
        diagnostic(std::string("mpc window at step ") + std::to_string(state.t) + ": " + to_string(sol.status) +
                   ", committing an idle decision");
        DispatchDecision idle;
        idle.e_b = state.e_b;
        idle.e_h = state.e_h;
        return idle;
    }
    return extract_trajectory(hp, spec, sol.x).front();
}

// Rollouts ---------------------------------------------------------------------------

EnergyTotals totals_of(const std::vector<DispatchDecision>& traj, const MicrogridSpec& spec) {
    EnergyTotals e;
    const double dt = spec.dt;
    for (const auto& d : traj) {
        e.cost += stage_cost(d, spec, dt);
        e.dg_mwh += d.p_d * dt / 1000.0;
        e.lol_mwh += d.p_l * dt / 1000.0;
        e.h2_charge_mwh += d.p_h_c * dt / 1000.0;
        e.h2_discharge_mwh += d.p_h_d * dt / 1000.0;
    }
    return e;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

StepState initial_state(const MicrogridSpec& spec) { return {0, spec.battery.e0, spec.hydrogen.e0, std::nullopt}; }

void advance(StepState& st, const DispatchDecision& realized) {
    st.e_b = realized.e_b;
    st.e_h = realized.e_h;
    st.p_d_prev = realized.p_d;
    ++st.t;
}

nlohmann::json decision_json(const DispatchDecision& d) {
    return {{"p_b_c", d.p_b_c}, {"p_b_d", d.p_b_d}, {"p_h_c", d.p_h_c}, {"p_h_d", d.p_h_d}, {"p_d", d.p_d},
            {"p_l", d.p_l},     {"p_r", d.p_r},     {"p_g", d.p_g},     {"e_b", d.e_b},     {"e_h", d.e_h}};
}

void run_m0(const MicrogridSpec& spec, const ScenarioSeries& sc, const MethodConfig& cfg, RolloutResult& out) {
    const auto plan_spec = planning_spec(spec, cfg.efficiency);
    auto plan = plan_offline(plan_spec, sc, cfg.offline);
    out.committed = std::move(plan.trajectory);
    const double per_step = plan.wall_ms / static_cast<double>(sc.size());
    StepState st = initial_state(spec);
    for (Index t = 0; t < sc.size(); ++t) {
        const auto t0 = Clock::now();
        auto real = reconcile(out.committed[static_cast<std::size_t>(t)], sc.load[t], sc.renewable(t), spec, st);
        out.step_ms.push_back(per_step + ms_since(t0));
        advance(st, real);
        out.realized.push_back(real);
    }
}

// Reference lookup for online methods.
struct Tracking {
    const ReferenceSet* refs = nullptr;
    std::optional<KernelTracker> tracker;

    Tracking(const MethodConfig& cfg, const RolloutInputs& in, const MicrogridSpec& spec, Index T) {
        if (!cfg.uses_reference()) return;
        if (!in.library || !in.references) throw std::invalid_argument(std::string(to_string(cfg.method)) + " needs a scenario library and references");
        if (in.references->size() != in.library->size()) throw std::invalid_argument("reference count differs from the library size");
        if (in.references->length() < T) throw std::invalid_argument("references are shorter than the scenario");
        refs = in.references;
        tracker.emplace(*in.library, spec.capacities, cfg.sigma);
    }
    bool active() const { return refs != nullptr; }
};

// Column layout of the one-step program and the long-term constraint rows.
struct OnlineLayout {
    StepVars v;
    Index n = 0;
    Vector cost;
    SparseRows G;  // rows: shortfall, surplus, curtailment cap, renewable cap
    std::vector<std::pair<Index, double>> supply;  // balance coefficients

    StandardFormProgram bounds;  // hull-mode program, for the variable ranges

    OnlineLayout(const HorizonProgram& hp)
        : v(hp.steps.front()), n(hp.program.num_vars()), cost(hp.program.c), bounds(hp.program) {
        std::vector<Eigen::Triplet<double>> tr;
        supply = {{v.p_g, 1}, {v.p_r, 1}, {v.p_d, 1}, {v.p_b_d, 1}, {v.p_b_c, -1}, {v.p_h_d, 1}, {v.p_h_c, -1}, {v.p_l, 1}};
        for (auto [j, a] : supply) {
            tr.emplace_back(0, j, -a);
            tr.emplace_back(1, j, a);
        }
        tr.emplace_back(2, v.p_l, 1.0);
        tr.emplace_back(3, v.p_r, 1.0);
        G.resize(4, n);
        G.setFromTriplets(tr.begin(), tr.end());
    }

    Vector h(double load, double ren) const { return (Vector(4) << -load, load, load, ren).finished(); }
};

// Decisions are learned in units of each variable's range, so that the
// proximal term weighs kW, kWh and kg alike.
Vector unit_scale(const StandardFormProgram& p) {
    Vector d(p.num_vars());
    for (Index j = 0; j < d.size(); ++j) {
        const double r = p.ub[j] - p.lb[j];
        d[j] = std::isfinite(r) && r > 1e-9 ? r : 1.0;
    }
    return d;
}

// Program in z with x = d .* z.
StandardFormProgram scale_columns(const StandardFormProgram& p, const Vector& d) {
    StandardFormProgram s = p;
    s.c = p.c.cwiseProduct(d);
    if (p.q.size()) s.q = p.q.cwiseProduct(d).cwiseProduct(d);
    s.lb = p.lb.cwiseQuotient(d);
    s.ub = p.ub.cwiseQuotient(d);
    s.A_in = p.A_in * d.asDiagonal();
    s.A_eq = p.A_eq * d.asDiagonal();
    return s;
}

// Price of the resource that balanced the realized step at the margin: one
// more kW of net demand would have come from it.
double marginal_price(const DispatchDecision& d, double ren, const MicrogridSpec& spec, Index t) {
    constexpr double tol = 1e-9;
    if (d.p_r < ren - tol) return 0.0;
    if (d.p_l > tol) return spec.prices.c_L;
    if (d.p_g > tol && d.p_g < spec.grid_cap(t) - tol) return 0.0;
    return spec.prices.c_D;
}

void run_oco(const MicrogridSpec& spec, const ScenarioSeries& sc, const MethodConfig& cfg, const RolloutInputs& in,
             RolloutResult& out) {
    const auto plan_spec = planning_spec(spec, cfg.efficiency);
    const Index T = sc.size();
    Tracking trk(cfg, in, spec, T);
    const bool with_ref = trk.active();
    const double phi = with_ref ? cfg.phi : 0.0;
    StepState st = initial_state(spec);

    auto program_at = [&](const StepState& s, const BlendedReference* b) {
        HorizonOptions o;
        o.terminal = false;
        o.start = s.t;
        o.e_b0 = s.e_b;
        o.e_h0 = s.e_h;
        o.p_d_prev = s.p_d_prev;
        o.exogenous_rows = false;
        if (b) {
            o.mode = SegmentMode::Fixed;
            o.schedule = {{b->seg_c}, {b->seg_d}};
        } else {
            o.mode = SegmentMode::Hull;
        }
        return build_horizon_program(plan_spec, sc, 1, o);
    };

    auto blend_at = [&](Index t) { return blend_reference(trk.tracker->weights(), *trk.refs, t); };
    const OnlineLayout lay(program_at(st, nullptr));
    const Vector d = unit_scale(lay.bounds);
    const SparseRows Gz = lay.G * d.asDiagonal();

    // Gradient of the realized stage cost when `lambda` balances the step,
    // plus the SoC penalty slope.
    auto gradient = [&](double lambda, double e_h, double ref) {
        Vector g = lay.cost;
        for (auto [j, a] : lay.supply) g[j] -= a * lambda * spec.dt;
        if (with_ref) g[lay.v.e_h] += 2.0 * phi * (e_h - ref);
        return Vector(d.cwiseProduct(g));
    };

    // Gradient bound from a calibration prefix at the initial SoC, against
    // uniformly blended references and the loss-of-load price.
    double G = gradient(spec.prices.c_L, 0.0, 0.0).norm();
    if (with_ref) {
        const Vector uniform = Vector::Constant(static_cast<Index>(trk.refs->size()), 1.0 / static_cast<double>(trk.refs->size()));
        for (Index t = 0; t < std::min(T, cfg.oco.calibration_steps); ++t)
            G = std::max(G, gradient(spec.prices.c_L, spec.hydrogen.e0, blend_reference(uniform, *trk.refs, t).e_h).norm());
    }
    OcoConfig oc;
    oc.T = T;
    oc.kappa = cfg.oco.kappa;
    oc.c = cfg.oco.c;
    oc.alpha0 = cfg.oco.alpha0;
    oc.beta0 = cfg.oco.beta0;
    oc.G = G;
    oc.gamma0 = cfg.oco.gamma_fraction / (std::numbers::sqrt2 * G);

    Vector x0 = Vector::Zero(lay.n);
    x0[lay.v.e_b] = st.e_b;
    x0[lay.v.e_h] = st.e_h;
    OcoLearner learner(oc, x0.cwiseQuotient(d), 4);

    Feedback fb;
    if (with_ref) out.reference.resize(T);
    for (Index t = 0; t < T; ++t) {
        const auto t0 = Clock::now();
        std::optional<BlendedReference> b;
        if (with_ref) {
            b = blend_at(t);
            out.reference[t] = b->e_h;
        }
        auto hp = program_at(st, b ? &*b : nullptr);
        const InnerProblem X{scale_columns(hp.program, d), Gz, Vector::Zero(4)};
        const Vector x = d.cwiseProduct(learner.decide(X, t == 0 ? nullptr : &fb));
        auto committed = extract_trajectory(hp, plan_spec, x).front();
        auto real = reconcile(committed, sc.load[t], sc.renewable(t), spec, st);
        out.step_ms.push_back(ms_since(t0));

        fb.grad = gradient(marginal_price(real, sc.renewable(t), spec, t), x[lay.v.e_h], b ? b->e_h : 0.0);
        fb.G = Gz;
        fb.h = lay.h(sc.load[t], sc.renewable(t));

        if (in.keep_trace) {
            const auto& tr = learner.trace();
            nlohmann::json j{{"t", t},
                             {"rho", std::vector<double>(tr.rho.data(), tr.rho.data() + tr.rho.size())},
                             {"queue_norm", tr.queue_norm},
                             {"objective", tr.objective},
                             {"loss", tr.loss},
                             {"committed", decision_json(committed)}};
            if (with_ref) j["reference"] = b->e_h;
            out.trace.push_back(j.dump());
        }
        if (with_ref) trk.tracker->observe(sc.load[t], sc.solar[t], sc.wind[t]);
        advance(st, real);
        out.committed.push_back(committed);
        out.realized.push_back(real);
    }
}

void run_mpc(const MicrogridSpec& spec, const ScenarioSeries& sc, const MethodConfig& cfg, const RolloutInputs& in,
             RolloutResult& out) {
    const auto plan_spec = planning_spec(spec, cfg.efficiency);
    const Index T = sc.size();
    Tracking trk(cfg, in, spec, T);
    const bool with_ref = trk.active();
    const Index steps_per_day = std::max<Index>(1, static_cast<Index>(std::lround(24.0 / spec.dt)));
    std::mt19937_64 rng(cfg.mpc.seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    StepState st = initial_state(spec);
    if (with_ref) out.reference.resize(T);

    for (Index t = 0; t < T; ++t) {
        const auto t0 = Clock::now();
        const Index H = std::min(cfg.mpc.horizon, T - t);
        ScenarioSeries fc;
        fc.load.resize(H);
        fc.solar.resize(H);
        fc.wind.resize(H);
        for (Index k = 0; k < H; ++k) {
            const Index tau = t + k;
            if (cfg.mpc.forecast == ForecastKind::Persistence) {
                // Same time on the most recent fully observed day; the first
                // day has no history and uses its own values.
                const Index back = steps_per_day * ((k / steps_per_day) + 1);
                const Index src = tau - back >= 0 ? tau - back : tau;
                fc.load[k] = sc.load[src];
                fc.solar[k] = sc.solar[src];
                fc.wind[k] = sc.wind[src];
            } else {
                const double s = cfg.mpc.sigma_f;
                fc.load[k] = sc.load[tau] * std::max(0.0, 1.0 + s * n01(rng));
                fc.solar[k] = sc.solar[tau] * std::max(0.0, 1.0 + s * n01(rng));
                fc.wind[k] = sc.wind[tau] * std::max(0.0, 1.0 + s * n01(rng));
            }
        }
        DispatchDecision committed;
        if (with_ref) {
            const Vector w = trk.tracker->weights();
            Vector ref(H);
            SegmentSchedule sched;
            for (Index k = 0; k < H; ++k) {
                auto b = blend_reference(w, *trk.refs, t + k);
                ref[k] = b.e_h;
                sched.seg_c.push_back(b.seg_c);
                sched.seg_d.push_back(b.seg_d);
            }
            out.reference[t] = ref[0];
            committed = mpc_step(plan_spec, st, fc, H, cfg.phi, &ref, &sched);
        } else {
            committed = mpc_step(plan_spec, st, fc, H, 0.0, nullptr, nullptr);
        }
        auto real = reconcile(committed, sc.load[t], sc.renewable(t), spec, st);
        out.step_ms.push_back(ms_since(t0));
        if (with_ref) trk.tracker->observe(sc.load[t], sc.solar[t], sc.wind[t]);
        advance(st, real);
        out.committed.push_back(committed);
        out.realized.push_back(real);
    }
}

}  // namespace

RolloutResult run_rollout(const MicrogridSpec& spec, const ScenarioSeries& scenario, const MethodConfig& cfg,
                          const RolloutInputs& inputs) {
    spec.validate();
    if (scenario.size() < 1) throw std::invalid_argument("run_rollout: empty scenario");
    RolloutResult out;
    out.method = cfg.method;
    out.efficiency = cfg.efficiency;
    switch (cfg.method) {
        case Method::M0: run_m0(spec, scenario, cfg, out); break;
        case Method::M1:
        case Method::M3: run_oco(spec, scenario, cfg, inputs, out); break;
        case Method::M2:
        case Method::M4: run_mpc(spec, scenario, cfg, inputs, out); break;
    }
    const auto plan_spec = planning_spec(spec, cfg.efficiency);
    out.theoretical = totals_of(out.committed, plan_spec);
    out.practical = totals_of(out.realized, spec);
    if (out.reference.size() > 0) {
        Vector e(scenario.size());
        for (Index t = 0; t < scenario.size(); ++t) e[t] = out.realized[static_cast<std::size_t>(t)].e_h;
        out.reference_rmse_pct = 100.0 * reference_rmse(e, out.reference, spec.hydrogen.e_max);
    }
    for (double ms : out.step_ms) {
        out.mean_step_ms += ms;
        out.max_step_ms = std::max(out.max_step_ms, ms);
    }
    if (!out.step_ms.empty()) out.mean_step_ms /= static_cast<double>(out.step_ms.size());
    return out;
}

std::vector<ComparisonRow> evaluate_methods(const MicrogridSpec& spec, const ScenarioSeries& scenario,
                                            const std::vector<MethodConfig>& configs, const RolloutInputs& inputs,
                                            std::vector<RolloutResult>* rollouts) {
    if (configs.empty()) throw std::invalid_argument("evaluate_methods: no methods given");
    std::vector<RolloutResult> results(configs.size());
    std::optional<std::size_t> base;
    for (std::size_t i = 0; i < configs.size(); ++i)
        if (configs[i].method == Method::M0 && configs[i].efficiency == EfficiencyModel::E1) {
            base = i;
            break;
        }
    RolloutResult baseline;
    if (base) {
        results[*base] = run_rollout(spec, scenario, configs[*base], inputs);
    } else {
        MethodConfig m0;
        m0.offline = configs.front().offline;
        baseline = run_rollout(spec, scenario, m0, inputs);
    }
    for (std::size_t i = 0; i < configs.size(); ++i)
        if (!base || i != *base) results[i] = run_rollout(spec, scenario, configs[i], inputs);
    const RolloutResult& ref = base ? results[*base] : baseline;

    const Index T = scenario.size();
    Vector e0(T);
    std::vector<Vector> y;
    for (Index t = 0; t < T; ++t) {
        const auto& d = ref.realized[static_cast<std::size_t>(t)];
        e0[t] = d.e_h;
        y.push_back((Vector(8) << d.p_b_c, d.p_b_d, d.p_h_c, d.p_h_d, d.p_d, d.p_l, d.p_r, d.p_g).finished());
    }
    const double path = compute_regret({}, {}, y).path_length;

    std::vector<ComparisonRow> rows;
    for (const auto& r : results) {
        ComparisonRow row;
        row.method = r.method;
        row.cost_usd = r.practical.cost.total;
        row.dg_mwh = r.practical.dg_mwh;
        row.lol_mwh = r.practical.lol_mwh;
        Vector e(T);
        for (Index t = 0; t < T; ++t) e[t] = r.realized[static_cast<std::size_t>(t)].e_h;
        row.rmse_pct = 100.0 * reference_rmse(e, e0, spec.hydrogen.e_max);
        row.step_ms = r.mean_step_ms;
        row.regret_usd = r.practical.cost.total - ref.practical.cost.total;
        row.path_length = path;
        rows.push_back(row);
    }
    if (rollouts) *rollouts = std::move(results);
    return rows;
}

void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows, bool with_timing) {
    if (rows.empty()) throw std::invalid_argument("write_comparison_csv: no rows");
    os << kComparisonHeader << '\n';
    for (const auto& r : rows)
        os << to_string(r.method) << ',' << csv::fixed(r.cost_usd, 4) << ',' << csv::fixed(r.dg_mwh, 6) << ','
           << csv::fixed(r.lol_mwh, 6) << ',' << csv::fixed(r.rmse_pct, 4) << ','
           << (with_timing ? csv::fixed(r.step_ms, 3) : std::string("NA")) << '\n';
}

void write_trajectory_csv(std::ostream& os, const std::vector<DispatchDecision>& traj) {
    using csv::fmt;
    os << "t,p_b_c,p_b_d,p_h_c,p_h_d,p_d,p_l,p_r,p_g,e_b,e_h\n";
    for (std::size_t t = 0; t < traj.size(); ++t) {
        const auto& d = traj[t];
        os << t << ',' << fmt(d.p_b_c) << ',' << fmt(d.p_b_d) << ',' << fmt(d.p_h_c) << ',' << fmt(d.p_h_d) << ','
           << fmt(d.p_d) << ',' << fmt(d.p_l) << ',' << fmt(d.p_r) << ',' << fmt(d.p_g) << ',' << fmt(d.e_b) << ','
           << fmt(d.e_h) << '\n';
    }
}

}  // namespace hbes
