#include "hbes/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hbes {

void MicrogridSpec::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("microgrid spec: ") + what);
    };
    const auto& b = battery;
    need(b.e_min <= b.e0 && b.e0 <= b.e_max, "battery e0 outside [e_min, e_max]");
    need(b.eta_c > 0 && b.eta_c <= 1 && b.eta_d > 0 && b.eta_d <= 1, "battery efficiencies must be in (0,1]");
    need(b.eps >= 0 && b.p_max >= 0, "battery eps and p_max must be non-negative");
    const auto& h = hydrogen;
    need(h.e_min <= h.e0 && h.e0 <= h.e_max, "hydrogen e0 outside [e_min, e_max]");
    need(h.p_max > 0, "hydrogen p_max must be positive");
    need(!h.charge_curve.segments.empty() && !h.discharge_curve.segments.empty(), "hydrogen curves are missing");
    h.charge_curve.validate();
    h.discharge_curve.validate();
    need(h.charge_curve.direction == Direction::Charging, "charge curve has the wrong direction");
    need(h.discharge_curve.direction == Direction::Discharging, "discharge curve has the wrong direction");
    need(h.charge_curve.p_min() <= h.p_max, "charge curve starts above p_max");
    need((h.hydrogen_load.array() >= 0).all(), "hydrogen load must be non-negative");
    need(diesel.p_min >= 0 && diesel.p_min <= diesel.p_max, "diesel bounds");
    need(diesel.rd >= 0 && diesel.ru >= 0, "diesel ramps must be non-negative");
    need((grid_import_cap.array() >= 0).all(), "grid import cap must be non-negative");
    need(prices.c_L >= 0 && prices.c_D >= 0 && prices.c_B >= 0 && prices.c_H >= 0, "prices must be non-negative");
    need(allow_price_inversion || prices.c_B < prices.c_H, "c_B must be below c_H (set allow_price_inversion)");
    need(dt > 0, "dt must be positive");
}

MicrogridSpec default_spec() {
    MicrogridSpec s;
    s.hydrogen.charge_curve = default_charge_fit().curve;
    s.hydrogen.discharge_curve = default_discharge_fit().curve;
    s.hydrogen.e0 = 0.5 * s.hydrogen.e_max;
    s.battery.e0 = 0.5 * s.battery.e_max;
    return s;
}

double ScenarioSeries::dt_hours() const {
    if (timestamps.size() < 2) return 1.0;
    return static_cast<double>(timestamps[1] - timestamps[0]) / 3600.0;
}

ScenarioSeries ScenarioSeries::slice(Index start, Index len) const {
    if (start < 0 || len < 0 || start + len > size()) throw std::out_of_range("scenario slice out of range");
    ScenarioSeries s;
    s.label = label;
    s.timestamps.assign(timestamps.begin() + start, timestamps.begin() + start + len);
    s.load = load.segment(start, len);
    s.solar = solar.segment(start, len);
    s.wind = wind.segment(start, len);
    if (grid.size() > 0) s.grid = grid.segment(start, len);
    return s;
}

void ScenarioSeries::validate() const {
    const Index n = size();
    if (solar.size() != n || wind.size() != n || static_cast<Index>(timestamps.size()) != n ||
        (grid.size() != 0 && grid.size() != n))
        throw std::invalid_argument("scenario: channels have unequal lengths");
    for (Index t = 0; t < n; ++t)
        if (!(load[t] >= 0 && solar[t] >= 0 && wind[t] >= 0))
            throw std::invalid_argument("scenario: negative or NaN value at step " + std::to_string(t));
    if (n >= 2) {
        const auto step = timestamps[1] - timestamps[0];
        if (step <= 0) throw std::invalid_argument("scenario: timestamps must be strictly increasing");
        for (std::size_t k = 1; k < timestamps.size(); ++k)
            if (timestamps[k] - timestamps[k - 1] != step)
                throw std::invalid_argument("scenario: timestamps are not uniformly spaced at step " + std::to_string(k));
    }
}

CostBreakdown& CostBreakdown::operator+=(const CostBreakdown& o) {
    c_L += o.c_L;
    c_D += o.c_D;
    c_B += o.c_B;
    c_H += o.c_H;
    total += o.total;
    return *this;
}

double battery_soc_step(double e, double p_c, double p_d, const MicrogridSpec& spec, double dt) {
    const auto& b = spec.battery;
    return (1.0 - b.eps * dt) * e + dt * (b.eta_c * p_c - p_d / b.eta_d);
}

double hydrogen_soc_step(double e, double h_c, double h_d, double h_load, double dt) {
    return e + dt * (h_c - h_d) - h_load;
}

CostBreakdown stage_cost(const DispatchDecision& x, const MicrogridSpec& spec, double dt) {
    CostBreakdown c;
    c.c_L = spec.prices.c_L * x.p_l * dt;
    c.c_D = spec.prices.c_D * x.p_d * dt;
    c.c_B = spec.prices.c_B * x.p_b_d * dt;
    c.c_H = spec.prices.c_H * x.p_h_d * dt;
    c.total = c.c_L + c.c_D + c.c_B + c.c_H;
    return c;
}

double duty_rate(const PiecewiseCurve& curve, double p, double w) {
    if (w <= 0.0 || p <= 0.0) return 0.0;
    const double level = std::clamp(p / w, curve.p_min(), curve.p_max());
    return w * eval_piecewise(curve, level);
}

double balance_residual(const DispatchDecision& x, double load) {
    return x.p_g + x.p_r + x.p_d + x.p_b_d - x.p_b_c + x.p_h_d - x.p_h_c + x.p_l - load;
}

namespace {

using Terms = std::vector<ProgramBuilder::Term>;

std::string tag(const char* name, Index t) { return std::string(name) + "[" + std::to_string(t) + "]"; }

}  // namespace

HorizonProgram build_horizon_program(const MicrogridSpec& spec, const ScenarioSeries& scenario, Index horizon,
                                     const HorizonOptions& opt) {
    spec.validate();
    if (horizon < 1) throw std::invalid_argument("build_horizon_program: horizon must be at least 1");
    if (opt.start < 0 || opt.start + horizon > scenario.size())
        throw std::invalid_argument("build_horizon_program: horizon exceeds the scenario length");
    if (scenario.solar.size() != scenario.size() || scenario.wind.size() != scenario.size())
        throw std::invalid_argument("build_horizon_program: scenario channels have unequal lengths");
    const auto& B = spec.battery;
    const auto& H = spec.hydrogen;
    const double e_b0 = opt.e_b0.value_or(B.e0);
    const double e_h0 = opt.e_h0.value_or(H.e0);
    if (e_b0 < B.e_min - 1e-9 || e_b0 > B.e_max + 1e-9) throw std::invalid_argument("initial battery SoC outside bounds");
    if (e_h0 < H.e_min - 1e-9 || e_h0 > H.e_max + 1e-9) throw std::invalid_argument("initial hydrogen SoC outside bounds");
    if (opt.mode == SegmentMode::Fixed &&
        (static_cast<Index>(opt.schedule.seg_c.size()) < horizon || static_cast<Index>(opt.schedule.seg_d.size()) < horizon))
        throw std::invalid_argument("build_horizon_program: segment schedule shorter than the horizon");
    if (opt.soc_penalty && opt.soc_penalty->reference.size() < horizon)
        throw std::invalid_argument("build_horizon_program: SoC reference shorter than the horizon");

    const auto& cc = H.charge_curve.segments;
    const auto& dc = H.discharge_curve.segments;
    const Index Kc = static_cast<Index>(cc.size()), Kd = static_cast<Index>(dc.size());
    const double dt = spec.dt;
    const auto& P = spec.prices;

    ProgramBuilder b;
    HorizonProgram hp;
    hp.horizon = horizon;
    hp.start = opt.start;
    hp.steps.reserve(static_cast<std::size_t>(horizon));

    for (Index t = 0; t < horizon; ++t) {
        const Index a = opt.start + t;
        const Index as = (opt.spec_start >= 0 ? opt.spec_start : opt.start) + t;
        const bool last = t == horizon - 1;
        StepVars v;
        v.p_b_c = b.add_var(tag("p_b_c", t), 0, B.p_max);
        v.p_b_d = b.add_var(tag("p_b_d", t), 0, B.p_max, P.c_B * dt);
        v.p_h_c = b.add_var(tag("p_h_c", t), 0, H.p_max);
        v.p_h_d = b.add_var(tag("p_h_d", t), 0, H.p_max, P.c_H * dt);
        v.p_d = b.add_var(tag("p_d", t), spec.diesel.p_min, spec.diesel.p_max, P.c_D * dt);
        const double l_hi = opt.exogenous_rows ? scenario.load[a] : spec.capacities.load;
        const double r_hi = opt.exogenous_rows ? scenario.renewable(a) : spec.capacities.solar + spec.capacities.wind;
        v.p_l = b.add_var(tag("p_l", t), 0, l_hi, P.c_L * dt);
        v.p_r = b.add_var(tag("p_r", t), 0, r_hi);
        v.p_g = b.add_var(tag("p_g", t), 0, spec.grid_cap(as));
        const double eb_lo = (last && opt.terminal) ? std::max(B.e_min, e_b0) : B.e_min;
        const double eh_lo = (last && opt.terminal) ? std::max(H.e_min, e_h0) : H.e_min;
        v.e_b = b.add_var(tag("e_b", t), eb_lo, B.e_max);
        v.e_h = b.add_var(tag("e_h", t), eh_lo, H.e_max);

        auto add_segments = [&](const std::vector<Segment>& segs, const char* pn, const char* wn, std::vector<Index>& pv,
                                std::vector<Index>& wv, int fixed) {
            for (Index k = 0; k < static_cast<Index>(segs.size()); ++k) {
                const bool off = opt.mode == SegmentMode::Fixed && k != fixed;
                const double hi = std::min(segs[static_cast<std::size_t>(k)].p_hi, H.p_max);
                pv.push_back(b.add_var(tag(pn, t) + std::to_string(k), 0, off ? 0.0 : hi));
                wv.push_back(b.add_var(tag(wn, t) + std::to_string(k), 0, off ? 0.0 : 1.0));
            }
        };
        const int fc = opt.mode == SegmentMode::Fixed ? opt.schedule.seg_c[static_cast<std::size_t>(t)] : -1;
        const int fd = opt.mode == SegmentMode::Fixed ? opt.schedule.seg_d[static_cast<std::size_t>(t)] : -1;
        if (opt.mode == SegmentMode::Fixed && (fc < 0 || fc >= Kc || fd < 0 || fd >= Kd))
            throw std::invalid_argument("build_horizon_program: segment index out of range at step " + std::to_string(t));
        add_segments(cc, "pc", "wc", v.pc, v.wc, fc);
        add_segments(dc, "pd", "wd", v.pd, v.wd, fd);
        if (opt.mode == SegmentMode::Binary) {
            for (Index k = 0; k < Kc; ++k) v.zc.push_back(b.add_var(tag("zc", t) + std::to_string(k), 0, 1, 0, true));
            for (Index k = 0; k < Kd; ++k) v.zd.push_back(b.add_var(tag("zd", t) + std::to_string(k), 0, 1, 0, true));
        }

        // Battery: e_t - (1 - eps dt) e_{t-1} - dt eta_c p_c + dt p_d / eta_d = 0
        {
            Terms r{{v.e_b, 1.0}, {v.p_b_c, -dt * B.eta_c}, {v.p_b_d, dt / B.eta_d}};
            double rhs = 0.0;
            if (t == 0) rhs = (1.0 - B.eps * dt) * e_b0;
            else r.push_back({hp.steps.back().e_b, -(1.0 - B.eps * dt)});
            b.add_eq(r, rhs, tag("bat", t));
        }
        // Hydrogen: e_t - e_{t-1} - dt sum(A p + B w) + dt sum(C p + D w) = -load
        {
            Terms r{{v.e_h, 1.0}};
            for (Index k = 0; k < Kc; ++k) {
                r.push_back({v.pc[static_cast<std::size_t>(k)], -dt * cc[static_cast<std::size_t>(k)].slope});
                r.push_back({v.wc[static_cast<std::size_t>(k)], -dt * cc[static_cast<std::size_t>(k)].intercept});
            }
            for (Index k = 0; k < Kd; ++k) {
                r.push_back({v.pd[static_cast<std::size_t>(k)], dt * dc[static_cast<std::size_t>(k)].slope});
                r.push_back({v.wd[static_cast<std::size_t>(k)], dt * dc[static_cast<std::size_t>(k)].intercept});
            }
            double rhs = -spec.hydrogen_load(as);
            if (t == 0) rhs += e_h0;
            else r.push_back({hp.steps.back().e_h, -1.0});
            b.add_eq(r, rhs, tag("h2", t));
        }
        // Balance: p_g + p_r + p_d + p_b_d - p_b_c + p_h_d - p_h_c + p_l = load
        if (opt.exogenous_rows)
            b.add_eq({{v.p_g, 1}, {v.p_r, 1}, {v.p_d, 1}, {v.p_b_d, 1}, {v.p_b_c, -1}, {v.p_h_d, 1}, {v.p_h_c, -1}, {v.p_l, 1}},
                     scenario.load[a], tag("bal", t));
        // Segment power sums.
        {
            Terms rc{{v.p_h_c, 1.0}}, rd{{v.p_h_d, 1.0}};
            for (Index j : v.pc) rc.push_back({j, -1.0});
            for (Index j : v.pd) rd.push_back({j, -1.0});
            b.add_eq(rc, 0.0, tag("sumc", t));
            b.add_eq(rd, 0.0, tag("sumd", t));
        }
        // Segment power windows lo w <= p <= hi w.
        auto windows = [&](const std::vector<Segment>& segs, const std::vector<Index>& pv, const std::vector<Index>& wv,
                           const char* nm) {
            for (std::size_t k = 0; k < segs.size(); ++k) {
                const double hi = std::min(segs[k].p_hi, H.p_max);
                b.add_le({{pv[k], 1.0}, {wv[k], -hi}}, 0.0, tag(nm, t) + "hi" + std::to_string(k));
                b.add_le({{pv[k], -1.0}, {wv[k], segs[k].p_lo}}, 0.0, tag(nm, t) + "lo" + std::to_string(k));
            }
        };
        windows(cc, v.pc, v.wc, "winc");
        windows(dc, v.pd, v.wd, "wind");
        if (opt.mode == SegmentMode::Binary) {
            Terms oc, od;
            for (Index k = 0; k < Kc; ++k) {
                b.add_le({{v.wc[static_cast<std::size_t>(k)], 1.0}, {v.zc[static_cast<std::size_t>(k)], -1.0}}, 0.0,
                         tag("linkc", t) + std::to_string(k));
                oc.push_back({v.zc[static_cast<std::size_t>(k)], 1.0});
            }
            for (Index k = 0; k < Kd; ++k) {
                b.add_le({{v.wd[static_cast<std::size_t>(k)], 1.0}, {v.zd[static_cast<std::size_t>(k)], -1.0}}, 0.0,
                         tag("linkd", t) + std::to_string(k));
                od.push_back({v.zd[static_cast<std::size_t>(k)], 1.0});
            }
            b.add_eq(oc, 1.0, tag("onehotc", t));
            b.add_eq(od, 1.0, tag("onehotd", t));
        } else if (opt.mode == SegmentMode::Hull) {
            Terms sc, sd;
            for (Index j : v.wc) sc.push_back({j, 1.0});
            for (Index j : v.wd) sd.push_back({j, 1.0});
            b.add_le(sc, 1.0, tag("dutyc", t));
            b.add_le(sd, 1.0, tag("dutyd", t));
        }
        // Diesel ramps.
        if (t > 0) {
            const Index prev = hp.steps.back().p_d;
            b.add_le({{v.p_d, 1.0}, {prev, -1.0}}, spec.diesel.ru, tag("rampu", t));
            b.add_le({{v.p_d, -1.0}, {prev, 1.0}}, spec.diesel.rd, tag("rampd", t));
        } else if (opt.p_d_prev) {
            b.add_le({{v.p_d, 1.0}}, *opt.p_d_prev + spec.diesel.ru, tag("rampu", t));
            b.add_le({{v.p_d, -1.0}}, spec.diesel.rd - *opt.p_d_prev, tag("rampd", t));
        }
        // SoC tracking penalty phi (e - ref)^2.
        if (opt.soc_penalty && opt.soc_penalty->phi > 0) {
            const double phi = opt.soc_penalty->phi;
            const double ref = opt.soc_penalty->reference[t];
            b.add_quadratic(v.e_h, 2.0 * phi);
            b.add_cost(v.e_h, -2.0 * phi * ref);
            b.add_offset(phi * ref * ref);
        }
        hp.steps.push_back(std::move(v));
    }
    hp.program = b.build();
    return hp;
}

std::vector<DispatchDecision> extract_trajectory(const HorizonProgram& hp, const MicrogridSpec& spec, const Vector& x) {
    const auto& cc = spec.hydrogen.charge_curve.segments;
    const auto& dc = spec.hydrogen.discharge_curve.segments;
    std::vector<DispatchDecision> out;
    out.reserve(hp.steps.size());
    for (const auto& v : hp.steps) {
        DispatchDecision d;
        auto pos = [&](Index j) { return std::max(x[j], 0.0); };
        d.p_b_c = pos(v.p_b_c);
        d.p_b_d = pos(v.p_b_d);
        d.p_h_c = pos(v.p_h_c);
        d.p_h_d = pos(v.p_h_d);
        d.p_d = pos(v.p_d);
        d.p_l = pos(v.p_l);
        d.p_r = pos(v.p_r);
        d.p_g = pos(v.p_g);
        d.e_b = x[v.e_b];
        d.e_h = x[v.e_h];
        double best = -1.0;
        for (std::size_t k = 0; k < v.wc.size(); ++k) {
            d.h_c += cc[k].slope * x[v.pc[k]] + cc[k].intercept * x[v.wc[k]];
            if (x[v.wc[k]] > best + 1e-9) {
                best = x[v.wc[k]];
                d.seg_c = static_cast<int>(k);
            }
        }
        d.w_c = std::clamp(best, 0.0, 1.0);
        best = -1.0;
        for (std::size_t k = 0; k < v.wd.size(); ++k) {
            d.h_d += dc[k].slope * x[v.pd[k]] + dc[k].intercept * x[v.wd[k]];
            if (x[v.wd[k]] > best + 1e-9) {
                best = x[v.wd[k]];
                d.seg_d = static_cast<int>(k);
            }
        }
        d.w_d = std::clamp(best, 0.0, 1.0);
        out.push_back(d);
    }
    return out;
}

SegmentSchedule schedule_of(const std::vector<DispatchDecision>& traj) {
    SegmentSchedule s;
    for (const auto& d : traj) {
        s.seg_c.push_back(d.seg_c);
        s.seg_d.push_back(d.seg_d);
    }
    return s;
}

std::vector<Violation> validate_trajectory(const std::vector<DispatchDecision>& traj, const MicrogridSpec& spec,
                                           const ScenarioSeries& scenario, const ValidateOptions& opt) {
    std::vector<Violation> out;
    const double tol = opt.tol;
    const auto& B = spec.battery;
    const auto& H = spec.hydrogen;
    const double dt = spec.dt;
    auto flag = [&](Index t, const std::string& what, double residual) {
        if (std::abs(residual) > tol) out.push_back({t, what, residual});
    };
    auto upper = [&](Index t, const std::string& what, double v, double hi) {
        if (v > hi + tol) out.push_back({t, what, v - hi});
    };
    auto lower = [&](Index t, const std::string& what, double v, double lo) {
        if (v < lo - tol) out.push_back({t, what, v - lo});
    };
    if (opt.start + static_cast<Index>(traj.size()) > scenario.size())
        throw std::invalid_argument("validate_trajectory: trajectory longer than the scenario slice");

    double eb = opt.e_b0.value_or(B.e0), eh = opt.e_h0.value_or(H.e0);
    const double eb0 = eb, eh0 = eh;
    std::optional<double> pd_prev = opt.p_d_prev;
    for (Index t = 0; t < static_cast<Index>(traj.size()); ++t) {
        const auto& x = traj[static_cast<std::size_t>(t)];
        const Index a = opt.start + t;
        for (auto [name, v] : {std::pair{"p_b_c", x.p_b_c}, {"p_b_d", x.p_b_d}, {"p_h_c", x.p_h_c}, {"p_h_d", x.p_h_d},
                               {"p_d", x.p_d}, {"p_l", x.p_l}, {"p_r", x.p_r}, {"p_g", x.p_g}})
            lower(t, std::string("nonneg:") + name, v, 0.0);
        upper(t, "battery_power:c", x.p_b_c, B.p_max);
        upper(t, "battery_power:d", x.p_b_d, B.p_max);
        upper(t, "hydrogen_power:c", x.p_h_c, H.p_max);
        upper(t, "hydrogen_power:d", x.p_h_d, H.p_max);
        flag(t, "battery_dynamics", x.e_b - battery_soc_step(eb, x.p_b_c, x.p_b_d, spec, dt));
        flag(t, "hydrogen_dynamics", x.e_h - hydrogen_soc_step(eh, x.h_c, x.h_d, spec.hydrogen_load(a), dt));
        lower(t, "battery_soc", x.e_b, B.e_min);
        upper(t, "battery_soc", x.e_b, B.e_max);
        lower(t, "hydrogen_soc", x.e_h, H.e_min);
        upper(t, "hydrogen_soc", x.e_h, H.e_max);
        if (opt.check_curves) {
            const auto& cc = H.charge_curve;
            const auto& dc = H.discharge_curve;
            if (x.p_h_c > tol) {
                const auto& s = cc.segments.at(static_cast<std::size_t>(x.seg_c));
                lower(t, "charge_window", x.p_h_c, s.p_lo * x.w_c);
                upper(t, "charge_window", x.p_h_c, s.p_hi * x.w_c);
                flag(t, "charge_curve", x.h_c - (s.slope * x.p_h_c + s.intercept * x.w_c));
            } else {
                flag(t, "charge_curve", x.h_c - (x.w_c > 0 ? cc.segments.at(static_cast<std::size_t>(x.seg_c)).intercept * x.w_c : 0.0));
            }
            if (x.p_h_d > tol) {
                const auto& s = dc.segments.at(static_cast<std::size_t>(x.seg_d));
                lower(t, "discharge_window", x.p_h_d, s.p_lo * x.w_d);
                upper(t, "discharge_window", x.p_h_d, s.p_hi * x.w_d);
                flag(t, "discharge_curve", x.h_d - (s.slope * x.p_h_d + s.intercept * x.w_d));
            } else {
                flag(t, "discharge_curve", x.h_d - (x.w_d > 0 ? dc.segments.at(static_cast<std::size_t>(x.seg_d)).intercept * x.w_d : 0.0));
            }
        }
        lower(t, "diesel_power", x.p_d, spec.diesel.p_min);
        upper(t, "diesel_power", x.p_d, spec.diesel.p_max);
        if (pd_prev) {
            upper(t, "diesel_ramp_up", x.p_d - *pd_prev, spec.diesel.ru);
            lower(t, "diesel_ramp_down", x.p_d - *pd_prev, -spec.diesel.rd);
        }
        upper(t, "load_curtailment", x.p_l, scenario.load[a]);
        upper(t, "renewable", x.p_r, scenario.renewable(a));
        upper(t, "feeder", x.p_g, spec.grid_cap(a));
        flag(t, "balance", balance_residual(x, scenario.load[a]));
        eb = x.e_b;
        eh = x.e_h;
        pd_prev = x.p_d;
    }
    if (opt.terminal && !traj.empty()) {
        const Index last = static_cast<Index>(traj.size()) - 1;
        lower(last, "battery_terminal", eb, eb0);
        lower(last, "hydrogen_terminal", eh, eh0);
    }
    return out;
}

}  // namespace hbes
