#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hbes/dispatch.hpp"
#include "hbes/solver.hpp"
#include "hbes/synth.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace hbes;
using hbes::testing::make_scenario;
using hbes::testing::random_scenario;

namespace {

StepState start_of(const MicrogridSpec& spec) {
    StepState st;
    st.e_b = spec.battery.e0;
    st.e_h = spec.hydrogen.e0;
    return st;
}

void check_realized(const RolloutResult& r, const MicrogridSpec& spec, const ScenarioSeries& scen) {
    REQUIRE(r.realized.size() == static_cast<std::size_t>(scen.size()));
    CHECK(validate_trajectory(r.realized, spec, scen).empty());
    for (Index t = 0; t < scen.size(); ++t) {
        const auto& d = r.realized[static_cast<std::size_t>(t)];
        CHECK(std::abs(balance_residual(d, scen.load[t])) <= 1e-9);
        CHECK(d.e_h >= spec.hydrogen.e_min - 1e-9);
        CHECK(d.e_h <= spec.hydrogen.e_max + 1e-9);
        CHECK(d.e_b >= spec.battery.e_min - 1e-9);
        CHECK(d.e_b <= spec.battery.e_max + 1e-9);
    }
    CHECK(r.practical.cost.total >= 0.0);
}

}  // namespace

TEST_CASE("method and model names") {
    CHECK(method_from_string("M3") == Method::M3);
    CHECK(std::string(to_string(Method::M4)) == "M4");
    CHECK(efficiency_from_string("E2") == EfficiencyModel::E2);
    CHECK(forecast_from_string("oracle_noise") == ForecastKind::OracleNoise);
    CHECK_THROWS(method_from_string("M5"));
    CHECK_THROWS(efficiency_from_string("E4"));
}

TEST_CASE("reconcile leaves a feasible decision unchanged") {
    auto spec = default_spec();
    std::mt19937_64 rng(17);
    const auto scen = random_scenario(rng, 6);
    const auto plan = plan_offline(spec, scen);
    StepState st = start_of(spec);
    for (Index t = 0; t < scen.size(); ++t) {
        const auto& c = plan.trajectory[static_cast<std::size_t>(t)];
        const auto r = reconcile(c, scen.load[t], scen.renewable(t), spec, st);
        CHECK(r.p_b_c == c.p_b_c);
        CHECK(r.p_h_c == c.p_h_c);
        CHECK(r.p_h_d == c.p_h_d);
        CHECK(r.p_d == c.p_d);
        CHECK(r.p_l == c.p_l);
        CHECK(r.p_r == c.p_r);
        CHECK(r.e_h == c.e_h);
        CHECK(r.e_b == c.e_b);
        st.t = t + 1;
        st.e_b = r.e_b;
        st.e_h = r.e_h;
        st.p_d_prev = r.p_d;
    }
}

TEST_CASE("reconcile exposes the optimistic charging efficiency") {
    auto truth = default_spec();
    const auto e2 = planning_spec(truth, EfficiencyModel::E2);
    const StepState st = start_of(truth);
    DispatchDecision c;
    c.p_h_c = 30.0;
    c.w_c = 1.0;
    c.p_r = 70.0;
    c.h_c = eval_piecewise(e2.hydrogen.charge_curve, 30.0);
    c.e_b = battery_soc_step(st.e_b, 0, 0, truth, 1.0);
    c.e_h = st.e_h + c.h_c;
    CHECK(c.h_c == doctest::Approx(0.63 * 30.0 / 33.33).epsilon(1e-12));

    const auto r = reconcile(c, 40.0, 70.0, truth, st);
    CHECK(r.p_h_c == 30.0);
    CHECK(std::abs(balance_residual(r, 40.0)) <= 1e-9);
    const double true_rate = eval_piecewise(truth.hydrogen.charge_curve, 30.0);
    CHECK(r.h_c == doctest::Approx(true_rate).epsilon(1e-12));
    CHECK(c.e_h - r.e_h == doctest::Approx(0.63 * 30.0 / 33.33 - true_rate).epsilon(1e-9));
    CHECK(c.e_h - r.e_h > 0.0);
}

TEST_CASE("reconcile restores balance for arbitrary commitments") {
    auto spec = default_spec();
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 2000; ++rep) {
        StepState st;
        st.t = rep % 5;
        st.e_b = spec.battery.e_max * u(rng);
        st.e_h = spec.hydrogen.e_max * (rep % 10 == 0 ? 0.0 : u(rng));
        if (rep % 3) st.p_d_prev = spec.diesel.p_max * u(rng);
        DispatchDecision c;
        c.p_b_c = 60 * u(rng) * (rep % 2);
        c.p_b_d = 60 * u(rng) * (1 - rep % 2);
        c.p_h_c = 60 * u(rng) * (rep % 4 < 2);
        c.p_h_d = 60 * u(rng) * (rep % 4 >= 2);
        c.w_c = u(rng);
        c.w_d = u(rng);
        c.p_d = 60 * u(rng);
        c.p_l = 20 * u(rng);
        c.p_r = 150 * u(rng);
        c.p_g = 10 * u(rng);
        const double load = 120 * u(rng), ren = 150 * u(rng);
        const auto r = reconcile(c, load, ren, spec, st);
        REQUIRE(std::abs(balance_residual(r, load)) <= 1e-9);
        CHECK(r.p_r <= ren + 1e-9);
        CHECK(r.p_l <= load + 1e-9);
        CHECK(r.p_g == 0.0);
        CHECK(r.e_h >= spec.hydrogen.e_min - 1e-9);
        CHECK(r.e_h <= spec.hydrogen.e_max + 1e-9);
        CHECK(r.e_b >= spec.battery.e_min - 1e-9);
        CHECK(r.e_b <= spec.battery.e_max + 1e-9);
        if (st.p_d_prev) {
            CHECK(r.p_d <= *st.p_d_prev + spec.diesel.ru + 1e-9);
            CHECK(r.p_d >= *st.p_d_prev - spec.diesel.rd - 1e-9);
        }
    }
}

TEST_CASE("M0 equals the direct MILP on a day") {
    auto spec = default_spec();
    std::mt19937_64 rng(41);
    const auto scen = random_scenario(rng, 24);
    auto hp = build_horizon_program(spec, scen, 24);
    const auto sol = solve_milp(hp.program);
    REQUIRE(sol.ok());
    MethodConfig cfg;
    cfg.method = Method::M0;
    const auto r = run_rollout(spec, scen, cfg);
    CHECK(r.theoretical.cost.total == doctest::Approx(sol.objective).epsilon(1e-9));
    // the piecewise planning model is the physics, so nothing changes in reconciliation
    CHECK(std::abs(r.practical.cost.total - r.theoretical.cost.total) <= 1e-6);
    CHECK(std::abs(r.practical.lol_mwh - r.theoretical.lol_mwh) <= 1e-9);
    check_realized(r, spec, scen);
}

TEST_CASE("receding horizon of one step is the greedy optimum") {
    auto spec = default_spec();
    std::mt19937_64 rng(5);
    const auto scen = random_scenario(rng, 8);
    StepState st = start_of(spec);
    for (Index t = 0; t < scen.size(); ++t) {
        const auto d = mpc_step(spec, st, scen.slice(t, 1), 1, 0.0, nullptr, nullptr);
        HorizonOptions o;
        o.mode = SegmentMode::Hull;
        o.terminal = false;
        o.start = t;
        o.e_b0 = st.e_b;
        o.e_h0 = st.e_h;
        o.p_d_prev = st.p_d_prev;
        auto hp = build_horizon_program(spec, scen, 1, o);
        const auto sol = solve_lp(hp.program);
        REQUIRE(sol.ok());
        CHECK(stage_cost(d, spec, spec.dt).total == doctest::Approx(sol.objective).epsilon(1e-6));
        const auto r = reconcile(d, scen.load[t], scen.renewable(t), spec, st);
        st.t = t + 1;
        st.e_b = r.e_b;
        st.e_h = r.e_h;
        st.p_d_prev = r.p_d;
    }
}

TEST_CASE("diesel covers load without renewables for every method") {
    auto spec = default_spec();
    spec.hydrogen.e0 = spec.hydrogen.e_min;  // nothing stored to drain
    std::vector<double> load, zero(48, 0.0);
    for (int t = 0; t < 48; ++t) load.push_back(20.0 + 25.0 * (t % 24 > 8 && t % 24 < 20));
    const auto scen = make_scenario(load, zero, zero, "dark");
    ScenarioLibrary lib;
    lib.add(scen);
    lib.add(make_scenario(load, zero, zero, "dark-2"));
    const auto refs = generate_offline_references(lib, spec);
    RolloutInputs in{&lib, &refs, false};
    for (Method m : {Method::M0, Method::M1, Method::M2, Method::M3, Method::M4}) {
        MethodConfig cfg;
        cfg.method = m;
        const auto r = run_rollout(spec, scen, cfg, in);
        CAPTURE(to_string(m));
        CHECK(r.practical.lol_mwh <= 1e-9);
        check_realized(r, spec, scen);
    }
}

TEST_CASE("all methods produce physically valid trajectories") {
    auto spec = default_spec();
    SynthOptions so;
    so.steps = 96;
    ScenarioLibrary lib;
    lib.add(synthetic_year(11, so));
    lib.add(synthetic_year(12, so));
    const auto refs = generate_offline_references(lib, spec);
    const auto scen = synthetic_year(7, so);
    RolloutInputs in{&lib, &refs, true};
    for (Method m : {Method::M0, Method::M1, Method::M2, Method::M3, Method::M4}) {
        for (EfficiencyModel e : {EfficiencyModel::E1, EfficiencyModel::E3}) {
            MethodConfig cfg;
            cfg.method = m;
            cfg.efficiency = e;
            const auto r = run_rollout(spec, scen, cfg, in);
            CAPTURE(to_string(m));
            CAPTURE(to_string(e));
            check_realized(r, spec, scen);
            CHECK(r.step_ms.size() == static_cast<std::size_t>(scen.size()));
            if (m == Method::M1 || m == Method::M3) CHECK(r.trace.size() == static_cast<std::size_t>(scen.size()));
            if (cfg.uses_reference()) CHECK(r.reference.size() == scen.size());
        }
    }
}

TEST_CASE("heavy tracking weight follows a feasible reference") {
    auto spec = default_spec();
    SynthOptions so;
    so.steps = 72;
    const auto scen = synthetic_year(7, so);
    ScenarioLibrary lib;
    lib.add(scen);
    const auto refs = generate_offline_references(lib, spec);
    RolloutInputs in{&lib, &refs, false};
    for (Method m : {Method::M1, Method::M2}) {
        MethodConfig cfg;
        cfg.method = m;
        cfg.phi = 1e9;
        const auto r = run_rollout(spec, scen, cfg, in);
        CAPTURE(to_string(m));
        CHECK(r.reference_rmse_pct <= 1.0);
    }
}

TEST_CASE("forecast noise does not lower the mean cost") {
    auto spec = default_spec();
    SynthOptions so;
    so.steps = 48;
    const auto scen = synthetic_year(7, so);
    auto mean_cost = [&](double sigma_f) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            MethodConfig cfg;
            cfg.method = Method::M4;
            cfg.mpc.forecast = ForecastKind::OracleNoise;
            cfg.mpc.sigma_f = sigma_f;
            cfg.mpc.seed = seed;
            sum += run_rollout(spec, scen, cfg).practical.cost.total;
        }
        return sum / 10.0;
    };
    const double c0 = mean_cost(0.0), c1 = mean_cost(0.3), c2 = mean_cost(0.8);
    CHECK(c0 <= c1 + 1e-6);
    CHECK(c1 <= c2 + 1e-6);
}

TEST_CASE("comparison table schema and regret bookkeeping") {
    auto spec = default_spec();
    SynthOptions so;
    so.steps = 48;
    ScenarioLibrary lib;
    lib.add(synthetic_year(11, so));
    const auto refs = generate_offline_references(lib, spec);
    const auto scen = synthetic_year(7, so);
    std::vector<MethodConfig> cfgs;
    for (Method m : {Method::M1, Method::M0, Method::M4}) {
        MethodConfig c;
        c.method = m;
        cfgs.push_back(c);
    }
    std::vector<RolloutResult> rolls;
    const auto rows = evaluate_methods(spec, scen, cfgs, {&lib, &refs, false}, &rolls);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].method == Method::M1);
    CHECK(rows[1].method == Method::M0);
    CHECK(rows[2].method == Method::M4);
    CHECK(rows[1].regret_usd == 0.0);
    CHECK(rows[1].rmse_pct == 0.0);
    CHECK(rows[0].regret_usd == doctest::Approx(rows[0].cost_usd - rows[1].cost_usd));
    CHECK(rows[0].cost_usd == doctest::Approx(rolls[0].practical.cost.total));

    std::ostringstream os;
    write_comparison_csv(os, rows, false);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "method,cost_usd,dg_mwh,lol_mwh,rmse_pct,step_ms");
    std::getline(is, line);
    CHECK(line.rfind("M1,", 0) == 0);
    CHECK(line.substr(line.size() - 3) == ",NA");

    std::ostringstream tr;
    write_trajectory_csv(tr, rolls[1].realized);
    CHECK(tr.str().rfind("t,p_b_c,p_b_d,p_h_c,p_h_d,p_d,p_l,p_r,p_g,e_b,e_h\n", 0) == 0);
}

TEST_CASE("rollouts are deterministic") {
    auto spec = default_spec();
    SynthOptions so;
    so.steps = 48;
    ScenarioLibrary lib;
    lib.add(synthetic_year(11, so));
    const auto refs = generate_offline_references(lib, spec);
    const auto scen = synthetic_year(7, so);
    for (Method m : {Method::M1, Method::M2}) {
        MethodConfig cfg;
        cfg.method = m;
        cfg.mpc.forecast = ForecastKind::OracleNoise;
        cfg.mpc.sigma_f = 0.2;
        cfg.mpc.seed = 3;
        const auto a = run_rollout(spec, scen, cfg, {&lib, &refs, true});
        const auto b = run_rollout(spec, scen, cfg, {&lib, &refs, true});
        std::ostringstream sa, sb;
        write_trajectory_csv(sa, a.realized);
        write_trajectory_csv(sb, b.realized);
        CHECK(sa.str() == sb.str());
        CHECK(a.trace == b.trace);
    }
}

TEST_CASE("rollout preconditions") {
    auto spec = default_spec();
    const auto scen = make_scenario({10, 10}, {0, 0}, {0, 0});
    MethodConfig cfg;
    cfg.method = Method::M1;
    CHECK_THROWS(run_rollout(spec, scen, cfg));
}
