#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hbes/grid.hpp"
#include "hbes/solver.hpp"

#include <cmath>
#include <random>

using namespace hbes;

namespace {

ScenarioSeries make_scenario(const std::vector<double>& load, const std::vector<double>& solar,
                             const std::vector<double>& wind) {
    ScenarioSeries s;
    const auto n = static_cast<Index>(load.size());
    s.load = Eigen::Map<const Vector>(load.data(), n);
    s.solar = Eigen::Map<const Vector>(solar.data(), n);
    s.wind = Eigen::Map<const Vector>(wind.data(), n);
    for (Index t = 0; t < n; ++t) s.timestamps.push_back(1700000000 + 3600 * t);
    return s;
}

ScenarioSeries random_scenario(std::mt19937_64& rng, Index n) {
    std::uniform_real_distribution<double> L(10, 90), R(0, 120);
    std::vector<double> l, s, w;
    for (Index t = 0; t < n; ++t) {
        l.push_back(L(rng));
        s.push_back(0.5 * R(rng));
        w.push_back(0.5 * R(rng));
    }
    return make_scenario(l, s, w);
}

}  // namespace

TEST_CASE("battery step hand values") {
    auto spec = default_spec();
    spec.battery.eps = 0.0;
    CHECK(battery_soc_step(50, 0, 0, spec, 1) == 50);
    CHECK(battery_soc_step(50, 10, 0, spec, 1) == doctest::Approx(59).epsilon(1e-12));

    spec.battery.eps = 0.01 / 720.0;
    double e = 100.0, prod = 1.0;
    for (int k = 0; k < 720; ++k) {
        e = battery_soc_step(e, 0, 0, spec, 1);
        prod *= 1.0 - spec.battery.eps;
    }
    CHECK(std::abs(e / 100.0 - prod) <= 1e-4 * prod);
    CHECK(1.0 - e / 100.0 == doctest::Approx(0.01).epsilon(0.01));
}

TEST_CASE("battery telescoping without self-discharge") {
    auto spec = default_spec();
    spec.battery.eps = 0.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 5);
    double e = 20.0, sc = 0.0, sd = 0.0;
    for (int k = 0; k < 50; ++k) {
        const double pc = u(rng), pd = u(rng);
        e = battery_soc_step(e, pc, pd, spec, 0.5);
        sc += pc;
        sd += pd;
    }
    CHECK(e == doctest::Approx(20.0 + 0.5 * (0.9 * sc - sd / 0.9)).epsilon(1e-12));
}

TEST_CASE("hydrogen step hand values") {
    CHECK(hydrogen_soc_step(100, 0, 0, 0, 1) == 100);
    CHECK(hydrogen_soc_step(100, 3.761, 0, 0, 1) == doctest::Approx(103.761).epsilon(1e-14));
    CHECK(hydrogen_soc_step(5, 1, 0, 7, 1) < 0);
}

TEST_CASE("stage cost hand values and linearity") {
    auto spec = default_spec();
    DispatchDecision x;
    CHECK(stage_cost(x, spec, 1).total == 0);
    x.p_l = 2;
    CHECK(stage_cost(x, spec, 0.25).c_L == doctest::Approx(2.5));
    DispatchDecision y;
    y.p_b_d = y.p_h_d = 10;
    auto c = stage_cost(y, spec, 1);
    CHECK(c.c_B + c.c_H == doctest::Approx(0.5));
    y.p_d = 3;
    y.p_l = 1;
    auto c1 = stage_cost(y, spec, 1);
    DispatchDecision z = y;
    z.p_b_d *= 2.5;
    z.p_h_d *= 2.5;
    z.p_d *= 2.5;
    z.p_l *= 2.5;
    CHECK(stage_cost(z, spec, 1).total == doctest::Approx(2.5 * c1.total));
    CHECK(c1.total == doctest::Approx(c1.c_L + c1.c_D + c1.c_B + c1.c_H));
}

TEST_CASE("spec invariants") {
    auto spec = default_spec();
    CHECK_NOTHROW(spec.validate());
    CHECK(spec.battery.e_max == 100.0);
    spec.hydrogen.e0 = spec.hydrogen.e_max + 1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    auto scen = make_scenario({10}, {0}, {0});
    CHECK_THROWS_AS(build_horizon_program(spec, scen, 1), std::invalid_argument);

    auto s2 = default_spec();
    s2.prices.c_B = 0.05;
    CHECK_THROWS_AS(s2.validate(), std::invalid_argument);
    s2.allow_price_inversion = true;
    CHECK_NOTHROW(s2.validate());
    s2.dt = 0;
    CHECK_THROWS_AS(s2.validate(), std::invalid_argument);
}

TEST_CASE("scenario validation") {
    auto s = make_scenario({1, 2, 3}, {0, 0, 0}, {0, 0, 0});
    CHECK_NOTHROW(s.validate());
    CHECK(s.dt_hours() == 1.0);
    auto bad = s;
    bad.timestamps[2] += 60;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s;
    bad.solar[1] = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    auto sl = s.slice(1, 2);
    CHECK(sl.size() == 2);
    CHECK(sl.load[0] == 2);
    CHECK_THROWS(s.slice(2, 2));
}

TEST_CASE("program census for one step with 2+2 segments") {
    auto spec = default_spec();
    REQUIRE(spec.hydrogen.charge_curve.size() == 2);
    REQUIRE(spec.hydrogen.discharge_curve.size() == 2);
    auto scen = make_scenario({40}, {10}, {5});
    const Index K = 4;

    auto bin = build_horizon_program(spec, scen, 1).program;
    CHECK(bin.num_vars() == 10 + 2 * K + K);
    CHECK(bin.num_binaries() == K);
    CHECK(bin.num_eq() == 5 + 2);
    CHECK(bin.num_in() == 2 * K + K);

    HorizonOptions hull;
    hull.mode = SegmentMode::Hull;
    auto h = build_horizon_program(spec, scen, 1, hull).program;
    CHECK(h.num_vars() == 10 + 2 * K);
    CHECK(h.num_binaries() == 0);
    CHECK(h.num_eq() == 5);
    CHECK(h.num_in() == 2 * K + 2);

    HorizonOptions fx;
    fx.mode = SegmentMode::Fixed;
    fx.schedule = {{1}, {0}};
    auto f = build_horizon_program(spec, scen, 1, fx).program;
    CHECK(f.num_binaries() == 0);
    CHECK(f.num_in() == 2 * K);

    // Three steps add two ramp rows per step after the first.
    auto scen3 = make_scenario({40, 41, 42}, {0, 0, 0}, {0, 0, 0});
    auto b3 = build_horizon_program(spec, scen3, 3).program;
    CHECK(b3.num_in() == 3 * (3 * K) + 2 * 2);
    CHECK(b3.num_eq() == 3 * 7);
}

TEST_CASE("island mode keeps grid import at zero") {
    auto spec = default_spec();
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        auto scen = random_scenario(rng, 3);
        scen.load.array() += 60.0;  // scarcity makes import attractive if allowed
        auto hp = build_horizon_program(spec, scen, 3);
        for (const auto& v : hp.steps) CHECK(hp.program.ub[v.p_g] == 0.0);
        auto sol = solve_milp(hp.program);
        REQUIRE(sol.ok());
        for (const auto& d : extract_trajectory(hp, spec, sol.x)) CHECK(d.p_g == 0.0);
    }
    spec.grid_import_cap = Vector::Constant(3, 20.0);
    auto scen = make_scenario({150, 150, 150}, {0, 0, 0}, {0, 0, 0});
    auto hp = build_horizon_program(spec, scen, 3);
    auto sol = solve_milp(hp.program);
    REQUIRE(sol.ok());
    for (const auto& d : extract_trajectory(hp, spec, sol.x)) CHECK(d.p_g == doctest::Approx(20.0));
}

TEST_CASE("MILP optimum equals enumeration over segment schedules") {
    auto spec = default_spec();
    std::mt19937_64 rng(2024);
    const Index T = 4;
    for (int rep = 0; rep < 3; ++rep) {
        auto scen = random_scenario(rng, T);
        auto hp = build_horizon_program(spec, scen, T);
        auto sol = solve_milp(hp.program);
        REQUIRE(sol.ok());

        double best = kInf;
        const int leaves = 1 << (2 * T);
        for (int code = 0; code < leaves; ++code) {
            HorizonOptions o;
            o.mode = SegmentMode::Fixed;
            for (Index t = 0; t < T; ++t) {
                o.schedule.seg_c.push_back((code >> (2 * t)) & 1);
                o.schedule.seg_d.push_back((code >> (2 * t + 1)) & 1);
            }
            auto leaf = solve_lp(build_horizon_program(spec, scen, T, o).program);
            if (leaf.ok()) best = std::min(best, leaf.objective);
        }
        CHECK(sol.objective == doctest::Approx(best).epsilon(1e-9).scale(1.0));

        auto traj = extract_trajectory(hp, spec, sol.x);
        ValidateOptions vo;
        vo.terminal = true;
        auto report = validate_trajectory(traj, spec, scen, vo);
        CHECK(report.empty());
        for (const auto& d : traj) {
            double h = 0.0;
            if (d.p_h_c > 0) h = d.h_c - duty_rate(spec.hydrogen.charge_curve, d.p_h_c, d.w_c);
            CHECK(std::abs(h) < 1e-6);
        }
    }
}

TEST_CASE("fixed schedule program has no binaries and matches the hull when it is tight") {
    auto spec = default_spec();
    auto scen = make_scenario({30, 30}, {60, 0}, {0, 0});
    HorizonOptions o;
    o.mode = SegmentMode::Fixed;
    o.schedule = {{0, 0}, {0, 0}};
    auto f = build_horizon_program(spec, scen, 2, o);
    CHECK(f.program.num_binaries() == 0);
    auto sol = solve_lp(f.program);
    REQUIRE(sol.ok());
    auto traj = extract_trajectory(f, spec, sol.x);
    CHECK(validate_trajectory(traj, spec, scen).empty());
}

TEST_CASE("soc penalty expands to a diagonal quadratic") {
    auto spec = default_spec();
    auto scen = make_scenario({20}, {20}, {0});
    HorizonOptions o;
    o.mode = SegmentMode::Hull;
    o.terminal = false;
    o.soc_penalty = SocPenalty{0.5, Vector::Constant(1, 310.0)};
    auto hp = build_horizon_program(spec, scen, 1, o);
    Vector x = Vector::Zero(hp.program.num_vars());
    x[hp.steps[0].e_h] = 304.0;
    CHECK(hp.program.objective(x) == doctest::Approx(0.5 * 36.0));
}

TEST_CASE("validate flags injected faults") {
    auto spec = default_spec();
    std::mt19937_64 rng(5);
    auto scen = random_scenario(rng, 5);
    auto hp = build_horizon_program(spec, scen, 5);
    auto sol = solve_milp(hp.program);
    REQUIRE(sol.ok());
    auto traj = extract_trajectory(hp, spec, sol.x);
    REQUIRE(validate_trajectory(traj, spec, scen).empty());

    auto bad = traj;
    bad[3].p_l += 0.25;
    bad[3].p_l = std::min(bad[3].p_l, scen.load[3]);
    const double inj = bad[3].p_l - traj[3].p_l;
    auto r = validate_trajectory(bad, spec, scen);
    REQUIRE(r.size() == 1);
    CHECK(r[0].step == 3);
    CHECK(r[0].tag == "balance");
    CHECK(r[0].residual == doctest::Approx(inj));

    // SoC above the cap at the final step only.
    bad = traj;
    bad[4].e_h = spec.hydrogen.e_max + 1.0;
    ValidateOptions vo;
    vo.tol = 1e-6;
    r = validate_trajectory(bad, spec, scen, vo);
    int soc = 0;
    for (const auto& v : r) soc += v.tag == "hydrogen_soc";
    CHECK(soc == 1);
}
