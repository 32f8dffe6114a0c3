// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include "hbes/cli.hpp"
#include "hbes/diagnostics.hpp"
#include "hbes/dispatch.hpp"
#include "hbes/electrochem.hpp"
#include "hbes/io.hpp"
#include "hbes/oco.hpp"
#include "hbes/piecewise.hpp"
#include "hbes/reference.hpp"
#include "hbes/solver.hpp"
#include "hbes/synth.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

using namespace hbes;
using hbes::testing::enumerate;
using hbes::testing::random_milp;
using hbes::testing::random_scenario;

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    char time[32];
    std::snprintf(time, sizeof time, "%.1f s", seconds_since(t0));
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << " (" << time << ")"
              << std::endl;
    if (!o.pass) ++failures;
}

std::string num(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

// Shared full-year inputs, built once.
struct YearData {
    MicrogridSpec spec = default_spec();
    ScenarioSeries year = synthetic_year(7);
    ScenarioLibrary library;
    ReferenceSet refs;
    std::vector<ComparisonRow> rows;
    std::vector<RolloutResult> rollouts;
    bool compared = false;

    YearData() {
        for (std::uint64_t s : {11, 12, 13, 14}) library.add(synthetic_year(s));
    }

    void compare() {
        if (compared) return;
        refs = generate_offline_references(library, spec);
        std::vector<MethodConfig> cfgs;
        for (Method m : {Method::M0, Method::M1, Method::M2, Method::M3, Method::M4}) {
            MethodConfig c;
            c.method = m;
            cfgs.push_back(c);
        }
        rows = evaluate_methods(spec, year, cfgs, {&library, &refs, false}, &rollouts);
        compared = true;
    }
};

Outcome efficiency_peak() {
    const ElectrolyzerParams p;
    double best = -1.0, at = 0.0;
    for (int k = 1; k <= 1000; ++k) {
        const double power = p.P_rated * k / 1000.0;
        const double eta = electrolyzer_efficiency_at_power(power, p);
        if (eta > best) {
            best = eta;
            at = power;
        }
    }
    const double frac = at / p.P_rated;
    return {frac >= 0.10 && frac <= 0.35,
            "peak " + num(best) + " at " + num(100 * frac, 3) + "% of rated power (want 10-35%)"};
}

Outcome fit_quality() {
    const auto c = default_charge_fit({}, 4);
    const auto d = default_discharge_fit({}, 4);
    const double cont = std::max(c.curve.continuity_residual(), d.curve.continuity_residual());
    const bool ok = c.relative_rmse <= 0.02 && d.relative_rmse <= 0.02 && cont <= 1e-6;
    return {ok, "relative RMSE charge " + num(100 * c.relative_rmse) + "%, discharge " + num(100 * d.relative_rmse) +
                    "%, continuity " + num(cont)};
}

Outcome milp_exactness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2026);
    int generic = 0, grid = 0;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const int nb = 1 + k % 12;
        const auto p = random_milp(rng, nb, 8);
        const auto s = solve_milp(p);
        const double oracle = enumerate(p);
        if (!std::isfinite(oracle)) {
            generic += s.status == SolveStatus::Infeasible;
            continue;
        }
        const double err = s.ok() ? std::abs(s.objective - oracle) : kInf;
        worst = std::max(worst, err);
        generic += err <= 1e-6;
    }
    const auto spec = default_spec();
    for (int k = 0; k < 20; ++k) {
        const Index T = 1 + k % 6;
        const auto scen = random_scenario(rng, T);
        auto hp = build_horizon_program(spec, scen, T);
        const auto s = solve_milp(hp.program);
        double oracle = kInf;
        const std::uint64_t leaves = 1ULL << (2 * T);
        for (std::uint64_t code = 0; code < leaves; ++code) {
            HorizonOptions o;
            o.mode = SegmentMode::Fixed;
            for (Index t = 0; t < T; ++t) {
                o.schedule.seg_c.push_back(static_cast<int>((code >> (2 * t)) & 1));
                o.schedule.seg_d.push_back(static_cast<int>((code >> (2 * t + 1)) & 1));
            }
            const auto leaf = solve_lp(build_horizon_program(spec, scen, T, o).program);
            if (leaf.ok()) oracle = std::min(oracle, leaf.objective);
        }
        const double err = s.ok() ? std::abs(s.objective - oracle) : kInf;
        worst = std::max(worst, err);
        grid += err <= 1e-6;
    }
    const double secs = seconds_since(t0);
    return {generic == 100 && grid == 20 && secs < 60,
            std::to_string(generic) + "/100 generic and " + std::to_string(grid) +
                "/20 microgrid instances match enumeration, worst error " + num(worst) + ", " + num(secs, 3) +
                " s (limit 60 s)"};
}

Outcome storage_priority() {
    auto spec = default_spec();
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(0, 1);
    int violations = 0, with_h2 = 0;
    for (int k = 0; k < 50; ++k) {
        const auto scen = hbes::testing::make_scenario({40 + 80 * u(rng)}, {30 * u(rng)}, {30 * u(rng)});
        HorizonOptions o;
        o.terminal = false;
        o.e_b0 = spec.battery.e_min + (spec.battery.e_max - spec.battery.e_min) * u(rng);
        o.e_h0 = spec.hydrogen.e_max * (0.2 + 0.6 * u(rng));
        auto hp = build_horizon_program(spec, scen, 1, o);
        const auto s = solve_milp(hp.program);
        if (!s.ok()) return {false, "instance " + std::to_string(k) + " not solved"};
        const auto d = extract_trajectory(hp, spec, s.x)[0];
        const auto& B = spec.battery;
        const double energy_cap = (*o.e_b0 * (1.0 - B.eps) - B.e_min) * B.eta_d / spec.dt;
        const double cap = std::min(B.p_max, energy_cap);
        if (d.p_h_d > 1e-6) {
            ++with_h2;
            if (d.p_b_d < cap - 1e-6) ++violations;
        }
    }
    return {violations == 0, std::to_string(violations) + " violations on 50 instances (" + std::to_string(with_h2) +
                                 " use hydrogen discharge)"};
}

Outcome efficiency_models(YearData& y) {
    const auto t0 = Clock::now();
    std::map<EfficiencyModel, RolloutResult> r;
    for (EfficiencyModel e : {EfficiencyModel::E1, EfficiencyModel::E2, EfficiencyModel::E3}) {
        MethodConfig c;
        c.method = Method::M0;
        c.efficiency = e;
        r[e] = run_rollout(y.spec, y.year, c);
    }
    const auto& e1 = r[EfficiencyModel::E1];
    const auto& e2 = r[EfficiencyModel::E2];
    const auto& e3 = r[EfficiencyModel::E3];
    const double secs = seconds_since(t0);
    const bool ok = e1.practical.lol_mwh <= 1e-9 && e2.practical.lol_mwh > 0 &&
                    e3.theoretical.cost.total > e1.theoretical.cost.total && secs < 600;
    return {ok, "practical LOL E1 " + num(e1.practical.lol_mwh) + " MWh, E2 " + num(e2.practical.lol_mwh) +
                    " MWh; theoretical cost E3 " + num(e3.theoretical.cost.total, 7) + " vs E1 " +
                    num(e1.theoretical.cost.total, 7) + " USD"};
}

Outcome method_ordering(YearData& y) {
    const auto t0 = Clock::now();
    y.compare();
    const double secs = seconds_since(t0);
    std::map<Method, ComparisonRow> row;
    for (const auto& r : y.rows) row[r.method] = r;
    const auto& m0 = row[Method::M0];
    const auto& m1 = row[Method::M1];
    const auto& m2 = row[Method::M2];
    const auto& m3 = row[Method::M3];
    const auto& m4 = row[Method::M4];
    const bool ok = m0.cost_usd <= m1.cost_usd && m1.cost_usd < m3.cost_usd && m0.cost_usd <= m2.cost_usd &&
                    m2.cost_usd < m4.cost_usd && m1.lol_mwh <= 0.5 * m3.lol_mwh && secs < 1200;
    std::string d = "cost";
    for (const auto* r : {&m0, &m1, &m2, &m3, &m4}) d += std::string(" ") + to_string(r->method) + " " + num(r->cost_usd, 7);
    d += "; LOL M1 " + num(m1.lol_mwh) + " vs M3 " + num(m3.lol_mwh) + " MWh; " + num(secs, 4) + " s";
    return {ok, d};
}

Outcome regret_slope() {
    std::vector<double> Ts, regs;
    for (Index T : {256, 512, 1024, 2048, 4096}) {
        const auto p = run_regret_benchmark(T);
        Ts.push_back(static_cast<double>(T));
        regs.push_back(p.regret);
    }
    const double slope = loglog_slope(Ts, regs);
    return {slope <= 0.95, "log-log slope " + num(slope) + " (limit 0.95)"};
}

Outcome oco_identities() {
    bool weights = true;
    for (Index M = 1; M <= 16; ++M) weights = weights && std::abs(initial_weights(M).sum() - 1.0) <= 1e-15;

    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> u(-1, 1), pos(0, 2);
    bool monotone = true;
    Vector Q = Vector::Zero(4);
    for (int k = 0; k < 10000; ++k) {
        Vector g(4);
        for (Index j = 0; j < 4; ++j) g[j] = n(rng);
        const Vector next = update_virtual_queue(Q, g, pos(rng));
        monotone = monotone && (next.array() >= Q.array()).all();
        Q = next;
    }

    double worst = 0.0;
    int solved = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const Index d = 2 + rep % 6, m = 1 + rep % 3;
        ProgramBuilder b;
        std::vector<ProgramBuilder::Term> sum;
        for (Index j = 0; j < d; ++j) {
            const double lo = -1.0 + 0.5 * u(rng);
            b.add_var("x" + std::to_string(j), lo, lo + 1.5 + u(rng));
            sum.push_back({j, 1.0});
        }
        if (rep % 2) b.add_le(sum, 0.5 * static_cast<double>(d));
        InnerProblem p;
        p.feasible = b.build();
        std::vector<Eigen::Triplet<double>> trip;
        for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < d; ++j) trip.emplace_back(i, j, u(rng));
        p.G.resize(m, d);
        p.G.setFromTriplets(trip.begin(), trip.end());
        p.h = Vector(m);
        for (Index i = 0; i < m; ++i) p.h[i] = 0.3 * u(rng);
        Vector grad(d), x_prev(d), Qr(m);
        for (Index j = 0; j < d; ++j) {
            grad[j] = 3 * u(rng);
            x_prev[j] = u(rng);
        }
        for (Index j = 0; j < m; ++j) Qr[j] = pos(rng);
        const double alpha = 0.1 + pos(rng), beta = 0.1 + pos(rng);
        const auto step = expert_decision(p, grad, Qr, x_prev, alpha, beta);
        if (step.status != SolveStatus::Optimal) continue;
        ++solved;
        worst = std::max(worst, std::abs(step.objective - clipped_objective(p, grad, Qr, x_prev, alpha, beta, step.x)));
    }
    const bool ok = weights && monotone && solved == 100 && worst <= 1e-6;
    return {ok, std::string("initial weights ") + (weights ? "sum to 1" : "off") + ", queues " +
                    (monotone ? "monotone" : "NOT monotone") + " over 1e4 updates, slack QP vs clipped objective " +
                    std::to_string(solved) + "/100 solved, worst gap " + num(worst)};
}

Outcome kernel_properties() {
    Vector hand(2);
    hand << 1.0, 4.0;
    const double w1 = kernel_weights(hand, 1, 1.0)[0];
    const double expect = std::exp(-1.0) / (std::exp(-1.0) + std::exp(-4.0));

    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0, 20);
    bool simplex = true, perm = true;
    for (int rep = 0; rep < 500; ++rep) {
        Vector d2(6);
        for (Index s = 0; s < 6; ++s) d2[s] = u(rng);
        const Index t = 1 + rep % 50;
        const double sigma = 0.02 + 0.01 * (rep % 100);
        const Vector w = kernel_weights(d2, t, sigma);
        simplex = simplex && (w.array() >= 0).all() && std::abs(w.sum() - 1.0) <= 1e-9;
        std::vector<Index> idx(6);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        Vector pd(6);
        for (Index s = 0; s < 6; ++s) pd[s] = d2[idx[static_cast<std::size_t>(s)]];
        const Vector pw = kernel_weights(pd, t, sigma);
        for (Index s = 0; s < 6; ++s) perm = perm && std::abs(pw[s] - w[idx[static_cast<std::size_t>(s)]]) <= 1e-12;
    }
    Vector near(3);
    near << 1.0, 0.0, 2.0;
    const double limit = kernel_weights(near, 1, 1e-3)[1];
    const bool ok = std::abs(w1 - expect) <= 1e-12 && std::abs(w1 - 0.9526) <= 5e-5 && simplex && perm &&
                    limit >= 1.0 - 1e-12;
    return {ok, "w1 = " + num(w1, 6) + ", simplex " + (simplex ? "ok" : "broken") + ", permutation " +
                    (perm ? "ok" : "broken") + ", exact-match weight " + num(limit, 12)};
}

Outcome step_latency(YearData& y) {
    y.compare();
    for (const auto& r : y.rollouts)
        if (r.method == Method::M1)
            return {r.mean_step_ms <= 100.0,
                    "M1 mean " + num(r.mean_step_ms, 3) + " ms, max " + num(r.max_step_ms, 3) + " ms (limit 100 ms)"};
    return {false, "no M1 rollout"};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = read_file(e.path());
    return files;
}

Outcome compare_reproducible() {
    const fs::path dir = fs::temp_directory_path() / "hbes-acceptance-compare";
    fs::remove_all(dir);
    const std::vector<std::string> args{"compare",         "--steps", "96",         "--library-seeds", "11,12",
                                        "--perturb",       "R5",      "--forecast", "oracle_noise",    "--sigma-f",
                                        "0.2",             "--trace", "--out",      dir.string()};
    std::ostringstream out1, out2, err;
    const int rc1 = run_cli(args, out1, err);
    const auto first = snapshot(dir);
    fs::remove_all(dir);
    const int rc2 = run_cli(args, out2, err);
    const auto second = snapshot(dir);
    fs::remove_all(dir);
    const bool ok = rc1 == 0 && rc2 == 0 && !first.empty() && first == second && out1.str() == out2.str();
    return {ok, std::to_string(first.size()) + " files, exit codes " + std::to_string(rc1) + "/" +
                    std::to_string(rc2) + ", outputs " + (first == second ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
    std::map<std::string, int> warnings;
    set_diagnostic_handler([&](const std::string& m) { ++warnings[m]; });
    YearData year;

    report(1, "charging efficiency peak location", efficiency_peak);
    report(2, "four-segment fit quality", fit_quality);
    report(3, "MILP exactness against enumeration", milp_exactness);
    report(4, "battery before hydrogen", storage_priority);
    report(5, "efficiency-model pattern on the synthetic year", [&] { return efficiency_models(year); });
    report(6, "method ordering on the synthetic year", [&] { return method_ordering(year); });
    report(7, "regret sublinearity", regret_slope);
    report(8, "OCO identities", oco_identities);
    report(9, "kernel tracker properties", kernel_properties);
    report(10, "M1 per-step latency", [&] { return step_latency(year); });
    report(11, "compare reproducibility", compare_reproducible);

    set_diagnostic_handler(nullptr);
    int total = 0;
    for (const auto& [msg, n] : warnings) total += n;
    if (total) std::cout << "diagnostics: " << total << " warnings (" << warnings.size() << " distinct)" << std::endl;
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
              << std::endl;
    return failures ? 1 : 0;
}
