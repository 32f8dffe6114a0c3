#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hbes/solver.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace hbes;
using hbes::testing::enumerate;
using hbes::testing::random_milp;

namespace {

StandardFormProgram one_var(double lb, double ub, double c, double q = 0.0) {
    ProgramBuilder b;
    auto x = b.add_var("x", lb, ub, c);
    if (q != 0.0) b.add_quadratic(x, q);
    return b.build();
}

// Objective of the LP dual for min c'x, A_eq x = b_eq, A_in x <= b_in, l <= x <= u.
double dual_objective(const StandardFormProgram& p, const Solution& s) {
    double d = 0.0;
    Vector r = p.c;
    if (p.num_eq()) {
        d += p.b_eq.dot(s.dual_eq);
        r -= Vector(p.A_eq.transpose() * s.dual_eq);
    }
    if (p.num_in()) {
        d += p.b_in.dot(s.dual_in);
        r -= Vector(p.A_in.transpose() * s.dual_in);
    }
    for (Index j = 0; j < p.num_vars(); ++j) {
        if (r[j] > 0) d += r[j] * p.lb[j];
        else if (r[j] < 0) d += r[j] * p.ub[j];
    }
    return d + p.offset;
}

StandardFormProgram frozen_lp() {
    ProgramBuilder b;
    auto x0 = b.add_var("a", 0, 2, -3);
    auto x1 = b.add_var("b", 0, kInf, -2);
    auto x2 = b.add_var("c", -1, 3, -4);
    auto x3 = b.add_var("d", 0, 1.5, 1);
    b.add_le({{x0, 1}, {x1, 1}, {x2, 2}}, 4);
    b.add_le({{x0, 2}, {x2, 1}, {x3, 1}}, 5);
    b.add_le({{x1, 1}, {x2, 1}, {x3, -1}}, 3);
    b.add_eq({{x0, 1}, {x1, 1}, {x2, 1}, {x3, 1}}, 3);
    return b.build();
}

}  // namespace

TEST_CASE("lp basic cases") {
    ProgramBuilder b;
    auto x = b.add_var("x", 0, 10, 1);
    b.add_ge({{x, 1}}, 3);
    auto s = solve_lp(b.build());
    REQUIRE(s.ok());
    CHECK(s.x[0] == doctest::Approx(3));
    CHECK(s.objective == doctest::Approx(3));

    ProgramBuilder b2;
    auto u = b2.add_var("x", 0, 1, -1);
    auto v = b2.add_var("y", 0, 1, -1);
    b2.add_le({{u, 1}, {v, 1}}, 1);
    auto s2 = solve_lp(b2.build());
    REQUIRE(s2.ok());
    CHECK(s2.objective == doctest::Approx(-1));
    CHECK(s2.x.sum() == doctest::Approx(1));

    ProgramBuilder b3;
    auto w = b3.add_var("x", -kInf, kInf, 0);
    b3.add_le({{w, 1}}, 0);
    b3.add_ge({{w, 1}}, 1);
    CHECK(solve_lp(b3.build()).status == SolveStatus::Infeasible);

    CHECK(solve_lp(one_var(-kInf, 5, 1)).status == SolveStatus::Unbounded);
}

TEST_CASE("lp matches frozen reference optimum and duality") {
    auto p = frozen_lp();
    auto s = solve_lp(p);
    REQUIRE(s.ok());
    CHECK(s.objective == doctest::Approx(-10.0).epsilon(1e-9));
    CHECK(max_violation(p, s.x) <= 1e-9);
    CHECK(std::abs(dual_objective(p, s) - s.objective) <= 1e-6 * (1 + std::abs(s.objective)));
    CHECK((s.dual_in.array() <= 1e-9).all());
}

TEST_CASE("lp duality on random programs") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 30; ++k) {
        auto p = random_milp(rng, 0, 12);
        p.lb.setConstant(-1.0);
        auto s = solve_lp(p);
        REQUIRE(s.ok());
        CHECK(max_violation(p, s.x) <= 1e-7);
        CHECK(std::abs(dual_objective(p, s) - s.objective) <= 1e-6 * (1 + std::abs(s.objective)));
    }
}

TEST_CASE("lp rejects integer and quadratic programs") {
    ProgramBuilder b;
    b.add_var("z", 0, 1, 1, true);
    CHECK_THROWS_AS(solve_lp(b.build()), std::invalid_argument);
    CHECK_THROWS_AS(solve_lp(one_var(0, 1, 0, 1)), std::invalid_argument);
}

TEST_CASE("qp hand cases") {
    // (x - 0.5)^2 = x^2 - x + 0.25
    auto p = one_var(0, 1, -1, 2);
    p.offset = 0.25;
    auto s = solve_qp(p);
    REQUIRE(s.ok());
    CHECK(s.x[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(s.objective == doctest::Approx(0).epsilon(1e-8));

    // 2x + (x - 0.5)^2 has unconstrained minimizer -0.5
    auto s2 = solve_qp(one_var(0, 1, 1, 2));
    REQUIRE(s2.ok());
    CHECK(std::abs(s2.x[0]) <= 1e-6);
}

TEST_CASE("qp on a pure lp agrees with simplex") {
    auto p = frozen_lp();
    auto a = solve_lp(p);
    auto b = solve_qp(p);
    REQUIRE(b.ok());
    CHECK(std::abs(a.objective - b.objective) <= 1e-6);

    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
        auto r = random_milp(rng, 0, 15);
        auto s1 = solve_lp(r);
        auto s2 = solve_qp(r);
        REQUIRE(s2.ok());
        CHECK(std::abs(s1.objective - s2.objective) <= 1e-6 * (1 + std::abs(s1.objective)));
    }
}

TEST_CASE("qp matches projected gradient on box-constrained diagonal programs") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int k = 0; k < 25; ++k) {
        const int n = 8;
        ProgramBuilder b;
        Vector q(n), c(n), lo(n), hi(n);
        for (int j = 0; j < n; ++j) {
            q[j] = 0.2 + std::abs(U(rng)) * 3;
            c[j] = 2 * U(rng);
            lo[j] = -std::abs(U(rng));
            hi[j] = std::abs(U(rng));
            auto v = b.add_var("", lo[j], hi[j], c[j]);
            b.add_quadratic(v, q[j]);
        }
        auto p = b.build();
        auto s = solve_qp(p);
        REQUIRE(s.ok());
        Vector x = Vector::Zero(n);
        const double step = 1.0 / q.maxCoeff();
        for (int it = 0; it < 5000; ++it) x = (x - step * (q.cwiseProduct(x) + c)).cwiseMax(lo).cwiseMin(hi);
        CHECK(std::abs(p.objective(x) - s.objective) <= 1e-5);
    }
}

TEST_CASE("qp with coupling rows satisfies the constraints") {
    ProgramBuilder b;
    auto x = b.add_var("x", 0, 10, 0);
    auto y = b.add_var("y", 0, 10, 0);
    b.add_quadratic(x, 2);
    b.add_quadratic(y, 2);
    b.add_cost(x, -8);
    b.add_cost(y, -8);
    b.add_le({{x, 1}, {y, 1}}, 4);
    b.add_eq({{x, 1}, {y, -1}}, 1);
    auto s = solve_qp(b.build());
    REQUIRE(s.ok());
    // Minimizer of (x-4)^2 + (y-4)^2 on x+y<=4, x-y=1 is (2.5, 1.5).
    CHECK(s.x[0] == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(s.x[1] == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("milp without binaries is the lp") {
    auto p = frozen_lp();
    auto a = solve_lp(p);
    auto b = solve_milp(p);
    CHECK(a.objective == b.objective);
    CHECK(a.x == b.x);
}

TEST_CASE("milp knapsack equals enumeration") {
    const double v[] = {15, 10, 9, 5, 12, 7, 8, 6};
    const double w[] = {1, 5, 3, 4, 6, 2, 7, 3};
    ProgramBuilder b;
    std::vector<ProgramBuilder::Term> row;
    for (int i = 0; i < 8; ++i) row.push_back({b.add_var("", 0, 1, -v[i], true), w[i]});
    b.add_le(row, 15);
    auto s = solve_milp(b.build());
    REQUIRE(s.ok());
    CHECK(s.objective == doctest::Approx(-49));
    for (std::size_t k = 1; k < s.incumbent_trace.size(); ++k)
        CHECK(s.incumbent_trace[k] <= s.incumbent_trace[k - 1]);
}

TEST_CASE("milp equals enumeration on random programs") {
    std::mt19937_64 rng(2024);
    for (int k = 0; k < 25; ++k) {
        const int nb = 2 + k % 9;
        auto p = random_milp(rng, nb, 10);
        auto s = solve_milp(p);
        const double oracle = enumerate(p);
        if (!std::isfinite(oracle)) {
            CHECK(s.status == SolveStatus::Infeasible);
            continue;
        }
        REQUIRE(s.ok());
        CHECK(std::abs(s.objective - oracle) <= 1e-6);
        CHECK(max_violation(p, s.x) <= 1e-6);
    }
}

TEST_CASE("milp node limit reports the gap") {
    std::mt19937_64 rng(9);
    StandardFormProgram p;
    for (int k = 0; k < 50; ++k) {
        p = random_milp(rng, 12, 10);
        if (solve_milp(p).nodes > 6) break;
    }
    SolveOptions o;
    o.node_limit = 2;
    auto s = solve_milp(p, o);
    CHECK(s.status == SolveStatus::LimitHit);
    CHECK(s.nodes == 2);
    if (!s.incumbent_trace.empty()) CHECK(s.bound <= s.objective + 1e-9);
}

TEST_CASE("mps round trip and determinism") {
    std::mt19937_64 rng(4);
    auto p = random_milp(rng, 4, 5);
    p.lb[6] = -kInf;
    p.ub[7] = 0.5;
    p.lb[7] = 0.5;
    p.offset = 1.25;
    p.q = Vector::Zero(p.num_vars());
    p.q[5] = 0.75;
    const auto text = export_mps(p);
    CHECK(text == export_mps(p));
    auto r = import_mps(text);
    CHECK(r.num_vars() == p.num_vars());
    CHECK(r.num_in() == p.num_in());
    CHECK(r.num_eq() == p.num_eq());
    CHECK(r.binary == p.binary);
    CHECK((r.c - p.c).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((r.q - p.q).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(r.offset == p.offset);
    CHECK(Matrix(r.A_in).isApprox(Matrix(p.A_in), 1e-12));
    CHECK((r.b_in - p.b_in).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(r.lb == p.lb);
    CHECK(r.ub == p.ub);
}

TEST_CASE("mps golden fixture") {
    ProgramBuilder b;
    auto x = b.add_var("x", 0, 4, -1);
    auto z = b.add_var("z", 0, 1, 2, true);
    b.add_le({{x, 1}, {z, -4}}, 0, "link");
    b.add_eq({{x, 1}, {z, 1}}, 2.5, "sum");
    const std::string golden =
        "NAME          HBES\n"
        "ROWS\n"
        " N  COST\n"
        " E  sum\n"
        " L  link\n"
        "COLUMNS\n"
        "    x         COST      -1\n"
        "    x         sum       1\n"
        "    x         link      1\n"
        "    M0000000  'MARKER'  'INTORG'\n"
        "    z         COST      2\n"
        "    z         sum       1\n"
        "    z         link      -4\n"
        "    M0000001  'MARKER'  'INTEND'\n"
        "RHS\n"
        "    RHS       sum       2.5\n"
        "BOUNDS\n"
        " UP BND       x         4\n"
        " BV BND       z\n"
        "ENDATA\n";
    CHECK(export_mps(b.build()) == golden);
}

TEST_CASE("solution csv") {
    ProgramBuilder b;
    b.add_var("x", 0, 4, -1);
    b.add_var("", 0, 4, 1);
    auto p = b.build();
    auto s = solve_lp(p);
    std::ostringstream os;
    write_solution_csv(os, p, s);
    CHECK(os.str() == "name,value\nx,4\nC0000001,0\n");
}

TEST_CASE("program checks") {
    ProgramBuilder b;
    b.add_var("x", 2, 1, 0);
    CHECK_THROWS_AS(b.build().check(), std::invalid_argument);
    ProgramBuilder c;
    c.add_var("z", 0, 2, 0, true);
    CHECK_THROWS_AS(c.build().check(), std::invalid_argument);
}

TEST_CASE("qp converges on a degenerate program that made the corrector cycle") {
    const std::string text =
        "NAME          HBES\n"
        "ROWS\n"
        " N  COST\n"
        " L  L0000000\n"
        " L  L0000001\n"
        "COLUMNS\n"
        "    C0000000  COST      0.10584825764985042\n"
        "    C0000000  L0000000  1\n"
        "    C0000000  L0000001  -0.7748399403169596\n"
        "    C0000001  COST      1.711871190988355\n"
        "    C0000001  L0000000  1\n"
        "    C0000001  L0000001  0.18259243540078685\n"
        "    C0000002  COST      0.4989485449393202\n"
        "    C0000002  L0000000  1\n"
        "    C0000002  L0000001  0.1362414011587827\n"
        "    C0000003  COST      0.25529169322411904\n"
        "    C0000003  L0000001  -1\n"
        "RHS\n"
        "    RHS       COST      -0.8487534656077634\n"
        "    RHS       L0000000  2.211732245863052\n"
        "    RHS       L0000001  -0.1433563646981071\n"
        "BOUNDS\n"
        " LO BND       C0000000  -0.941234010376821\n"
        " UP BND       C0000000  -0.04970650085449735\n"
        " LO BND       C0000001  -0.9097587284386842\n"
        " UP BND       C0000001  0.28297908998476673\n"
        " LO BND       C0000002  -0.9402043634561014\n"
        " UP BND       C0000002  0.2824010158607819\n"
        " UP BND       C0000003  1.962806620420129\n"
        "QUADOBJ\n"
        "    C0000000  C0000000  2\n"
        "    C0000001  C0000001  2\n"
        "    C0000002  C0000002  2\n"
        "ENDATA\n";
    const auto p = import_mps(text);
    const auto sol = solve_qp(p);
    REQUIRE(sol.ok());
    CHECK(sol.iterations < 50);
    CHECK(max_violation(p, sol.x) <= 1e-8);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 2000; ++k) {
        Vector y = sol.x;
        for (Index j = 0; j < y.size(); ++j) y[j] += 1e-3 * u(rng);
        if (max_violation(p, y) > 0) continue;
        CHECK(p.objective(y) >= sol.objective - 1e-9);
    }
}
