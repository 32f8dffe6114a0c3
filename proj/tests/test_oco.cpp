#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hbes/oco.hpp"

#include <cmath>
#include <random>

using namespace hbes;

namespace {

// Box [lo, hi]^d, optionally with one coupling row sum x <= cap, and m random
// long-term rows.
InnerProblem random_inner(std::mt19937_64& rng, Index d, Index m, bool coupling) {
    std::uniform_real_distribution<double> u(-1, 1);
    ProgramBuilder b;
    std::vector<ProgramBuilder::Term> sum;
    for (Index j = 0; j < d; ++j) {
        const double lo = -1.0 + 0.5 * u(rng);
        b.add_var("x" + std::to_string(j), lo, lo + 1.5 + u(rng));
        sum.push_back({j, 1.0});
    }
    if (coupling) b.add_le(sum, 0.5 * d * (1.0 + u(rng)));
    InnerProblem p;
    p.feasible = b.build();
    std::vector<Eigen::Triplet<double>> trip;
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < d; ++j) trip.emplace_back(i, j, u(rng));
    p.G.resize(m, d);
    p.G.setFromTriplets(trip.begin(), trip.end());
    p.h = Vector(m);
    for (Index i = 0; i < m; ++i) p.h[i] = 0.3 * u(rng);
    return p;
}

}  // namespace

TEST_CASE("expert grid parameters") {
    OcoConfig c;
    c.T = 8760;
    CHECK(c.num_experts() == static_cast<Index>(std::floor(0.5 * std::log2(8761.0))) + 1);
    CHECK(c.num_experts() == 7);
    c.alpha0 = 2.0;
    c.beta0 = 3.0;
    CHECK(c.alpha(1, 1) == 2.0);
    CHECK(c.alpha(3, 4) == doctest::Approx(2.0 * 4.0 / 2.0));
    CHECK(c.beta(3, 4) == doctest::Approx(3.0 / 2.0));
    CHECK(c.gamma() == doctest::Approx(0.5 / std::sqrt(8760.0)));

    OcoConfig bad;
    bad.kappa = 0.7;
    CHECK_THROWS(bad.validate());
    bad = OcoConfig{};
    bad.c = 1.0;
    CHECK_THROWS(bad.validate());
    bad = OcoConfig{};
    bad.G = 1.0;
    bad.gamma0 = 1.0;  // above 1 / sqrt(2)
    CHECK_THROWS(bad.validate());
}

TEST_CASE("initial weights sum to one") {
    for (Index M = 1; M <= 16; ++M) {
        const Vector r = initial_weights(M);
        CHECK(r.size() == M);
        CHECK((r.array() > 0).all());
        CHECK(std::abs(r.sum() - 1.0) <= 1e-15);
        CHECK(r[0] == doctest::Approx((M + 1.0) / (2.0 * M)));
    }
}

TEST_CASE("virtual queue is non-decreasing") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> u(0, 2);
    Vector Q = Vector::Zero(3);
    for (int k = 0; k < 10000; ++k) {
        Vector g(3);
        for (Index j = 0; j < 3; ++j) g[j] = n(rng);
        const double beta = u(rng);
        const Vector next = update_virtual_queue(Q, g, beta);
        for (Index j = 0; j < 3; ++j) {
            REQUIRE(next[j] >= Q[j]);
            CHECK(next[j] == doctest::Approx(Q[j] + beta * std::max(g[j], 0.0)).epsilon(1e-14));
        }
        Q = next;
    }
}

TEST_CASE("expert weight update hand case and simplex") {
    Vector rho(2), l(2);
    rho << 0.5, 0.5;
    l << 0.0, 1.0;
    const Vector r = update_expert_weights(rho, l, 1.0);
    CHECK(r[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
    CHECK(update_expert_weights(rho, Vector::Constant(2, 3.0), 2.0) == rho);
    CHECK(update_expert_weights(rho, l, 0.0) == rho);

    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0, 50);
    Vector w = initial_weights(6);
    for (int k = 0; k < 2000; ++k) {
        Vector loss(6);
        for (Index i = 0; i < 6; ++i) loss[i] = n(rng);
        w = update_expert_weights(w, loss, 0.5);
        REQUIRE((w.array() >= 0).all());
        REQUIRE(std::abs(w.sum() - 1.0) <= 1e-9);
    }
}

TEST_CASE("aggregate decision") {
    Vector rho(2);
    rho << 0.25, 0.75;
    std::vector<Vector> xs{Vector::Constant(1, 0.0), Vector::Constant(1, 4.0)};
    CHECK(aggregate_decision(rho, xs)[0] == doctest::Approx(3.0));
    Vector hot(2);
    hot << 0.0, 1.0;
    CHECK(aggregate_decision(hot, xs)[0] == 4.0);
    std::vector<Vector> same{Vector::Constant(2, 1.5), Vector::Constant(2, 1.5)};
    CHECK(aggregate_decision(rho, same).isApprox(Vector::Constant(2, 1.5)));
}

TEST_CASE("regret bookkeeping") {
    CHECK(compute_regret({3, 5}, {2, 4}).regret == doctest::Approx(2.0));
    CHECK(compute_regret({1, 2, 3}, {1, 2, 3}).regret == 0.0);
    std::vector<Vector> still(4, Vector::Constant(3, 2.0));
    CHECK(compute_regret({1, 1, 1, 1}, {0, 0, 0, 0}, still).path_length == 0.0);
    std::vector<Vector> moving{Vector::Zero(2), Vector::Constant(2, 1.0), Vector::Zero(2)};
    CHECK(compute_regret({0, 0, 0}, {0, 0, 0}, moving).path_length == doctest::Approx(2.0 * std::sqrt(2.0)));
    CHECK_THROWS(compute_regret({1, 2}, {1}));
}

TEST_CASE("slack QP equals the clipped objective") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1, 1), pos(0, 3);
    for (int rep = 0; rep < 100; ++rep) {
        const Index d = 2 + rep % 5, m = 1 + rep % 3;
        const auto p = random_inner(rng, d, m, rep % 2 == 0);
        Vector grad(d), x_prev(d), Q(m);
        for (Index j = 0; j < d; ++j) {
            grad[j] = 3.0 * u(rng);
            x_prev[j] = u(rng);
        }
        for (Index j = 0; j < m; ++j) Q[j] = rep % 7 == 0 && j == 0 ? 0.0 : pos(rng);
        const double alpha = 0.1 + pos(rng), beta = 0.1 + pos(rng);
        const auto step = expert_decision(p, grad, Q, x_prev, alpha, beta);
        REQUIRE(step.status == SolveStatus::Optimal);
        const double direct = clipped_objective(p, grad, Q, x_prev, alpha, beta, step.x);
        CHECK(std::abs(step.objective - direct) <= 1e-6);
        CHECK(max_violation(p.feasible, step.x) <= 1e-7);

        // no feasible point nearby does better
        for (int probe = 0; probe < 20; ++probe) {
            Vector y = step.x;
            for (Index j = 0; j < d; ++j) y[j] += 1e-3 * u(rng);
            if (max_violation(p.feasible, y) > 0) continue;
            CHECK(clipped_objective(p, grad, Q, x_prev, alpha, beta, y) >= direct - 1e-6);
        }
    }
}

TEST_CASE("learner stays feasible with queues growing") {
    std::mt19937_64 rng(3);
    const auto p = random_inner(rng, 3, 2, true);
    OcoConfig cfg;
    cfg.T = 200;
    cfg.alpha0 = 0.5;
    cfg.beta0 = 0.5;
    cfg.G = 2.0;
    cfg.gamma0 = 0.5 / (std::sqrt(2.0) * cfg.G);
    Vector x0 = p.feasible.lb.cwiseMax(Vector::Zero(3)).cwiseMin(p.feasible.ub);
    OcoLearner learner(cfg, x0, 2);
    std::vector<Vector> prevQ;
    std::normal_distribution<double> n(0, 1);
    Feedback fb;
    for (Index t = 0; t < cfg.T; ++t) {
        const Vector& x = learner.decide(p, t == 0 ? nullptr : &fb);
        CHECK(max_violation(p.feasible, x) <= 1e-6);
        const auto& st = learner.state();
        REQUIRE((st.rho.array() >= 0).all());
        REQUIRE(std::abs(st.rho.sum() - 1.0) <= 1e-9);
        for (std::size_t i = 0; i < st.experts.size(); ++i) {
            if (prevQ.size() == st.experts.size())
                CHECK((st.experts[i].Q.array() >= prevQ[i].array() - 1e-15).all());
        }
        prevQ.clear();
        for (const auto& e : st.experts) prevQ.push_back(e.Q);
        fb.grad = Vector(3);
        for (Index j = 0; j < 3; ++j) fb.grad[j] = n(rng);
        fb.G = p.G;
        fb.h = p.h;
    }
    CHECK(learner.state().experts.size() == static_cast<std::size_t>(cfg.num_experts()));
}

TEST_CASE("regret benchmark grows sublinearly") {
    std::vector<double> Ts, regs;
    for (Index T : {256, 512, 1024}) {
        const auto pt = run_regret_benchmark(T);
        CHECK(pt.regret > 0);
        Ts.push_back(static_cast<double>(T));
        regs.push_back(pt.regret);
    }
    CHECK(loglog_slope(Ts, regs) < 0.95);
    CHECK(loglog_slope({1, 2, 4}, {3, 6, 12}) == doctest::Approx(1.0));
    CHECK(loglog_slope({1, 10, 100}, {5, 5 * std::sqrt(10.0), 50}) == doctest::Approx(0.5));
}
