#include "hbes/oco.hpp"

#include "hbes/diagnostics.hpp"
#include "hbes/errors.hpp"
#include "hbes/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hbes {

void OcoConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("oco config: ") + what);
    };
    need(T >= 1, "T must be at least 1");
    need(c > 0.0 && c < 1.0, "c must lie in (0, 1)");
    need(kappa >= 0.0 && kappa <= c, "kappa must lie in [0, c]");
    need(alpha0 > 0.0, "alpha0 must be positive");
    need(beta0 > 0.0, "beta0 must be positive");
    need(G > 0.0, "G must be positive");
    need(gamma0 > 0.0 && gamma0 < 1.0 / (std::numbers::sqrt2 * G), "gamma0 must lie in (0, 1/(sqrt(2) G))");
}

Index OcoConfig::num_experts() const {
    return static_cast<Index>(std::floor(kappa * std::log2(1.0 + static_cast<double>(T)))) + 1;
}

double OcoConfig::alpha(Index i, Index t) const {
    return alpha0 * std::ldexp(1.0, static_cast<int>(i - 1)) / std::pow(static_cast<double>(std::max<Index>(t, 1)), c);
}

double OcoConfig::beta(Index i, Index t) const { return beta0 / std::sqrt(alpha(i, t)); }

double OcoConfig::gamma() const { return gamma0 / std::pow(static_cast<double>(T), c); }

Vector initial_weights(Index M) {
    if (M < 1) throw std::invalid_argument("initial_weights: need at least one expert");
    Vector rho(M);
    const double m = static_cast<double>(M);
    for (Index i = 1; i <= M; ++i) {
        const double di = static_cast<double>(i);
        rho[i - 1] = (m + 1.0) / (di * (di + 1.0) * m);
    }
    return rho;
}

EnsembleState init_ensemble(const OcoConfig& config, const Vector& x0, Index num_constraints) {
    config.validate();
    EnsembleState s;
    const Index M = config.num_experts();
    s.rho = initial_weights(M);
    s.gamma = config.gamma();
    s.x = x0;
    for (Index i = 1; i <= M; ++i) s.experts.push_back({i, x0, Vector::Zero(num_constraints)});
    return s;
}

Vector update_virtual_queue(const Vector& Q, const Vector& g, double beta) {
    if (!(beta > 0)) throw std::invalid_argument("update_virtual_queue: beta must be positive");
    return Q + beta * g.cwiseMax(0.0);
}

ExpertStep expert_decision(const InnerProblem& pr, const Vector& grad, const Vector& Q, const Vector& x_prev,
                           double alpha, double beta, const SolveOptions& options) {
    const auto& X = pr.feasible;
    const Index n = X.num_vars();
    if (grad.size() != n || x_prev.size() != n) throw std::invalid_argument("expert_decision: dimension mismatch");
    if (Q.size() != pr.G.rows() || pr.h.size() != pr.G.rows() || (pr.G.rows() && pr.G.cols() != n))
        throw std::invalid_argument("expert_decision: constraint dimension mismatch");
    if (!(alpha > 0 && beta > 0)) throw std::invalid_argument("expert_decision: alpha and beta must be positive");

    std::vector<Index> active;
    for (Index j = 0; j < Q.size(); ++j) {
        if (Q[j] < 0) throw std::invalid_argument("expert_decision: negative queue");
        if (Q[j] > 0) active.push_back(j);
    }
    const Index k = static_cast<Index>(active.size());

    StandardFormProgram p;
    p.c.resize(n + k);
    p.c.head(n) = alpha * grad - 2.0 * x_prev;
    p.q = Vector::Zero(n + k);
    p.q.head(n).setConstant(2.0);
    p.offset = x_prev.squaredNorm();
    p.lb.resize(n + k);
    p.ub.resize(n + k);
    p.lb.head(n) = X.lb;
    p.ub.head(n) = X.ub;
    for (Index a = 0; a < k; ++a) {
        const Index j = active[static_cast<std::size_t>(a)];
        p.c[n + a] = alpha * beta * Q[j];
        p.lb[n + a] = 0.0;
        // Cap the slack at the largest violation over the box of X so that
        // the interior point iterates stay bounded.
        double top = -pr.h[j];
        for (SparseRows::InnerIterator it(pr.G, j); it; ++it)
            top += it.value() * (it.value() > 0 ? X.ub[it.col()] : X.lb[it.col()]);
        p.ub[n + a] = std::isfinite(top) ? std::max(top, 0.0) + 1.0 : kInf;
    }
    p.binary.assign(static_cast<std::size_t>(n + k), false);

    std::vector<Eigen::Triplet<double>> trip;
    for (Index r = 0; r < X.num_in(); ++r)
        for (SparseRows::InnerIterator it(X.A_in, r); it; ++it) trip.emplace_back(r, it.col(), it.value());
    p.b_in.resize(X.num_in() + k);
    if (X.num_in()) p.b_in.head(X.num_in()) = X.b_in;
    for (Index a = 0; a < k; ++a) {
        const Index row = X.num_in() + a;
        const Index j = active[static_cast<std::size_t>(a)];
        for (SparseRows::InnerIterator it(pr.G, j); it; ++it) trip.emplace_back(row, it.col(), it.value());
        trip.emplace_back(row, n + a, -1.0);
        p.b_in[row] = pr.h[j];
    }
    p.A_in.resize(X.num_in() + k, n + k);
    p.A_in.setFromTriplets(trip.begin(), trip.end());
    p.A_eq = X.A_eq;
    p.A_eq.conservativeResize(X.num_eq(), n + k);
    p.b_eq = X.b_eq;

    Solution sol = solve_qp(p, options);
    if (sol.status == SolveStatus::Infeasible || sol.status == SolveStatus::Unbounded)
        throw SolverError(std::string("expert decision: inner problem ") + to_string(sol.status));
    if (sol.status == SolveStatus::LimitHit) diagnostic("expert decision: iteration limit hit, using the last iterate");
    ExpertStep out;
    out.x = sol.x.head(n);
    out.objective = sol.objective;
    out.status = sol.status;
    return out;
}

double clipped_objective(const InnerProblem& pr, const Vector& grad, const Vector& Q, const Vector& x_prev,
                         double alpha, double beta, const Vector& x) {
    return alpha * grad.dot(x) + alpha * beta * Q.dot(pr.g(x).cwiseMax(0.0)) + (x - x_prev).squaredNorm();
}

Vector update_expert_weights(const Vector& rho, const Vector& losses, double gamma) {
    if (rho.size() != losses.size()) throw std::invalid_argument("update_expert_weights: dimension mismatch");
    if (gamma < 0) throw std::invalid_argument("update_expert_weights: gamma must be non-negative");
    const Index M = rho.size();
    Vector logw(M);
    for (Index i = 0; i < M; ++i) logw[i] = rho[i] > 0 ? std::log(rho[i]) - gamma * losses[i] : -kInf;
    const double top = logw.maxCoeff();
    Vector w = Vector::Zero(M);
    if (std::isfinite(top))
        for (Index i = 0; i < M; ++i) w[i] = std::exp(logw[i] - top);
    const double sum = w.sum();
    if (!(sum > 0) || !std::isfinite(sum)) {
        diagnostic("expert weights degenerated, falling back to uniform weights");
        return Vector::Constant(M, 1.0 / static_cast<double>(M));
    }
    return w / sum;
}

Vector aggregate_decision(const Vector& rho, const std::vector<Vector>& xs) {
    if (static_cast<std::size_t>(rho.size()) != xs.size() || xs.empty())
        throw std::invalid_argument("aggregate_decision: weight count differs from the decision count");
    Vector x = Vector::Zero(xs.front().size());
    for (std::size_t i = 0; i < xs.size(); ++i) x += rho[static_cast<Index>(i)] * xs[i];
    return x;
}

RegretReport compute_regret(const std::vector<double>& realized, const std::vector<double>& benchmark,
                            const std::vector<Vector>& y) {
    if (realized.size() != benchmark.size()) throw std::invalid_argument("compute_regret: length mismatch");
    RegretReport r;
    for (std::size_t t = 0; t < realized.size(); ++t) r.regret += realized[t] - benchmark[t];
    for (std::size_t t = 1; t < y.size(); ++t) r.path_length += (y[t] - y[t - 1]).norm();
    return r;
}

OcoLearner::OcoLearner(const OcoConfig& config, Vector x0, Index num_constraints, SolveOptions options)
    : config_(config), options_(options), state_(init_ensemble(config, x0, num_constraints)) {}

const Vector& OcoLearner::decide(const InnerProblem& problem, const Feedback* fb) {
    auto& s = state_;
    const Index M = static_cast<Index>(s.experts.size());
    const Index t = s.t + 1;
    trace_ = {};
    trace_.t = t;
    trace_.objective.assign(static_cast<std::size_t>(M), 0.0);
    trace_.loss.assign(static_cast<std::size_t>(M), 0.0);

    if (t == 1 || fb == nullptr) {
        if (t > 1) throw std::invalid_argument("OcoLearner: feedback required after the first step");
        // Project the designated start onto X_1.
        const Vector zero = Vector::Zero(s.x.size());
        auto first = expert_decision(problem, zero, Vector::Zero(problem.G.rows()), s.x, 1.0, 1.0, options_);
        for (auto& e : s.experts) e.x = first.x;
        s.x = first.x;
    } else {
        Vector losses(M);
        for (Index i = 0; i < M; ++i) losses[i] = fb->grad.dot(s.experts[static_cast<std::size_t>(i)].x - s.x);
        s.rho = update_expert_weights(s.rho, losses, s.gamma);
        std::vector<Vector> xs;
        xs.reserve(static_cast<std::size_t>(M));
        // g_{t-1} drives both the queue update and the inner problem.
        const InnerProblem last{problem.feasible, fb->G, fb->h};
        for (Index i = 0; i < M; ++i) {
            auto& e = s.experts[static_cast<std::size_t>(i)];
            const double alpha = config_.alpha(e.index, t - 1);
            const double beta = config_.beta(e.index, t - 1);
            e.Q = update_virtual_queue(e.Q, last.g(e.x), beta);
            auto r = expert_decision(last, fb->grad, e.Q, e.x, alpha, beta, options_);
            e.x = r.x;
            xs.push_back(r.x);
            trace_.objective[static_cast<std::size_t>(i)] = r.objective;
            trace_.loss[static_cast<std::size_t>(i)] = losses[i];
        }
        s.x = aggregate_decision(s.rho, xs);
    }
    s.t = t;
    trace_.rho = s.rho;
    for (const auto& e : s.experts) trace_.queue_norm.push_back(e.Q.norm());
    return s.x;
}

// Regret benchmark -----------------------------------------------------------------

namespace {

struct Stream {
    Index dim;
    Vector theta(Index t) const {
        Vector th(dim);
        const double s = std::pow(static_cast<double>(t), 0.3);
        for (Index j = 0; j < dim; ++j) th[j] = 0.5 + 0.35 * std::sin(s + 1.3 * static_cast<double>(j));
        return th;
    }
    double budget(Index t) const {
        return 0.45 * static_cast<double>(dim) + 0.2 * std::cos(0.7 * std::pow(static_cast<double>(t), 0.3));
    }
};

// argmin |x - theta|^2 on [0,1]^d with sum x <= b, by bisection on the multiplier.
Vector project_budget(const Vector& theta, double b) {
    auto at = [&](double mu) { return (theta.array() - mu).cwiseMax(0.0).cwiseMin(1.0).matrix().eval(); };
    Vector x = at(0.0);
    if (x.sum() <= b) return x;
    double lo = 0.0, hi = theta.maxCoeff() + 1.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (at(mid).sum() > b ? lo : hi) = mid;
    }
    return at(hi);
}

}  // namespace

RegretPoint run_regret_benchmark(Index T, const RegretBenchConfig& bc) {
    const auto t0 = std::chrono::steady_clock::now();
    const Stream stream{bc.dim};
    const Index d = bc.dim;

    InnerProblem X;
    X.feasible.c = Vector::Zero(d);
    X.feasible.lb = Vector::Zero(d);
    X.feasible.ub = Vector::Ones(d);
    X.feasible.A_in.resize(0, d);
    X.feasible.A_eq.resize(0, d);
    X.feasible.b_in.resize(0);
    X.feasible.b_eq.resize(0);
    X.feasible.binary.assign(static_cast<std::size_t>(d), false);
    SparseRows G(1, d);
    for (Index j = 0; j < d; ++j) G.insert(0, j) = 1.0;
    G.makeCompressed();
    X.G = G;
    X.h = Vector::Constant(1, stream.budget(1));

    OcoConfig cfg;
    cfg.T = T;
    cfg.kappa = bc.kappa;
    cfg.c = bc.c;
    cfg.alpha0 = bc.alpha0;
    cfg.beta0 = bc.beta0;
    cfg.G = 2.0 * std::sqrt(static_cast<double>(d));  // sup |2 (x - theta)| on the unit box
    cfg.gamma0 = bc.gamma_fraction / (std::numbers::sqrt2 * cfg.G);

    OcoLearner learner(cfg, Vector::Zero(d), 1);
    RegretPoint out;
    out.T = T;
    std::vector<double> fx, fy;
    std::vector<Vector> ys;
    Feedback fb;
    for (Index t = 1; t <= T; ++t) {
        const Vector x = learner.decide(X, t == 1 ? nullptr : &fb);
        const Vector th = stream.theta(t);
        const double b = stream.budget(t);
        const Vector y = project_budget(th, b);
        fx.push_back((x - th).squaredNorm());
        fy.push_back((y - th).squaredNorm());
        ys.push_back(y);
        out.violation += std::max(0.0, x.sum() - b);
        fb.grad = 2.0 * (x - th);
        fb.G = G;
        fb.h = Vector::Constant(1, b);
    }
    const auto r = compute_regret(fx, fy, ys);
    out.regret = r.regret;
    out.path_length = r.path_length;
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw std::invalid_argument("loglog_slope: values must be positive");
        const double a = std::log(x[i]), b = std::log(y[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace hbes
