#pragma once

// Virtual-queue online convex optimization with parallel experts on a
// geometric step-size grid and exponential-weight aggregation.

#include "hbes/program.hpp"

#include <functional>
#include <vector>

namespace hbes {

struct OcoConfig {
    Index T = 8760;       // horizon
    double kappa = 0.5;   // expert count exponent, in [0, c]
    double c = 0.5;       // step-size decay, in (0, 1)
    double alpha0 = 1.0;
    double beta0 = 1.0;
    double gamma0 = 0.5;  // in (0, 1 / (sqrt(2) G))
    double G = 1.0;       // subgradient bound estimate

    /// Throws std::invalid_argument when a range is violated.
    void validate() const;

    /// floor(kappa log2(1 + T)) + 1.
    Index num_experts() const;
    /// alpha0 2^(i-1) / t^c for expert i = 1..M and step t >= 1.
    double alpha(Index i, Index t) const;
    /// beta0 / sqrt(alpha).
    double beta(Index i, Index t) const;
    /// gamma0 / T^c.
    double gamma() const;
};

/// rho_i = (M + 1) / (i (i + 1) M), i = 1..M.
Vector initial_weights(Index M);

struct ExpertState {
    Index index = 1;  // 1-based
    Vector x;
    Vector Q;         // virtual queue, one entry per long-term constraint
};

struct EnsembleState {
    std::vector<ExpertState> experts;
    Vector rho;
    double gamma = 0.0;
    Vector x;         // last aggregated decision
    Index t = 0;      // steps decided so far
};

/// Experts start at x0 with empty queues.
EnsembleState init_ensemble(const OcoConfig& config, const Vector& x0, Index num_constraints);

/// Q + beta [g]_+.
Vector update_virtual_queue(const Vector& Q, const Vector& g, double beta);

/// Static set X (bounds and rows of `feasible`, objective ignored) and the
/// long-term constraint g(x) = G x - h <= 0.
struct InnerProblem {
    StandardFormProgram feasible;
    SparseRows G;
    Vector h;

    Vector g(const Vector& x) const { return G * x - h; }
};

struct ExpertStep {
    Vector x;
    double objective = 0.0;  // alpha <grad, x> + alpha beta <Q, s> + |x - x_prev|^2 at the optimum
    SolveStatus status = SolveStatus::Optimal;
};

/// min over X of alpha <grad, x> + alpha beta <Q, [G x - h]_+> + |x - x_prev|^2,
/// solved as a QP with slacks s >= 0, s >= G x - h (rows with Q_j = 0 omitted).
ExpertStep expert_decision(const InnerProblem& problem, const Vector& grad, const Vector& Q, const Vector& x_prev,
                           double alpha, double beta, const SolveOptions& options = {});

/// Direct evaluation of the clipped objective.
double clipped_objective(const InnerProblem& problem, const Vector& grad, const Vector& Q, const Vector& x_prev,
                         double alpha, double beta, const Vector& x);

/// rho_i e^(-gamma l_i) / sum_j rho_j e^(-gamma l_j), evaluated with a shift.
Vector update_expert_weights(const Vector& rho, const Vector& losses, double gamma);

/// sum_i rho_i x_i.
Vector aggregate_decision(const Vector& rho, const std::vector<Vector>& xs);

struct RegretReport {
    double regret = 0.0;
    double path_length = 0.0;
};

/// regret = sum_t f_t(x_t) - f_t(y_t); path length = sum_t |y_{t+1} - y_t|.
RegretReport compute_regret(const std::vector<double>& realized, const std::vector<double>& benchmark,
                            const std::vector<Vector>& benchmark_decisions = {});

/// What is revealed after step t - 1: the subgradient of f_{t-1} at the
/// committed decision and the long-term constraint g_{t-1}.
struct Feedback {
    Vector grad;
    SparseRows G;
    Vector h;
};

struct OcoStepTrace {
    Index t = 0;
    Vector rho;
    std::vector<double> queue_norm;
    std::vector<double> objective;
    std::vector<double> loss;
};

/// One rollout of the algorithm. Not shareable across threads mid-rollout.
class OcoLearner {
public:
    OcoLearner(const OcoConfig& config, Vector x0, Index num_constraints, SolveOptions options = {});

    /// Decision for the next step over the set X_t of `problem`. `feedback`
    /// must be given for every step after the first.
    const Vector& decide(const InnerProblem& problem, const Feedback* feedback);

    const EnsembleState& state() const { return state_; }
    const OcoStepTrace& trace() const { return trace_; }
    const OcoConfig& config() const { return config_; }

private:
    OcoConfig config_;
    SolveOptions options_;
    EnsembleState state_;
    OcoStepTrace trace_;
};

/// Drifting-target benchmark: f_t(x) = |x - theta_t|^2 on [0,1]^d with the
/// long-term constraint sum x <= b_t. theta_t moves along sin(t^0.3) so the
/// comparator path length grows sublinearly.
struct RegretBenchConfig {
    Index dim = 4;
    double alpha0 = 0.25;
    double beta0 = 0.5;
    double gamma_fraction = 0.5;  // gamma0 as a fraction of 1 / (sqrt(2) G)
    double kappa = 0.5;
    double c = 0.5;
};

struct RegretPoint {
    Index T = 0;
    double regret = 0.0;
    double path_length = 0.0;
    double violation = 0.0;  // sum_t [g_t(x_t)]_+
    double wall_ms = 0.0;
};

RegretPoint run_regret_benchmark(Index T, const RegretBenchConfig& config = {});

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace hbes
