#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace hbes {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A linear/quadratic/mixed-binary program in the form
///
///   min  0.5 x' diag(q) x + c' x + offset
///   s.t. A_in x <= b_in,  A_eq x = b_eq,  lb <= x <= ub,  x_j in {0,1} for binary j.
struct StandardFormProgram {
    Vector c;
    Vector q;  // diagonal of the quadratic term, empty or all zero for LPs
    double offset = 0.0;
    SparseRows A_in;
    Vector b_in;
    SparseRows A_eq;
    Vector b_eq;
    Vector lb;
    Vector ub;
    std::vector<bool> binary;
    std::vector<std::string> names;
    std::vector<std::string> row_names_in;
    std::vector<std::string> row_names_eq;

    Index num_vars() const { return c.size(); }
    Index num_in() const { return A_in.rows(); }
    Index num_eq() const { return A_eq.rows(); }
    Index num_binaries() const;
    bool has_quadratic() const;

    double objective(const Vector& x) const;

    /// Throws std::invalid_argument on inconsistent dimensions, non-convex
    /// quadratic, or binaries with bounds outside [0,1].
    void check() const;
};

/// Incremental assembly of a StandardFormProgram.
class ProgramBuilder {
public:
    struct Term {
        Index var;
        double coef;
    };

    Index add_var(std::string name, double lb, double ub, double cost = 0.0, bool is_binary = false);
    void set_cost(Index var, double cost) { c_[static_cast<std::size_t>(var)] = cost; }
    void add_cost(Index var, double cost) { c_[static_cast<std::size_t>(var)] += cost; }
    void add_quadratic(Index var, double q) { q_[static_cast<std::size_t>(var)] += q; }
    void add_offset(double v) { offset_ += v; }
    void set_bounds(Index var, double lb, double ub);
    double lower(Index var) const { return lb_[static_cast<std::size_t>(var)]; }
    double upper(Index var) const { return ub_[static_cast<std::size_t>(var)]; }

    void add_le(std::vector<Term> terms, double rhs, std::string name = {});
    void add_ge(std::vector<Term> terms, double rhs, std::string name = {});
    void add_eq(std::vector<Term> terms, double rhs, std::string name = {});

    Index num_vars() const { return static_cast<Index>(c_.size()); }

    StandardFormProgram build() const;

private:
    std::vector<double> c_, q_, lb_, ub_;
    std::vector<bool> binary_;
    std::vector<std::string> names_;
    double offset_ = 0.0;
    std::vector<Eigen::Triplet<double>> in_, eq_;
    std::vector<double> b_in_, b_eq_;
    std::vector<std::string> in_names_, eq_names_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, LimitHit };

const char* to_string(SolveStatus s);

struct SolveOptions {
    double feasibility_tol = 1e-6;
    double optimality_tol = 1e-6;
    double integrality_tol = 1e-6;
    std::int64_t node_limit = 200000;
    double time_limit_s = 600.0;
    std::int64_t iteration_limit = 200;  // interior-point iterations
    std::int64_t bland_after = 5000;     // simplex pivots before switching to Bland's rule
    std::uint64_t seed = 0;
};

struct Solution {
    SolveStatus status = SolveStatus::Infeasible;
    double objective = kInf;
    Vector x;
    Vector dual_eq;  // multipliers of A_eq rows (LP only)
    Vector dual_in;  // multipliers of A_in rows, <= 0 at optimality (LP only)
    double bound = -kInf;  // best proven lower bound (MILP)
    std::int64_t nodes = 0;
    std::int64_t iterations = 0;
    double wall_ms = 0.0;
    std::vector<double> incumbent_trace;  // incumbent objective after each improvement
    std::string message;

    bool ok() const { return status == SolveStatus::Optimal; }
};

/// max over rows/bounds of the constraint violation of x.
double max_violation(const StandardFormProgram& p, const Vector& x);

}  // namespace hbes
