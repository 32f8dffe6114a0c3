#include "hbes/program.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hbes {

Index StandardFormProgram::num_binaries() const {
    return static_cast<Index>(std::count(binary.begin(), binary.end(), true));
}

bool StandardFormProgram::has_quadratic() const {
    return q.size() > 0 && (q.array() != 0.0).any();
}

double StandardFormProgram::objective(const Vector& x) const {
    double v = c.dot(x) + offset;
    if (q.size() == x.size()) v += 0.5 * (q.array() * x.array().square()).sum();
    return v;
}

void StandardFormProgram::check() const {
    const Index n = num_vars();
    if (lb.size() != n || ub.size() != n)
        throw std::invalid_argument("program: bound vectors do not match variable count");
    if (q.size() != 0 && q.size() != n)
        throw std::invalid_argument("program: quadratic diagonal has wrong length");
    if (A_in.cols() != n || A_eq.cols() != n)
        throw std::invalid_argument("program: constraint matrix column count mismatch");
    if (A_in.rows() != b_in.size() || A_eq.rows() != b_eq.size())
        throw std::invalid_argument("program: constraint rhs length mismatch");
    if (!binary.empty() && static_cast<Index>(binary.size()) != n)
        throw std::invalid_argument("program: integrality mask has wrong length");
    if (q.size() != 0 && (q.array() < 0.0).any())
        throw std::invalid_argument("program: quadratic diagonal must be non-negative");
    for (Index j = 0; j < n; ++j) {
        if (lb[j] > ub[j])
            throw std::invalid_argument("program: lower bound exceeds upper bound for variable " +
                                        std::to_string(j));
        if (!binary.empty() && binary[static_cast<std::size_t>(j)] && (lb[j] < 0.0 || ub[j] > 1.0))
            throw std::invalid_argument("program: binary bounds must lie in [0,1]");
    }
}

Index ProgramBuilder::add_var(std::string name, double lb, double ub, double cost, bool is_binary) {
    c_.push_back(cost);
    q_.push_back(0.0);
    lb_.push_back(lb);
    ub_.push_back(ub);
    binary_.push_back(is_binary);
    names_.push_back(std::move(name));
    return static_cast<Index>(c_.size()) - 1;
}

void ProgramBuilder::set_bounds(Index var, double lb, double ub) {
    lb_[static_cast<std::size_t>(var)] = lb;
    ub_[static_cast<std::size_t>(var)] = ub;
}

void ProgramBuilder::add_le(std::vector<Term> terms, double rhs, std::string name) {
    const auto row = static_cast<Index>(b_in_.size());
    for (const auto& t : terms)
        if (t.coef != 0.0) in_.emplace_back(row, t.var, t.coef);
    b_in_.push_back(rhs);
    in_names_.push_back(std::move(name));
}

void ProgramBuilder::add_ge(std::vector<Term> terms, double rhs, std::string name) {
    for (auto& t : terms) t.coef = -t.coef;
    add_le(std::move(terms), -rhs, std::move(name));
}

void ProgramBuilder::add_eq(std::vector<Term> terms, double rhs, std::string name) {
    const auto row = static_cast<Index>(b_eq_.size());
    for (const auto& t : terms)
        if (t.coef != 0.0) eq_.emplace_back(row, t.var, t.coef);
    b_eq_.push_back(rhs);
    eq_names_.push_back(std::move(name));
}

StandardFormProgram ProgramBuilder::build() const {
    StandardFormProgram p;
    const auto n = static_cast<Index>(c_.size());
    p.c = Eigen::Map<const Vector>(c_.data(), n);
    p.q = Eigen::Map<const Vector>(q_.data(), n);
    p.offset = offset_;
    p.lb = Eigen::Map<const Vector>(lb_.data(), n);
    p.ub = Eigen::Map<const Vector>(ub_.data(), n);
    p.binary = binary_;
    p.names = names_;
    p.A_in.resize(static_cast<Index>(b_in_.size()), n);
    p.A_in.setFromTriplets(in_.begin(), in_.end());
    p.A_eq.resize(static_cast<Index>(b_eq_.size()), n);
    p.A_eq.setFromTriplets(eq_.begin(), eq_.end());
    p.b_in = Eigen::Map<const Vector>(b_in_.data(), static_cast<Index>(b_in_.size()));
    p.b_eq = Eigen::Map<const Vector>(b_eq_.data(), static_cast<Index>(b_eq_.size()));
    p.row_names_in = in_names_;
    p.row_names_eq = eq_names_;
    return p;
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::Unbounded: return "Unbounded";
        case SolveStatus::LimitHit: return "LimitHit";
    }
    return "?";
}

double max_violation(const StandardFormProgram& p, const Vector& x) {
    double v = 0.0;
    if (p.num_in() > 0) v = std::max(v, (p.A_in * x - p.b_in).maxCoeff());
    if (p.num_eq() > 0) v = std::max(v, (p.A_eq * x - p.b_eq).cwiseAbs().maxCoeff());
    for (Index j = 0; j < x.size(); ++j) {
        v = std::max(v, p.lb[j] - x[j]);
        v = std::max(v, x[j] - p.ub[j]);
    }
    return v;
}

}  // namespace hbes
