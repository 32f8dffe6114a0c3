// Best-bound branch and bound over binary variables with LP relaxations.
//
// Nodes carry only their bound vectors; the relaxation is solved when a node
// is popped (lazy evaluation), so the queue key is the parent's LP value.
// Ties in the key are broken by creation order, which makes the search order
// a pure function of the program.

#include "hbes/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace hbes {
namespace {

struct Node {
    Vector lb, ub;
    double key;
    std::int64_t seq;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.key != b.key) return a.key > b.key;
        return a.seq > b.seq;
    }
};

// Equality rows of the form sum z_k = 1 over binaries with unit coefficients.
std::vector<std::vector<Index>> one_hot_groups(const StandardFormProgram& p) {
    std::vector<std::vector<Index>> groups;
    for (Index r = 0; r < p.num_eq(); ++r) {
        if (std::abs(p.b_eq[r] - 1.0) > 1e-12) continue;
        std::vector<Index> g;
        bool ok = true;
        for (SparseRows::InnerIterator it(p.A_eq, r); it; ++it) {
            if (!p.binary[static_cast<std::size_t>(it.col())] || std::abs(it.value() - 1.0) > 1e-12) {
                ok = false;
                break;
            }
            g.push_back(it.col());
        }
        if (ok && !g.empty()) groups.push_back(std::move(g));
    }
    return groups;
}

class BranchAndBound {
public:
    BranchAndBound(const StandardFormProgram& p, const SolveOptions& opt)
        : p_(p), opt_(opt), groups_(one_hot_groups(p)), t0_(std::chrono::steady_clock::now()) {
        for (Index j = 0; j < p.num_vars(); ++j)
            if (p.binary[static_cast<std::size_t>(j)]) binaries_.push_back(j);
    }

    Solution run() {
        StandardFormProgram relax = p_;
        relax.binary.assign(static_cast<std::size_t>(p_.num_vars()), false);

        std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
        open.push({p_.lb, p_.ub, -kInf, seq_++});
        std::int64_t lp_iters = 0;
        bool limit = false;

        while (!open.empty()) {
            if (nodes_ >= opt_.node_limit || elapsed_s() > opt_.time_limit_s) {
                limit = true;
                break;
            }
            Node node = open.top();
            open.pop();
            if (node.key >= cutoff()) continue;
            ++nodes_;

            relax.lb = node.lb;
            relax.ub = node.ub;
            Solution lp = solve_lp(relax, opt_);
            lp_iters += lp.iterations;
            if (lp.status == SolveStatus::Unbounded && nodes_ == 1) {
                Solution out;
                out.status = SolveStatus::Unbounded;
                out.nodes = nodes_;
                return finish(out, lp_iters);
            }
            if (lp.status != SolveStatus::Optimal) continue;
            if (lp.objective >= cutoff()) continue;

            const Index j = branch_variable(lp.x);
            if (j < 0) {
                update_incumbent(lp.x, lp.objective);
                continue;
            }
            if (nodes_ <= 50 || nodes_ % 20 == 0) lp_iters += round_and_fix(relax, node, lp.x);

            Node down{node.lb, node.ub, lp.objective, seq_++};
            down.ub[j] = 0.0;
            Node up{node.lb, node.ub, lp.objective, seq_++};
            up.lb[j] = 1.0;
            open.push(std::move(down));
            open.push(std::move(up));
        }

        Solution out;
        out.nodes = nodes_;
        if (limit) {
            out.status = SolveStatus::LimitHit;
            double bound = best_obj_;
            while (!open.empty()) {
                bound = std::min(bound, open.top().key);
                open.pop();
            }
            out.bound = bound;
            out.message = "node or time limit reached";
        } else {
            out.status = has_incumbent_ ? SolveStatus::Optimal : SolveStatus::Infeasible;
            out.bound = best_obj_;
        }
        return finish(out, lp_iters);
    }

private:
    double elapsed_s() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

    double cutoff() const {
        if (!has_incumbent_) return kInf;
        return best_obj_ - 1e-9 * std::max(1.0, std::abs(best_obj_));
    }

    Index branch_variable(const Vector& x) const {
        Index best = -1;
        double best_frac = opt_.integrality_tol;
        for (Index j : binaries_) {
            const double f = std::abs(x[j] - std::round(x[j]));
            if (f > best_frac) {
                best_frac = f;
                best = j;
            }
        }
        return best;
    }

    void update_incumbent(Vector x, double obj) {
        for (Index j : binaries_) x[j] = std::round(x[j]);
        if (has_incumbent_ && obj >= best_obj_) return;
        has_incumbent_ = true;
        best_obj_ = obj;
        best_x_ = std::move(x);
        trace_.push_back(obj);
    }

    // Fix every binary at a rounded value and solve the remaining LP.
    std::int64_t round_and_fix(StandardFormProgram& relax, const Node& node, const Vector& x) {
        Vector target = x;
        for (Index j : binaries_) target[j] = std::round(x[j]);
        for (const auto& g : groups_) {
            Index arg = g.front();
            for (Index k : g)
                if (x[k] > x[arg]) arg = k;
            for (Index k : g) target[k] = (k == arg) ? 1.0 : 0.0;
        }
        relax.lb = node.lb;
        relax.ub = node.ub;
        for (Index j : binaries_) {
            const double v = std::clamp(target[j], node.lb[j], node.ub[j]);
            relax.lb[j] = relax.ub[j] = v;
        }
        Solution lp = solve_lp(relax, opt_);
        if (lp.status == SolveStatus::Optimal && lp.objective < cutoff()) update_incumbent(lp.x, lp.objective);
        return lp.iterations;
    }

    Solution& finish(Solution& out, std::int64_t lp_iters) {
        out.iterations = lp_iters;
        out.incumbent_trace = trace_;
        if (has_incumbent_) {
            out.x = best_x_;
            out.objective = p_.objective(best_x_);
        }
        out.wall_ms = elapsed_s() * 1000.0;
        return out;
    }

    const StandardFormProgram& p_;
    const SolveOptions& opt_;
    std::vector<std::vector<Index>> groups_;
    std::vector<Index> binaries_;
    std::chrono::steady_clock::time_point t0_;
    std::int64_t nodes_ = 0, seq_ = 0;
    bool has_incumbent_ = false;
    double best_obj_ = kInf;
    Vector best_x_;
    std::vector<double> trace_;
};

}  // namespace

Solution solve_milp(const StandardFormProgram& program, const SolveOptions& options) {
    program.check();
    if (program.has_quadratic())
        throw std::invalid_argument("solve_milp: quadratic objectives are not supported");
    if (program.num_binaries() == 0) return solve_lp(program, options);
    BranchAndBound bb(program, options);
    return bb.run();
}

}  // namespace hbes
