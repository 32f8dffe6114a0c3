// Bounded-variable two-phase primal simplex on a dense row-major tableau.
//
// Every structural column is rewritten as a non-negative variable y with an
// optional finite upper bound (shift by the lower bound, flip when only the
// upper bound is finite, split when free). Inequality rows receive slacks,
// every row receives an artificial, and the artificials are fixed at zero
// after phase 1 so that redundant rows need no special handling.

#include "hbes/solver.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace hbes {
namespace {

enum class ColKind { Shift, Flip, SplitPos, SplitNeg, Slack, Artificial };
enum class ColState { Basic, AtLower, AtUpper };

struct Column {
    ColKind kind;
    Index source;  // structural variable or row index
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tableau {
public:
    Tableau(const StandardFormProgram& p, const SolveOptions& opt) : p_(p), opt_(opt) { setup(); }

    Solution run() {
        Solution sol;
        auto st = iterate(/*phase=*/1);
        if (st == SolveStatus::LimitHit) return finish(sol, st);
        double infeas = 0.0;
        for (Index i = 0; i < m_; ++i)
            if (cols_[basis_[i]].kind == ColKind::Artificial) infeas += xb_[i];
        if (infeas > opt_.feasibility_tol) return finish(sol, SolveStatus::Infeasible);
        for (Index j = art_begin_; j < ncols_; ++j) upper_[j] = 0.0;
        reset_costs(/*phase=*/2);
        st = iterate(2);
        return finish(sol, st);
    }

private:
    void setup() {
        const Index n = p_.num_vars();
        const Index me = p_.num_eq();
        const Index mi = p_.num_in();
        m_ = me + mi;

        // Dense copy of the rows: equalities first, then inequalities.
        Matrix A = Matrix::Zero(m_, n);
        Vector b(m_);
        if (me > 0) {
            A.topRows(me) = Matrix(p_.A_eq);
            b.head(me) = p_.b_eq;
        }
        if (mi > 0) {
            A.bottomRows(mi) = Matrix(p_.A_in);
            b.tail(mi) = p_.b_in;
        }

        std::vector<Column> cols;
        std::vector<double> upper, cost;
        std::vector<Vector> colvec;
        const_obj_ = p_.offset;
        for (Index j = 0; j < n; ++j) {
            const double l = p_.lb[j], u = p_.ub[j], c = p_.c[j];
            if (std::isfinite(l)) {
                cols.push_back({ColKind::Shift, j});
                upper.push_back(std::isfinite(u) ? u - l : kInf);
                cost.push_back(c);
                colvec.push_back(A.col(j));
                b -= A.col(j) * l;
                const_obj_ += c * l;
            } else if (std::isfinite(u)) {
                cols.push_back({ColKind::Flip, j});
                upper.push_back(kInf);
                cost.push_back(-c);
                colvec.push_back(-A.col(j));
                b -= A.col(j) * u;
                const_obj_ += c * u;
            } else {
                cols.push_back({ColKind::SplitPos, j});
                upper.push_back(kInf);
                cost.push_back(c);
                colvec.push_back(A.col(j));
                cols.push_back({ColKind::SplitNeg, j});
                upper.push_back(kInf);
                cost.push_back(-c);
                colvec.push_back(-A.col(j));
            }
        }
        for (Index r = 0; r < mi; ++r) {
            cols.push_back({ColKind::Slack, me + r});
            upper.push_back(kInf);
            cost.push_back(0.0);
            Vector e = Vector::Zero(m_);
            e[me + r] = 1.0;
            colvec.push_back(e);
        }
        art_begin_ = static_cast<Index>(cols.size());
        for (Index r = 0; r < m_; ++r) {
            cols.push_back({ColKind::Artificial, r});
            upper.push_back(kInf);
            cost.push_back(0.0);
        }
        ncols_ = static_cast<Index>(cols.size());
        cols_ = std::move(cols);
        upper_ = Eigen::Map<Vector>(upper.data(), ncols_);
        cost_ = Eigen::Map<Vector>(cost.data(), ncols_);

        row_sign_ = Vector::Ones(m_);
        for (Index r = 0; r < m_; ++r)
            if (b[r] < 0.0) row_sign_[r] = -1.0;

        T_ = RowMajorMatrix::Zero(m_, ncols_);
        for (Index j = 0; j < art_begin_; ++j)
            T_.col(j) = colvec[static_cast<std::size_t>(j)].cwiseProduct(row_sign_);
        for (Index r = 0; r < m_; ++r) T_(r, art_begin_ + r) = 1.0;

        xb_ = b.cwiseProduct(row_sign_);
        basis_.resize(static_cast<std::size_t>(m_));
        state_.assign(static_cast<std::size_t>(ncols_), ColState::AtLower);
        for (Index r = 0; r < m_; ++r) {
            basis_[static_cast<std::size_t>(r)] = art_begin_ + r;
            state_[static_cast<std::size_t>(art_begin_ + r)] = ColState::Basic;
        }
        reset_costs(1);
    }

    double phase_cost(Index j, int phase) const {
        if (phase == 1) return cols_[static_cast<std::size_t>(j)].kind == ColKind::Artificial ? 1.0 : 0.0;
        return cost_[j];
    }

    void reset_costs(int phase) {
        d_.resize(ncols_);
        for (Index j = 0; j < ncols_; ++j) d_[j] = phase_cost(j, phase);
        for (Index i = 0; i < m_; ++i) {
            const double cb = phase_cost(basis_[static_cast<std::size_t>(i)], phase);
            if (cb != 0.0) d_ -= cb * T_.row(i).transpose();
        }
    }

    SolveStatus iterate(int phase) {
        const double dtol = 1e-9;
        const double ptol = 1e-9;
        const std::int64_t cap = 50 * (m_ + ncols_) + 1000;
        std::int64_t local = 0;
        while (true) {
            if (++local > cap) return SolveStatus::LimitHit;
            const bool bland = pivots_ >= opt_.bland_after;

            // Pricing.
            Index q = -1;
            double best = 0.0;
            for (Index j = 0; j < ncols_; ++j) {
                const auto sj = state_[static_cast<std::size_t>(j)];
                if (sj == ColState::Basic) continue;
                if (j >= art_begin_ && phase == 2) continue;
                double score = 0.0;
                if (sj == ColState::AtLower && d_[j] < -dtol) score = -d_[j];
                else if (sj == ColState::AtUpper && d_[j] > dtol) score = d_[j];
                if (score <= 0.0) continue;
                if (bland) {
                    q = j;
                    break;
                }
                if (score > best) {
                    best = score;
                    q = j;
                }
            }
            if (q < 0) return SolveStatus::Optimal;

            const double dir = state_[static_cast<std::size_t>(q)] == ColState::AtLower ? 1.0 : -1.0;

            // Ratio test.
            double theta = upper_[q];  // bound flip
            Index leave = -1;
            bool leave_to_upper = false;
            double leave_pivot = 0.0;
            for (Index i = 0; i < m_; ++i) {
                const double a = dir * T_(i, q);
                const Index bj = basis_[static_cast<std::size_t>(i)];
                double t = kInf;
                bool to_upper = false;
                if (a > ptol) {
                    t = std::max(xb_[i], 0.0) / a;
                } else if (a < -ptol && std::isfinite(upper_[bj])) {
                    t = std::max(upper_[bj] - xb_[i], 0.0) / (-a);
                    to_upper = true;
                } else {
                    continue;
                }
                bool take = false;
                if (t < theta - 1e-12) take = true;
                else if (t <= theta + 1e-12 && leave >= 0) {
                    if (bland) take = bj < basis_[static_cast<std::size_t>(leave)];
                    else take = std::abs(a) > std::abs(leave_pivot);
                }
                if (take) {
                    theta = t;
                    leave = i;
                    leave_to_upper = to_upper;
                    leave_pivot = a;
                }
            }
            if (!std::isfinite(theta)) return SolveStatus::Unbounded;

            ++pivots_;
            if (leave < 0) {
                // Entering variable moves to its opposite bound.
                xb_ -= dir * theta * T_.col(q);
                state_[static_cast<std::size_t>(q)] =
                    dir > 0 ? ColState::AtUpper : ColState::AtLower;
                continue;
            }

            const double enter_value = (dir > 0 ? 0.0 : upper_[q]) + dir * theta;
            xb_ -= dir * theta * T_.col(q);
            const Index old = basis_[static_cast<std::size_t>(leave)];
            state_[static_cast<std::size_t>(old)] = leave_to_upper ? ColState::AtUpper : ColState::AtLower;

            // Pivot on (leave, q).
            const double piv = T_(leave, q);
            T_.row(leave) /= piv;
            for (Index i = 0; i < m_; ++i) {
                if (i == leave) continue;
                const double f = T_(i, q);
                if (f != 0.0) T_.row(i) -= f * T_.row(leave);
            }
            const double dq = d_[q];
            if (dq != 0.0) d_ -= dq * T_.row(leave).transpose();
            basis_[static_cast<std::size_t>(leave)] = q;
            state_[static_cast<std::size_t>(q)] = ColState::Basic;
            xb_[leave] = enter_value;
        }
    }

    Solution& finish(Solution& sol, SolveStatus st) {
        sol.status = st;
        sol.iterations = pivots_;
        if (st != SolveStatus::Optimal) return sol;

        Vector y = Vector::Zero(ncols_);
        for (Index j = 0; j < ncols_; ++j) {
            const auto sj = state_[static_cast<std::size_t>(j)];
            if (sj == ColState::AtUpper) y[j] = upper_[j];
        }
        for (Index i = 0; i < m_; ++i) y[basis_[static_cast<std::size_t>(i)]] = xb_[i];

        const Index n = p_.num_vars();
        sol.x = Vector::Zero(n);
        for (Index j = 0; j < art_begin_; ++j) {
            const auto& col = cols_[static_cast<std::size_t>(j)];
            switch (col.kind) {
                case ColKind::Shift: sol.x[col.source] = p_.lb[col.source] + y[j]; break;
                case ColKind::Flip: sol.x[col.source] = p_.ub[col.source] - y[j]; break;
                case ColKind::SplitPos: sol.x[col.source] += y[j]; break;
                case ColKind::SplitNeg: sol.x[col.source] -= y[j]; break;
                default: break;
            }
        }
        sol.objective = p_.objective(sol.x);

        // Row multipliers: y_flipped = -reduced cost of the artificial columns.
        const Index me = p_.num_eq();
        sol.dual_eq = Vector::Zero(me);
        sol.dual_in = Vector::Zero(p_.num_in());
        for (Index r = 0; r < m_; ++r) {
            const double yr = -d_[art_begin_ + r] * row_sign_[r];
            if (r < me) sol.dual_eq[r] = yr;
            else sol.dual_in[r - me] = yr;
        }
        return sol;
    }

    const StandardFormProgram& p_;
    const SolveOptions& opt_;
    Index m_ = 0, ncols_ = 0, art_begin_ = 0;
    std::vector<Column> cols_;
    Vector upper_, cost_, row_sign_, xb_, d_;
    RowMajorMatrix T_;
    std::vector<Index> basis_;
    std::vector<ColState> state_;
    double const_obj_ = 0.0;
    std::int64_t pivots_ = 0;
};

}  // namespace

Solution solve_lp(const StandardFormProgram& program, const SolveOptions& options) {
    program.check();
    if (program.num_binaries() > 0)
        throw std::invalid_argument("solve_lp: program has binary variables, use solve_milp");
    if (program.has_quadratic())
        throw std::invalid_argument("solve_lp: program has quadratic terms, use solve_qp");
    const auto t0 = std::chrono::steady_clock::now();
    Tableau tab(program, options);
    Solution sol = tab.run();
    sol.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

}  // namespace hbes
