// Mehrotra predictor-corrector interior point method for
//
//   min 0.5 v' D v + c' v   s.t.  A v = b,  l <= v <= u
//
// where v stacks the structural variables and one slack per inequality row.
// Fixed variables are substituted out, rows are equilibrated, and each Newton
// step is reduced to the normal equations (A H^-1 A' + dI) dy = r, factorized
// with a sparse LDL' whose symbolic analysis is reused across iterations.

#include "hbes/solver.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace hbes {
namespace {

using SpMat = Eigen::SparseMatrix<double>;

struct Reduced {
    SpMat A;  // rows x free columns
    Vector b, c, d, l, u;
    Vector row_scale;
    std::vector<Index> col_of;  // reduced column -> combined column
    Index n_struct = 0;
    Index m_eq = 0;
};

// Relative complementarity gap accepted when no further progress is made.
constexpr double kStallGap = 1e-5;

double step_to_boundary(const Vector& x, const Vector& dx) {
    double a = 1.0;
    for (Index i = 0; i < x.size(); ++i)
        if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
    return a;
}

}  // namespace

Solution solve_qp(const StandardFormProgram& p, const SolveOptions& opt) {
    p.check();
    const auto t0 = std::chrono::steady_clock::now();
    const Index n = p.num_vars();
    const Index me = p.num_eq();
    const Index mi = p.num_in();
    const Index m = me + mi;
    const Index ncomb = n + mi;

    // Combined bounds/costs over [x; s].
    Vector L(ncomb), U(ncomb), C = Vector::Zero(ncomb), Dg = Vector::Zero(ncomb);
    L.head(n) = p.lb;
    U.head(n) = p.ub;
    L.tail(mi).setZero();
    U.tail(mi).setConstant(kInf);
    C.head(n) = p.c;
    if (p.q.size() == n) Dg.head(n) = p.q;

    Vector B(m);
    if (me) B.head(me) = p.b_eq;
    if (mi) B.tail(mi) = p.b_in;

    // Substitute fixed structural variables.
    std::vector<Index> col_of;
    std::vector<Index> red_of(static_cast<std::size_t>(ncomb), -1);
    Vector fixed = Vector::Zero(ncomb);
    for (Index j = 0; j < ncomb; ++j) {
        if (std::isfinite(L[j]) && std::isfinite(U[j]) && U[j] - L[j] <= 1e-12) {
            fixed[j] = 0.5 * (L[j] + U[j]);
        } else {
            red_of[static_cast<std::size_t>(j)] = static_cast<Index>(col_of.size());
            col_of.push_back(j);
        }
    }
    const Index nr = static_cast<Index>(col_of.size());

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(p.A_eq.nonZeros() + p.A_in.nonZeros() + mi));
    Vector rhs = B;
    auto push = [&](Index row, Index comb, double v) {
        const Index r = red_of[static_cast<std::size_t>(comb)];
        if (r >= 0) trip.emplace_back(row, r, v);
        else rhs[row] -= v * fixed[comb];
    };
    for (Index i = 0; i < me; ++i)
        for (SparseRows::InnerIterator it(p.A_eq, i); it; ++it) push(i, it.col(), it.value());
    for (Index i = 0; i < mi; ++i) {
        for (SparseRows::InnerIterator it(p.A_in, i); it; ++it) push(me + i, it.col(), it.value());
        push(me + i, n + i, 1.0);
    }
    SpMat A(m, nr);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();

    // Row equilibration; empty rows must have zero right-hand side.
    Vector rs = Vector::Ones(m);
    {
        Vector rmax = Vector::Zero(m);
        for (Index k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it)
                rmax[it.row()] = std::max(rmax[it.row()], std::abs(it.value()));
        for (Index i = 0; i < m; ++i) {
            if (rmax[i] > 0.0) rs[i] = 1.0 / rmax[i];
            else if (std::abs(rhs[i]) > opt.feasibility_tol) {
                Solution sol;
                sol.status = SolveStatus::Infeasible;
                sol.message = "empty row with non-zero right-hand side";
                return sol;
            }
        }
    }
    A = rs.asDiagonal() * A;
    Vector b = rs.cwiseProduct(rhs);

    Vector c(nr), d(nr), l(nr), u(nr);
    for (Index k = 0; k < nr; ++k) {
        const Index j = col_of[static_cast<std::size_t>(k)];
        c[k] = C[j];
        d[k] = Dg[j];
        l[k] = L[j];
        u[k] = U[j];
    }
    const double cscale = std::max({1.0, c.cwiseAbs().maxCoeff(), d.size() ? d.cwiseAbs().maxCoeff() : 0.0});
    c /= cscale;
    d /= cscale;

    std::vector<Index> lo_idx, up_idx;
    for (Index k = 0; k < nr; ++k) {
        if (std::isfinite(l[k])) lo_idx.push_back(k);
        if (std::isfinite(u[k])) up_idx.push_back(k);
    }
    const Index nl = static_cast<Index>(lo_idx.size());
    const Index nu = static_cast<Index>(up_idx.size());
    const bool quadratic = (d.array() > 0.0).any();

    // Starting point: bounded variables at their midpoint, one-sided ones
    // one unit inside, unit bound multipliers.
    Vector v(nr), y(m), zl(nl), zu(nu);
    auto reset = [&] {
        for (Index k = 0; k < nr; ++k) {
            const bool fl = std::isfinite(l[k]), fu = std::isfinite(u[k]);
            if (fl && fu) v[k] = l[k] + 0.5 * (u[k] - l[k]);
            else if (fl) v[k] = l[k] + 1.0;
            else if (fu) v[k] = u[k] - 1.0;
            else v[k] = 0.0;
        }
        y.setZero();
        zl.setOnes();
        zu.setOnes();
    };

    auto slack_l = [&](const Vector& vv) {
        Vector s(nl);
        for (Index k = 0; k < nl; ++k) s[k] = vv[lo_idx[static_cast<std::size_t>(k)]] - l[lo_idx[static_cast<std::size_t>(k)]];
        return s;
    };
    auto slack_u = [&](const Vector& vv) {
        Vector s(nu);
        for (Index k = 0; k < nu; ++k) s[k] = u[up_idx[static_cast<std::size_t>(k)]] - vv[up_idx[static_cast<std::size_t>(k)]];
        return s;
    };
    auto scatter_l = [&](const Vector& s) {
        Vector out = Vector::Zero(nr);
        for (Index k = 0; k < nl; ++k) out[lo_idx[static_cast<std::size_t>(k)]] += s[k];
        return out;
    };
    auto scatter_u = [&](const Vector& s) {
        Vector out = Vector::Zero(nr);
        for (Index k = 0; k < nu; ++k) out[up_idx[static_cast<std::size_t>(k)]] += s[k];
        return out;
    };
    auto gather_l = [&](const Vector& vv) {
        Vector out(nl);
        for (Index k = 0; k < nl; ++k) out[k] = vv[lo_idx[static_cast<std::size_t>(k)]];
        return out;
    };
    auto gather_u = [&](const Vector& vv) {
        Vector out(nu);
        for (Index k = 0; k < nu; ++k) out[k] = vv[up_idx[static_cast<std::size_t>(k)]];
        return out;
    };

    const SpMat At = A.transpose();
    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool analyzed = false;
    const double reg_p = 1e-10, reg_d = 1e-10;
    SpMat Ieye(m, m);
    Ieye.setIdentity();

    const double tol = std::min(opt.optimality_tol, 1e-8);
    const double bnorm = 1.0 + (b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
    const double cnorm = 1.0 + c.cwiseAbs().maxCoeff();

    enum class Run { Optimal, Unbounded, Failed };
    std::string message;
    std::int64_t total_it = 0;

    // One interior point run from the starting point. The Mehrotra variant is
    // fast but can stall or cycle on degenerate programs; the conservative
    // variant (fixed centering, no second-order correction) is the fallback.
    auto run = [&](bool mehrotra) {
        reset();
        for (std::int64_t it = 0; it < opt.iteration_limit; ++it, ++total_it) {
            const Vector xl = slack_l(v), xu = slack_u(v);
            const Vector rp = b - A * v;
            const Vector rd = d.cwiseProduct(v) + c - At * y - scatter_l(zl) + scatter_u(zu);
            const double compl_sum = xl.dot(zl) + xu.dot(zu);
            const Index ncompl = nl + nu;
            const double mu = ncompl ? compl_sum / static_cast<double>(ncompl) : 0.0;
            const double pobj = 0.5 * v.dot(d.cwiseProduct(v)) + c.dot(v);

            const double pres = rp.size() ? rp.cwiseAbs().maxCoeff() / bnorm : 0.0;
            const double dres = rd.cwiseAbs().maxCoeff() / cnorm;
            const double gap = compl_sum / (1.0 + std::abs(pobj));
            if (pres <= tol && dres <= tol && gap <= tol) return Run::Optimal;
            if (v.cwiseAbs().maxCoeff() > 1e15) return Run::Unbounded;

            // H = D + Zl/Xl + Zu/Xu + reg.
            Vector H = d + scatter_l(zl.cwiseQuotient(xl)) + scatter_u(zu.cwiseQuotient(xu));
            H.array() += reg_p;
            const Vector Hinv = H.cwiseInverse();

            SpMat N = A * Hinv.asDiagonal() * At;
            N += reg_d * Ieye;
            if (!analyzed) {
                ldlt.analyzePattern(N);
                analyzed = true;
            }
            ldlt.factorize(N);
            if (ldlt.info() != Eigen::Success) {
                message = "normal equations factorization failed";
                return Run::Failed;
            }

            Vector dv, dy, dzl, dzu;
            auto solve_dir = [&](const Vector& rl, const Vector& ru) {
                // rv = -rd + rl/xl - ru/xu
                const Vector rv = -rd + scatter_l(rl.cwiseQuotient(xl)) - scatter_u(ru.cwiseQuotient(xu));
                const Vector t = Hinv.cwiseProduct(rv);
                const Vector r = rp - A * t;
                dy = ldlt.solve(r);
                for (int k = 0; k < 2; ++k) dy += ldlt.solve(r - N * dy);  // iterative refinement
                dv = Hinv.cwiseProduct(rv + At * dy);
                dzl = (rl - zl.cwiseProduct(gather_l(dv))).cwiseQuotient(xl);
                dzu = (ru + zu.cwiseProduct(gather_u(dv))).cwiseQuotient(xu);
            };
            double ap = 1.0, ad = 1.0;
            auto steps = [&](double frac) {
                const Vector dxl = gather_l(dv), dxu = -gather_u(dv);
                ap = std::min(1.0, frac * std::min(step_to_boundary(xl, dxl), step_to_boundary(xu, dxu)));
                ad = std::min(1.0, frac * std::min(step_to_boundary(zl, dzl), step_to_boundary(zu, dzu)));
                if (quadratic) ap = ad = std::min(ap, ad);
                if (!ncompl) return 0.0;
                return ((xl + ap * dxl).dot(zl + ad * dzl) + (xu + ap * dxu).dot(zu + ad * dzu)) /
                       static_cast<double>(ncompl);
            };

            if (mehrotra) {
                solve_dir(-xl.cwiseProduct(zl), -xu.cwiseProduct(zu));
                const Vector dxl_a = gather_l(dv), dxu_a = -gather_u(dv);
                const Vector dzl_a = dzl, dzu_a = dzu;
                const double mu_aff = steps(1.0);
                const double sigma = std::min(1.0, std::pow(std::max(mu_aff, 0.0) / std::max(mu, 1e-300), 3.0));
                solve_dir(Vector::Constant(nl, sigma * mu) - xl.cwiseProduct(zl) - dxl_a.cwiseProduct(dzl_a),
                          Vector::Constant(nu, sigma * mu) - xu.cwiseProduct(zu) - dxu_a.cwiseProduct(dzu_a));
                const double mu_new = steps(0.995);
                // Near a degenerate optimum the corrected step can raise
                // complementarity and the iterates cycle; hand over to the
                // conservative run instead.
                if (pres <= tol && dres <= tol && mu_new > mu) {
                    if (gap <= kStallGap) return Run::Optimal;
                    message = "predictor-corrector stalled";
                    return Run::Failed;
                }
            } else {
                solve_dir(Vector::Constant(nl, 0.3 * mu) - xl.cwiseProduct(zl),
                          Vector::Constant(nu, 0.3 * mu) - xu.cwiseProduct(zu));
                steps(0.95);
            }
            if (!dv.allFinite() || !dy.allFinite() || !dzl.allFinite() || !dzu.allFinite()) {
                message = "non-finite search direction";
                return Run::Failed;
            }
            if (pres <= tol && dres <= tol && gap <= kStallGap &&
                ap * dv.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + v.cwiseAbs().maxCoeff()))
                return Run::Optimal;

            v += ap * dv;
            y += ad * dy;
            zl += ad * dzl;
            zu += ad * dzu;
        }
        message = "iteration limit";
        return Run::Failed;
    };

    Solution sol;
    Run outcome = run(true);
    if (outcome == Run::Failed) outcome = run(false);
    sol.status = outcome == Run::Optimal     ? SolveStatus::Optimal
                 : outcome == Run::Unbounded ? SolveStatus::Unbounded
                                             : SolveStatus::LimitHit;
    if (outcome != Run::Optimal) sol.message = message;
    sol.iterations = total_it;

    // Map back.
    Vector comb = fixed;
    for (Index k = 0; k < nr; ++k) comb[col_of[static_cast<std::size_t>(k)]] = v[k];
    sol.x = comb.head(n);
    // Clip tiny bound excursions.
    for (Index j = 0; j < n; ++j) sol.x[j] = std::clamp(sol.x[j], p.lb[j], p.ub[j]);
    sol.objective = p.objective(sol.x);

    const Vector yo = rs.cwiseProduct(y) * cscale;
    sol.dual_eq = yo.head(me);
    sol.dual_in = yo.tail(mi);
    sol.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

}  // namespace hbes
