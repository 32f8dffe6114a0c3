#include "hbes/piecewise.hpp"

#include "hbes/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hbes {

std::size_t PiecewiseCurve::segment_of(double p) const {
    if (segments.empty()) throw std::invalid_argument("piecewise curve has no segments");
    const double tol = 1e-9 * std::max(1.0, std::abs(p_max()));
    if (!(p >= p_min() - tol && p <= p_max() + tol))
        throw std::domain_error("power " + std::to_string(p) + " kW outside curve domain [" +
                                std::to_string(p_min()) + ", " + std::to_string(p_max()) + "]");
    for (std::size_t k = 0; k + 1 < segments.size(); ++k)
        if (p <= segments[k].p_hi) return k;
    return segments.size() - 1;
}

double PiecewiseCurve::continuity_residual() const {
    double r = 0.0;
    for (std::size_t k = 0; k + 1 < segments.size(); ++k) {
        const double b = segments[k].p_hi;
        r = std::max(r, std::abs(segments[k](b) - segments[k + 1](b)));
    }
    return r;
}

void PiecewiseCurve::validate() const {
    if (segments.empty()) throw std::invalid_argument("piecewise curve has no segments");
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const auto& s = segments[k];
        if (!(s.p_hi > s.p_lo)) throw std::invalid_argument("piecewise curve: empty or reversed segment");
        if (k > 0 && std::abs(s.p_lo - segments[k - 1].p_hi) > 1e-9)
            throw std::invalid_argument("piecewise curve: segments are not contiguous");
    }
    if (continuity_residual() > 1e-6) throw std::invalid_argument("piecewise curve: discontinuous at a breakpoint");
    if (direction == Direction::Charging)
        for (const auto& s : segments)
            if (s(s.p_lo) < -1e-9 || s(s.p_hi) < -1e-9)
                throw std::invalid_argument("piecewise curve: negative charging rate");
}

double eval_piecewise(const PiecewiseCurve& curve, double p) {
    return curve.segments[curve.segment_of(p)](p);
}

namespace {

using Index = Eigen::Index;

struct Prefix {
    std::vector<double> n, sx, sy, sxx, sxy, syy;

    explicit Prefix(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        const auto m = static_cast<std::size_t>(x.size()) + 1;
        n.assign(m, 0);
        sx = sy = sxx = sxy = syy = n;
        for (Index i = 0; i < x.size(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            n[k + 1] = n[k] + 1;
            sx[k + 1] = sx[k] + x[i];
            sy[k + 1] = sy[k] + y[i];
            sxx[k + 1] = sxx[k] + x[i] * x[i];
            sxy[k + 1] = sxy[k] + x[i] * y[i];
            syy[k + 1] = syy[k] + y[i] * y[i];
        }
    }

    // Least-squares line SSE over samples a..b inclusive.
    double sse(Index a, Index b) const {
        const auto lo = static_cast<std::size_t>(a), hi = static_cast<std::size_t>(b) + 1;
        const double N = n[hi] - n[lo], X = sx[hi] - sx[lo], Y = sy[hi] - sy[lo];
        const double XX = sxx[hi] - sxx[lo], XY = sxy[hi] - sxy[lo], YY = syy[hi] - syy[lo];
        const double vx = XX - X * X / N, cxy = XY - X * Y / N, vy = YY - Y * Y / N;
        if (vx <= 0) return std::max(vy, 0.0);
        return std::max(vy - cxy * cxy / vx, 0.0);
    }
};

struct Hinge {
    std::vector<Index> knots;  // sample indices
    Eigen::VectorXd coef;      // [c0?] c1 g1..gK
    double sse = std::numeric_limits<double>::infinity();
};

Hinge hinge_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, std::vector<Index> knots, bool origin) {
    const Index n = x.size();
    const Index off = origin ? 0 : 1;
    const Index k = static_cast<Index>(knots.size());
    Eigen::MatrixXd B(n, off + 1 + k);
    if (!origin) B.col(0).setOnes();
    B.col(off) = x;
    for (Index q = 0; q < k; ++q)
        B.col(off + 1 + q) = (x.array() - x[knots[static_cast<std::size_t>(q)]]).cwiseMax(0.0).matrix();
    Hinge h;
    h.knots = std::move(knots);
    h.coef = B.colPivHouseholderQr().solve(y);
    h.sse = (B * h.coef - y).squaredNorm();
    return h;
}

PiecewiseCurve to_curve(const Hinge& h, const Eigen::VectorXd& x, bool origin, double lo, double hi, Direction dir) {
    const Index off = origin ? 0 : 1;
    const double c0 = origin ? 0.0 : h.coef[0];
    std::vector<double> bps;
    for (Index q : h.knots) bps.push_back(x[q]);
    auto value = [&](double p) {
        double v = c0 + h.coef[off] * p;
        for (std::size_t q = 0; q < bps.size(); ++q) v += h.coef[off + 1 + static_cast<Index>(q)] * std::max(p - bps[q], 0.0);
        return v;
    };
    PiecewiseCurve c;
    c.direction = dir;
    double slope = h.coef[off];
    double start = lo;
    for (std::size_t q = 0; q <= bps.size(); ++q) {
        const double end = q < bps.size() ? bps[q] : hi;
        Segment s{start, end, slope, value(start) - slope * start};
        c.segments.push_back(s);
        if (q < bps.size()) slope += h.coef[off + 1 + static_cast<Index>(q)];
        start = end;
    }
    // Pin every intercept so adjacent segments agree at the shared breakpoint.
    for (std::size_t q = 1; q < c.segments.size(); ++q) {
        auto& s = c.segments[q];
        s.intercept = c.segments[q - 1](s.p_lo) - s.slope * s.p_lo;
    }
    return c;
}

// Breakpoints of the best discontinuous fit with shared endpoint samples.
std::vector<Index> dp_knots(const Prefix& pre, Index n, int segs) {
    const double inf = std::numeric_limits<double>::infinity();
    // best[s][j]: s segments covering samples 0..j ending at j.
    std::vector<std::vector<double>> best(static_cast<std::size_t>(segs) + 1, std::vector<double>(static_cast<std::size_t>(n), inf));
    std::vector<std::vector<Index>> arg(best.size(), std::vector<Index>(static_cast<std::size_t>(n), -1));
    for (Index j = 1; j < n; ++j) best[1][static_cast<std::size_t>(j)] = pre.sse(0, j);
    for (int s = 2; s <= segs; ++s)
        for (Index j = s; j < n; ++j)
            for (Index i = s - 1; i < j; ++i) {
                const double prev = best[static_cast<std::size_t>(s - 1)][static_cast<std::size_t>(i)];
                if (!std::isfinite(prev)) continue;
                const double v = prev + pre.sse(i, j);
                if (v < best[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)]) {
                    best[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)] = v;
                    arg[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)] = i;
                }
            }
    std::vector<Index> knots;
    Index j = n - 1;
    for (int s = segs; s >= 2; --s) {
        j = arg[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
        knots.push_back(j);
    }
    std::reverse(knots.begin(), knots.end());
    return knots;
}

bool valid_knots(const std::vector<Index>& k, Index n) {
    for (std::size_t q = 0; q < k.size(); ++q) {
        if (k[q] < 1 || k[q] > n - 2) return false;
        if (q > 0 && k[q] <= k[q - 1]) return false;
    }
    return true;
}

Hinge refine(const Eigen::VectorXd& x, const Eigen::VectorXd& y, Hinge h, bool origin) {
    const Index n = x.size();
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t q = 0; q < h.knots.size(); ++q)
            for (Index step : {Index(-1), Index(1)}) {
                auto k = h.knots;
                k[q] += step;
                if (!valid_knots(k, n)) continue;
                Hinge c = hinge_fit(x, y, k, origin);
                if (c.sse < h.sse * (1 - 1e-12)) {
                    h = std::move(c);
                    improved = true;
                }
            }
    }
    return h;
}

Hinge best_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Prefix& pre, int segs, bool origin) {
    if (segs == 1) return hinge_fit(x, y, {}, origin);
    const Index n = x.size();
    Hinge h = refine(x, y, hinge_fit(x, y, dp_knots(pre, n, segs), origin), origin);

    // Nested candidate: best (segs-1) fit plus one extra knot.
    const Hinge prev = best_fit(x, y, pre, segs - 1, origin);
    Hinge grown;
    for (Index cand = 1; cand < n - 1; ++cand) {
        if (std::find(prev.knots.begin(), prev.knots.end(), cand) != prev.knots.end()) continue;
        auto k = prev.knots;
        k.push_back(cand);
        std::sort(k.begin(), k.end());
        Hinge c = hinge_fit(x, y, k, origin);
        if (c.sse < grown.sse) grown = std::move(c);
    }
    if (std::isfinite(grown.sse)) {
        grown = refine(x, y, std::move(grown), origin);
        if (grown.sse < h.sse) h = std::move(grown);
    }
    return h;
}

}  // namespace

FitResult fit_piecewise(const CurveSamples& samples, int n_segments, double p_min, const FitOptions& options) {
    if (n_segments < 1) throw std::invalid_argument("fit_piecewise: n_segments must be at least 1");
    std::vector<std::pair<double, double>> kept;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (k > 0 && !(samples[k].first > samples[k - 1].first))
            throw std::invalid_argument("fit_piecewise: sample powers must be strictly increasing");
        if (samples[k].first >= p_min - 1e-12) kept.push_back(samples[k]);
    }
    if (static_cast<int>(kept.size()) < 2 * n_segments)
        throw std::invalid_argument("fit_piecewise: need at least 2 samples per segment");

    const auto n = static_cast<Index>(kept.size());
    Eigen::VectorXd x(n), y(n);
    for (Index i = 0; i < n; ++i) {
        x[i] = kept[static_cast<std::size_t>(i)].first;
        y[i] = kept[static_cast<std::size_t>(i)].second;
    }
    const Prefix pre(x, y);
    const Hinge h = best_fit(x, y, pre, n_segments, options.through_origin);

    const double lo = std::isnan(options.domain_lo) ? std::max(p_min, x[0]) : options.domain_lo;
    FitResult r;
    r.curve = to_curve(h, x, options.through_origin, std::min(lo, x[0]), x[n - 1], options.direction);
    double sse = 0, mx = 0, ymax = 0;
    for (Index i = 0; i < n; ++i) {
        const double e = eval_piecewise(r.curve, x[i]) - y[i];
        sse += e * e;
        mx = std::max(mx, std::abs(e));
        ymax = std::max(ymax, std::abs(y[i]));
    }
    r.rmse = std::sqrt(sse / static_cast<double>(n));
    r.relative_rmse = ymax > 0 ? r.rmse / ymax : 0.0;
    r.max_abs_error = mx;
    return r;
}

FitResult default_charge_fit(const ElectrolyzerParams& p, int n_segments) {
    FitOptions o;
    o.direction = Direction::Charging;
    return fit_piecewise(sample_electrolyzer_curve(p), n_segments, p.p_min_frac * p.P_rated, o);
}

FitResult default_discharge_fit(const FuelCellParams& p, int n_segments) {
    FitOptions o;
    o.direction = Direction::Discharging;
    o.through_origin = true;
    o.domain_lo = 0.0;
    return fit_piecewise(sample_fuelcell_curve(p), n_segments, 0.0, o);
}

PiecewiseCurve constant_efficiency_curve(Direction dir, double eta, double p_lo, double p_hi) {
    if (!(eta > 0)) throw std::invalid_argument("constant_efficiency_curve: efficiency must be positive");
    if (!(p_hi > p_lo)) throw std::invalid_argument("constant_efficiency_curve: empty power range");
    const double slope = dir == Direction::Charging ? eta / constants::lhv_kwh_per_kg
                                                    : 1.0 / (eta * constants::hhv_kwh_per_kg);
    PiecewiseCurve c;
    c.direction = dir;
    c.segments.push_back({p_lo, p_hi, slope, 0.0});
    return c;
}

using csv::chomp;
using csv::fmt;
using csv::parse_double;
using csv::split;

void write_samples_csv(std::ostream& os, const CurveSamples& samples) {
    os << "power_kw,rate_kg_per_h\n";
    for (const auto& [p, h] : samples) os << fmt(p) << ',' << fmt(h) << '\n';
}

CurveSamples read_samples_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || chomp(line) != "power_kw,rate_kg_per_h")
        throw DataError("samples csv: expected header power_kw,rate_kg_per_h");
    CurveSamples out;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (chomp(line).empty()) continue;
        auto f = split(chomp(line));
        if (f.size() != 2) throw DataError("row " + std::to_string(row) + ": expected 2 fields");
        out.emplace_back(parse_double(f[0], row), parse_double(f[1], row));
    }
    return out;
}

void write_curve_csv(std::ostream& os, const PiecewiseCurve& curve) {
    os << "p_lo,p_hi,slope,intercept,direction\n";
    for (const auto& s : curve.segments)
        os << fmt(s.p_lo) << ',' << fmt(s.p_hi) << ',' << fmt(s.slope) << ',' << fmt(s.intercept) << ','
           << to_string(curve.direction) << '\n';
}

PiecewiseCurve read_curve_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || chomp(line) != "p_lo,p_hi,slope,intercept,direction")
        throw DataError("curve csv: expected header p_lo,p_hi,slope,intercept,direction");
    PiecewiseCurve c;
    std::size_t row = 1;
    bool first = true;
    while (std::getline(is, line)) {
        ++row;
        if (chomp(line).empty()) continue;
        auto f = split(chomp(line));
        if (f.size() != 5) throw DataError("row " + std::to_string(row) + ": expected 5 fields");
        const Direction d = direction_from_string(f[4]);
        if (first) c.direction = d;
        else if (d != c.direction) throw DataError("row " + std::to_string(row) + ": mixed directions");
        first = false;
        c.segments.push_back({parse_double(f[0], row), parse_double(f[1], row), parse_double(f[2], row),
                              parse_double(f[3], row)});
    }
    c.validate();
    return c;
}

}  // namespace hbes
