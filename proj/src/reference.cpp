#include "hbes/reference.hpp"

#include "hbes/csv.hpp"
#include "hbes/diagnostics.hpp"
#include "hbes/errors.hpp"
#include "hbes/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>

namespace hbes {

OfflinePlan plan_offline(const MicrogridSpec& spec, const ScenarioSeries& scenario, const OfflineOptions& opt) {
    const Index T = scenario.size();
    if (T < 1) throw std::invalid_argument("plan_offline: empty scenario");
    const auto t0 = std::chrono::steady_clock::now();
    OfflinePlan plan;
    HorizonOptions ho;
    ho.terminal = opt.terminal;
    auto fail = [&](const char* stage, const Solution& s) {
        throw SolverError(std::string("offline plan for '") + scenario.label + "': " + stage + " " +
                          to_string(s.status) + (s.message.empty() ? "" : " (" + s.message + ")"));
    };

    if (T <= opt.exact_max_steps) {
        ho.mode = SegmentMode::Binary;
        auto hp = build_horizon_program(spec, scenario, T, ho);
        auto sol = solve_milp(hp.program, opt.solve);
        if (!sol.ok()) fail("branch and bound", sol);
        plan.trajectory = extract_trajectory(hp, spec, sol.x);
        plan.objective = sol.objective;
        plan.relaxed_bound = sol.bound;
        plan.iterations = sol.iterations;
        plan.exact = true;
    } else {
        ho.mode = SegmentMode::Hull;
        auto hull = build_horizon_program(spec, scenario, T, ho);
        auto relaxed = solve_qp(hull.program, opt.solve);
        if (!relaxed.ok()) fail("hull relaxation", relaxed);
        ho.mode = SegmentMode::Fixed;
        ho.schedule = schedule_of(extract_trajectory(hull, spec, relaxed.x));
        auto fixed = build_horizon_program(spec, scenario, T, ho);
        auto sol = solve_qp(fixed.program, opt.solve);
        if (!sol.ok()) fail("fixed-segment program", sol);
        plan.trajectory = extract_trajectory(fixed, spec, sol.x);
        plan.objective = sol.objective;
        plan.relaxed_bound = relaxed.objective;
        plan.iterations = relaxed.iterations + sol.iterations;
    }
    plan.schedule = schedule_of(plan.trajectory);
    plan.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return plan;
}

// Library ------------------------------------------------------------------------

void ScenarioLibrary::add(ScenarioSeries s, std::string tag) {
    scenarios.push_back(std::move(s));
    provenance.push_back(std::move(tag));
}

void ScenarioLibrary::validate() const {
    if (scenarios.empty()) throw std::invalid_argument("scenario library is empty");
    const Index n = scenarios.front().size();
    const double dt = scenarios.front().dt_hours();
    for (const auto& s : scenarios) {
        s.validate();
        if (s.size() != n) throw std::invalid_argument("scenario library: '" + s.label + "' has a different length");
        if (n > 1 && s.dt_hours() != dt) throw std::invalid_argument("scenario library: '" + s.label + "' has a different step");
    }
}

Perturbation perturbation_from_string(const std::string& s) {
    if (s == "R3") return Perturbation::R3;
    if (s == "R4") return Perturbation::R4;
    if (s == "R5") return Perturbation::R5;
    if (s == "R6") return Perturbation::R6;
    throw std::invalid_argument("unknown perturbation '" + s + "' (expected R3, R4, R5 or R6)");
}

const char* to_string(Perturbation p) {
    switch (p) {
        case Perturbation::R3: return "R3";
        case Perturbation::R4: return "R4";
        case Perturbation::R5: return "R5";
        case Perturbation::R6: return "R6";
    }
    return "?";
}

namespace {

// Consecutive calendar-quarter id of each timestamp (UTC).
std::vector<int> quarter_ids(const std::vector<std::int64_t>& ts) {
    using namespace std::chrono;
    std::vector<int> out;
    out.reserve(ts.size());
    long last = -1;
    int id = -1;
    for (auto s : ts) {
        const year_month_day ymd{floor<days>(sys_seconds{seconds{s}})};
        const long key = static_cast<long>(static_cast<int>(ymd.year())) * 4 + (static_cast<unsigned>(ymd.month()) - 1) / 3;
        if (key != last) {
            ++id;
            last = key;
        }
        out.push_back(id);
    }
    return out;
}

ScenarioSeries perturb_one(const ScenarioSeries& s, Perturbation mode, double lo, double hi, std::mt19937_64& rng) {
    ScenarioSeries out = s;
    out.label = s.label + "+" + to_string(mode);
    const auto q = quarter_ids(s.timestamps);
    const int nq = q.empty() ? 0 : q.back() + 1;
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> fs(static_cast<std::size_t>(nq)), fw(static_cast<std::size_t>(nq));
    for (int k = 0; k < nq; ++k) {
        fs[static_cast<std::size_t>(k)] = u(rng);
        fw[static_cast<std::size_t>(k)] = u(rng);
    }
    for (Index t = 0; t < s.size(); ++t) {
        const double a = fs[static_cast<std::size_t>(q[static_cast<std::size_t>(t)])];
        const double b = fw[static_cast<std::size_t>(q[static_cast<std::size_t>(t)])];
        switch (mode) {
            case Perturbation::R3:
                out.solar[t] *= 1.0 - a;
                out.wind[t] *= 1.0 + b;
                break;
            case Perturbation::R4:
                out.solar[t] *= 1.0 - a;
                out.wind[t] *= 1.0 - b;
                break;
            default:
                out.solar[t] *= 1.0 + a;
                out.wind[t] *= 1.0 + b;
                break;
        }
    }
    return out;
}

}  // namespace

ScenarioLibrary perturb_scenarios(const ScenarioLibrary& library, Perturbation mode, double lo, double hi,
                                  std::uint64_t seed) {
    if (!(0.0 <= lo && lo <= hi && hi <= 1.0)) throw std::invalid_argument("perturbation range must satisfy 0 <= lo <= hi <= 1");
    ScenarioLibrary out;
    const std::vector<Perturbation> modes =
        mode == Perturbation::R6 ? std::vector{Perturbation::R3, Perturbation::R4, Perturbation::R5} : std::vector{mode};
    for (auto m : modes) {
        for (std::size_t s = 0; s < library.size(); ++s) {
            // Sub-seed per (mode, scenario) so adding scenarios leaves earlier draws unchanged.
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(s)};
            std::mt19937_64 rng(seq);
            out.add(perturb_one(library.scenarios[s], m, lo, hi, rng), "perturbed");
        }
    }
    return out;
}

// References --------------------------------------------------------------------

ReferenceSet generate_offline_references(const ScenarioLibrary& library, const MicrogridSpec& spec,
                                         const OfflineOptions& options) {
    library.validate();
    ReferenceSet set;
    for (const auto& s : library.scenarios) {
        OfflinePlan plan;
        try {
            plan = plan_offline(spec, s, options);
        } catch (const SolverError& e) {
            throw SolverError("reference generation failed for scenario '" + s.label + "': " + e.what());
        }
        ScenarioReference r;
        r.label = s.label;
        r.e_h.resize(s.size());
        for (Index t = 0; t < s.size(); ++t) r.e_h[t] = plan.trajectory[static_cast<std::size_t>(t)].e_h;
        r.schedule = plan.schedule;
        r.objective = plan.objective;
        r.relaxed_bound = plan.relaxed_bound;
        r.exact = plan.exact;
        r.wall_ms = plan.wall_ms;
        set.refs.push_back(std::move(r));
    }
    return set;
}

void write_reference_csv(std::ostream& os, const ReferenceSet& refs) {
    os << "scenario,t,e_h_kg,seg_c,seg_d\n";
    for (const auto& r : refs.refs) {
        if (r.label.find_first_of(",\n\r") != std::string::npos)
            throw std::invalid_argument("reference label contains a separator: '" + r.label + "'");
        for (Index t = 0; t < r.e_h.size(); ++t)
            os << r.label << ',' << t << ',' << csv::fmt(r.e_h[t]) << ',' << r.schedule.seg_c[static_cast<std::size_t>(t)]
               << ',' << r.schedule.seg_d[static_cast<std::size_t>(t)] << '\n';
    }
}

ReferenceSet read_reference_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || csv::chomp(line) != "scenario,t,e_h_kg,seg_c,seg_d")
        throw DataError("reference csv: expected header scenario,t,e_h_kg,seg_c,seg_d");
    ReferenceSet set;
    std::vector<std::vector<double>> values;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        line = csv::chomp(line);
        if (line.empty()) continue;
        auto f = csv::split(line);
        if (f.size() != 5) throw DataError("reference csv row " + std::to_string(row) + ": expected 5 fields");
        const auto t = csv::parse_int(f[1], row);
        if (set.refs.empty() || set.refs.back().label != f[0]) {
            for (const auto& r : set.refs)
                if (r.label == f[0]) throw DataError("reference csv row " + std::to_string(row) + ": scenario '" + f[0] + "' is not contiguous");
            set.refs.push_back({});
            set.refs.back().label = f[0];
            values.emplace_back();
        }
        auto& r = set.refs.back();
        if (t != static_cast<std::int64_t>(values.back().size()))
            throw DataError("reference csv row " + std::to_string(row) + ": expected t = " + std::to_string(values.back().size()));
        values.back().push_back(csv::parse_double(f[2], row));
        r.schedule.seg_c.push_back(static_cast<int>(csv::parse_int(f[3], row)));
        r.schedule.seg_d.push_back(static_cast<int>(csv::parse_int(f[4], row)));
    }
    for (std::size_t s = 0; s < set.refs.size(); ++s) {
        set.refs[s].e_h = Eigen::Map<const Vector>(values[s].data(), static_cast<Index>(values[s].size()));
        if (set.refs[s].e_h.size() != set.refs.front().e_h.size())
            throw DataError("reference csv: scenario '" + set.refs[s].label + "' has a different length");
    }
    return set;
}

// Kernel tracker ------------------------------------------------------------------

Vector kernel_weights(const Vector& d2, Index t, double sigma) {
    const Index n = d2.size();
    if (n == 0) throw std::invalid_argument("kernel_weights: no scenarios");
    if (!(sigma > 0)) throw std::invalid_argument("kernel_weights: sigma must be positive");
    const Vector uniform = Vector::Constant(n, 1.0 / static_cast<double>(n));
    if (t < 1) return uniform;
    Vector logk = -d2 / (static_cast<double>(t) * sigma * sigma);
    if (!logk.allFinite()) {
        diagnostic("kernel weights are not finite, falling back to uniform weights");
        return uniform;
    }
    Vector w = (logk.array() - logk.maxCoeff()).exp();
    const double sum = w.sum();
    if (!(sum > 0) || !std::isfinite(sum)) {
        diagnostic("kernel weights underflowed, falling back to uniform weights");
        return uniform;
    }
    return w / sum;
}

BlendedReference blend_reference(const Vector& weights, const ReferenceSet& refs, Index t) {
    if (static_cast<std::size_t>(weights.size()) != refs.size())
        throw std::invalid_argument("blend_reference: weight count differs from the reference count");
    BlendedReference b;
    double best = -1.0;
    for (std::size_t s = 0; s < refs.size(); ++s) {
        const auto& r = refs.refs[s];
        if (t < 0 || t >= r.e_h.size()) throw std::out_of_range("blend_reference: step outside the references");
        const double w = weights[static_cast<Index>(s)];
        b.e_h += w * r.e_h[t];
        if (w > best) {
            best = w;
            b.leader = s;
        }
    }
    const auto& lead = refs.refs[b.leader].schedule;
    b.seg_c = lead.seg_c[static_cast<std::size_t>(t)];
    b.seg_d = lead.seg_d[static_cast<std::size_t>(t)];
    return b;
}

KernelTracker::KernelTracker(const ScenarioLibrary& library, const Capacities& caps, double sigma)
    : library_(&library), caps_(caps), sigma_(sigma), d2_(Vector::Zero(static_cast<Index>(library.size()))) {
    if (library.size() == 0) throw std::invalid_argument("kernel tracker: empty library");
    if (!(sigma > 0)) throw std::invalid_argument("kernel tracker: sigma must be positive");
    if (!(caps.load > 0 && caps.solar > 0 && caps.wind > 0)) throw std::invalid_argument("kernel tracker: capacities must be positive");
}

void KernelTracker::observe(double load, double solar, double wind) {
    for (std::size_t s = 0; s < library_->size(); ++s) {
        const auto& sc = library_->scenarios[s];
        if (t_ >= sc.size()) throw std::out_of_range("kernel tracker: observation beyond the library length");
        const double a = (load - sc.load[t_]) / caps_.load;
        const double b = (solar - sc.solar[t_]) / caps_.solar;
        const double c = (wind - sc.wind[t_]) / caps_.wind;
        d2_[static_cast<Index>(s)] += a * a + b * b + c * c;
    }
    ++t_;
}

Vector KernelTracker::weights() const { return kernel_weights(d2_, t_, sigma_); }

Vector tracked_reference(const ScenarioLibrary& library, const ReferenceSet& refs, const ScenarioSeries& observed,
                         const Capacities& caps, double sigma) {
    KernelTracker tr(library, caps, sigma);
    const Index T = std::min(observed.size(), refs.length());
    Vector out(T);
    for (Index t = 0; t < T; ++t) {
        out[t] = blend_reference(tr.weights(), refs, t).e_h;
        tr.observe(observed.load[t], observed.solar[t], observed.wind[t]);
    }
    return out;
}

double reference_rmse(const Vector& ref, const Vector& global, double normalizer) {
    if (ref.size() != global.size()) throw std::invalid_argument("reference_rmse: length mismatch");
    if (!(normalizer > 0)) throw std::invalid_argument("reference_rmse: normalizer must be positive");
    if (ref.size() == 0) return 0.0;
    return std::sqrt((ref - global).squaredNorm() / static_cast<double>(ref.size())) / normalizer;
}

double select_bandwidth(const std::function<double(double)>& f, double lo, double hi, double tol) {
    if (!(lo > 0) || !(hi >= lo) || !(tol > 0)) throw std::invalid_argument("select_bandwidth: need 0 < lo <= hi and tol > 0");
    if (hi - lo <= tol) return lo == hi ? lo : 0.5 * (lo + hi);
    auto eval = [&](double s) {
        const double v = f(s);
        if (!std::isfinite(v)) throw std::runtime_error("select_bandwidth: non-finite RMSE at sigma " + std::to_string(s));
        return v;
    };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = eval(c), fd = eval(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d);
        }
    }
    return 0.5 * (a + b);
}

double select_bandwidth(const ScenarioLibrary& library, const ReferenceSet& refs, const ScenarioSeries& validation,
                        const Vector& validation_reference, const MicrogridSpec& spec, double lo, double hi,
                        double tol) {
    auto rmse = [&](double sigma) {
        Vector r = tracked_reference(library, refs, validation, spec.capacities, sigma);
        return reference_rmse(r, validation_reference.head(r.size()), spec.hydrogen.e_max);
    };
    return select_bandwidth(rmse, lo, hi, tol);
}

}  // namespace hbes
