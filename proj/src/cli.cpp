#include "hbes/cli.hpp"

#include "hbes/csv.hpp"
#include "hbes/diagnostics.hpp"
#include "hbes/dispatch.hpp"
#include "hbes/electrochem.hpp"
#include "hbes/errors.hpp"
#include "hbes/io.hpp"
#include "hbes/oco.hpp"
#include "hbes/piecewise.hpp"
#include "hbes/reference.hpp"
#include "hbes/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace hbes {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Collects outputs and their hashes; printed once the command succeeds.
class Manifest {
public:
    explicit Manifest(const std::string& command) {
        j_["command"] = command;
        j_["version"] = kVersion;
        j_["seeds"] = ojson::object();
        j_["parameters"] = ojson::object();
        j_["inputs"] = ojson::object();
        j_["outputs"] = ojson::object();
    }

    template <class T>
    void seed(const std::string& name, const T& v) { j_["seeds"][name] = v; }
    template <class T>
    void param(const std::string& name, const T& v) { j_["parameters"][name] = v; }

    void input(const fs::path& p) { j_["inputs"][p.generic_string()] = content_hash(read_file(p)); }

    void output(const fs::path& p, const std::string& content) {
        write_file_atomic(p, content);
        j_["outputs"][p.generic_string()] = content_hash(content);
    }

    void extra(const std::string& name, ojson v) { j_[name] = std::move(v); }

    std::string dump() const { return j_.dump(2) + "\n"; }

    void emit(const fs::path& dir, std::ostream& out) const {
        write_file_atomic(dir / "manifest.json", dump());
        out << dump();
    }

private:
    ojson j_;
};

struct CommonOpts {
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 7;
};

struct ScenarioOpts {
    std::string scenario;
    std::uint64_t synthetic_seed = 7;
    Index steps = 0;
    Index start = 0;
    int resolution = 0;
    bool normalize = false;
};

struct LibraryOpts {
    std::vector<std::string> files;
    std::vector<std::uint64_t> seeds{11, 12, 13, 14};
    std::string perturb;
    double lo = 0.05;
    double hi = 0.20;
};

struct SpecOpts {
    std::string charge_curve;
    std::string discharge_curve;
};

struct MethodOpts {
    std::string efficiency = "E1";
    double phi = MethodConfig{}.phi;
    double sigma = MethodConfig{}.sigma;
    double alpha0 = OcoTuning{}.alpha0;
    double beta0 = OcoTuning{}.beta0;
    Index horizon = MpcConfig{}.horizon;
    std::string forecast = "persistence";
    double sigma_f = 0.0;
};

ScenarioSeries prepare(ScenarioSeries s, const ScenarioOpts& o, const Capacities& caps) {
    s = resample(s, o.resolution);
    if (o.normalize) s = normalize_to_capacities(s, caps);
    if (o.start < 0 || o.steps < 0) throw std::invalid_argument("--start and --steps must be non-negative");
    if (o.start > 0 || o.steps > 0) {
        const Index len = o.steps > 0 ? o.steps : s.size() - o.start;
        if (o.start + len > s.size())
            throw DataError("scenario '" + s.label + "' has " + std::to_string(s.size()) + " steps, fewer than requested");
        s = s.slice(o.start, len);
    }
    s.validate();
    return s;
}

ScenarioSeries load_scenario(const ScenarioOpts& o, const MicrogridSpec& spec, Manifest& m) {
    if (!o.scenario.empty()) {
        m.input(o.scenario);
        return prepare(read_scenario_csv(fs::path(o.scenario)), o, spec.capacities);
    }
    m.seed("scenario", o.synthetic_seed);
    return prepare(synthetic_year(o.synthetic_seed), o, spec.capacities);
}

ScenarioLibrary load_library(const LibraryOpts& lo, const ScenarioOpts& so, const MicrogridSpec& spec,
                             std::uint64_t seed, Manifest& m) {
    ScenarioLibrary lib;
    ScenarioOpts shape = so;
    shape.scenario.clear();
    for (const auto& f : lo.files) {
        m.input(f);
        lib.add(prepare(read_scenario_csv(fs::path(f)), shape, spec.capacities));
    }
    if (lo.files.empty()) {
        m.seed("library", lo.seeds);
        for (auto s : lo.seeds) lib.add(prepare(synthetic_year(s), shape, spec.capacities));
    }
    if (!lo.perturb.empty()) {
        m.seed("perturbation", seed);
        m.param("perturb", lo.perturb);
        m.param("perturb_range", std::vector<double>{lo.lo, lo.hi});
        auto extra = perturb_scenarios(lib, perturbation_from_string(lo.perturb), lo.lo, lo.hi, seed);
        for (std::size_t k = 0; k < extra.size(); ++k) lib.add(extra.scenarios[k], extra.provenance[k]);
    }
    lib.validate();
    return lib;
}

MicrogridSpec load_spec(const CommonOpts& c, const SpecOpts& so, Manifest& m) {
    MicrogridSpec spec = default_spec();
    std::string cc = so.charge_curve, dc = so.discharge_curve;
    if (!c.config.empty()) {
        m.input(c.config);
        const auto cfg = read_config(c.config);
        apply_spec_overrides(cfg, spec);
        if (cc.empty() && cfg.count("hydrogen.charge_curve")) cc = cfg.at("hydrogen.charge_curve");
        if (dc.empty() && cfg.count("hydrogen.discharge_curve")) dc = cfg.at("hydrogen.discharge_curve");
    }
    auto curve = [&](const std::string& path) {
        m.input(path);
        std::ifstream f(path);
        if (!f) throw DataError("cannot open " + path);
        return read_curve_csv(f);
    };
    if (!cc.empty()) spec.hydrogen.charge_curve = curve(cc);
    if (!dc.empty()) spec.hydrogen.discharge_curve = curve(dc);
    return spec;
}

// Time step of the spec follows the scenario.
void align_dt(MicrogridSpec& spec, const ScenarioSeries& s) {
    if (s.size() >= 2) spec.dt = s.dt_hours();
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("spec: ") + e.what());
    }
}

ReferenceSet load_or_generate_refs(const std::string& path, const ScenarioLibrary& lib, const MicrogridSpec& spec,
                                   Manifest& m) {
    if (path.empty()) {
        m.param("references", "generated");
        return generate_offline_references(lib, spec);
    }
    m.input(path);
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    auto refs = read_reference_csv(f);
    if (refs.size() != lib.size())
        throw DataError("reference store has " + std::to_string(refs.size()) + " scenarios, library has " +
                        std::to_string(lib.size()));
    for (std::size_t k = 0; k < refs.size(); ++k)
        if (refs.refs[k].label != lib.scenarios[k].label)
            throw DataError("reference '" + refs.refs[k].label + "' does not match library scenario '" +
                            lib.scenarios[k].label + "'");
    return refs;
}

MethodConfig method_config(Method method, const MethodOpts& o, std::uint64_t seed) {
    MethodConfig c;
    c.method = method;
    c.efficiency = efficiency_from_string(o.efficiency);
    c.phi = o.phi;
    c.sigma = o.sigma;
    c.oco.alpha0 = o.alpha0;
    c.oco.beta0 = o.beta0;
    c.mpc.horizon = o.horizon;
    c.mpc.forecast = forecast_from_string(o.forecast);
    c.mpc.sigma_f = o.sigma_f;
    c.mpc.seed = seed;
    return c;
}

void record_method(Manifest& m, const MethodOpts& o) {
    m.param("efficiency", o.efficiency);
    m.param("phi", o.phi);
    m.param("sigma", o.sigma);
    m.param("alpha0", o.alpha0);
    m.param("beta0", o.beta0);
    m.param("horizon", o.horizon);
    m.param("forecast", o.forecast);
    m.param("sigma_f", o.sigma_f);
}

template <class F>
std::string render(F&& f) {
    std::ostringstream ss;
    f(ss);
    return ss.str();
}

// Plot data: whitespace-separated columns with a commented header.
std::string soc_plotdata(const std::vector<DispatchDecision>& traj, const Vector& ref) {
    std::ostringstream ss;
    ss << "# t e_b e_h" << (ref.size() ? " ref" : "") << "\n";
    for (std::size_t t = 0; t < traj.size(); ++t) {
        ss << t << ' ' << csv::fmt(traj[t].e_b) << ' ' << csv::fmt(traj[t].e_h);
        if (ref.size()) ss << ' ' << csv::fmt(ref[static_cast<Index>(t)]);
        ss << '\n';
    }
    return ss.str();
}

// Commands --------------------------------------------------------------------------

struct FitOpts {
    int segments = 4;
    std::string charge_samples, discharge_samples;
};

int cmd_fit_curves(const CommonOpts& c, const FitOpts& o, std::ostream& out) {
    Manifest m("fit-curves");
    m.param("segments", o.segments);
    const ElectrolyzerParams ep;
    const FuelCellParams fp;
    auto samples = [&](const std::string& path, CurveSamples dflt) {
        if (path.empty()) return dflt;
        m.input(path);
        std::ifstream f(path);
        if (!f) throw DataError("cannot open " + path);
        return read_samples_csv(f);
    };
    const CurveSamples sc = samples(o.charge_samples, sample_electrolyzer_curve(ep));
    const CurveSamples sd = samples(o.discharge_samples, sample_fuelcell_curve(fp));
    FitOptions oc;
    oc.direction = Direction::Charging;
    FitOptions od;
    od.direction = Direction::Discharging;
    od.through_origin = true;
    od.domain_lo = 0.0;
    const double pmin = o.charge_samples.empty() ? ep.p_min_frac * ep.P_rated : sc.front().first;
    const auto fc = fit_piecewise(sc, o.segments, pmin, oc);
    const auto fd = fit_piecewise(sd, o.segments, 0.0, od);

    const fs::path dir(c.out);
    m.output(dir / "charge_curve.csv", render([&](std::ostream& s) { write_curve_csv(s, fc.curve); }));
    m.output(dir / "discharge_curve.csv", render([&](std::ostream& s) { write_curve_csv(s, fd.curve); }));
    m.output(dir / "charge_samples.csv", render([&](std::ostream& s) { write_samples_csv(s, sc); }));
    m.output(dir / "discharge_samples.csv", render([&](std::ostream& s) { write_samples_csv(s, sd); }));
    m.output(dir / "efficiency.dat", render([&](std::ostream& s) {
                 s << "# power_kw efficiency_charge efficiency_discharge\n";
                 for (int k = 1; k <= 100; ++k) {
                     const double p = ep.P_rated * k / 100.0;
                     s << csv::fmt(p) << ' ' << csv::fixed(electrolyzer_efficiency_at_power(p, ep), 6) << ' '
                       << csv::fixed(fuelcell_efficiency_at_power(p, fp), 6) << '\n';
                 }
             }));
    m.extra("fit", ojson{{"charge_relative_rmse", fc.relative_rmse}, {"discharge_relative_rmse", fd.relative_rmse}});
    m.emit(c.out, out);
    return kExitOk;
}

struct RefsOpts {
    ScenarioOpts scen;
    LibraryOpts lib;
    SpecOpts spec;
};

int cmd_gen_refs(const CommonOpts& c, const RefsOpts& o, std::ostream& out) {
    Manifest m("gen-refs");
    auto spec = load_spec(c, o.spec, m);
    auto lib = load_library(o.lib, o.scen, spec, c.seed, m);
    align_dt(spec, lib.scenarios.front());
    const auto refs = generate_offline_references(lib, spec);
    const fs::path dir(c.out);
    m.output(dir / "references.csv", render([&](std::ostream& s) { write_reference_csv(s, refs); }));
    m.output(dir / "references.dat", render([&](std::ostream& s) {
                 s << "# t";
                 for (const auto& r : refs.refs) s << ' ' << r.label;
                 s << '\n';
                 for (Index t = 0; t < refs.length(); ++t) {
                     s << t;
                     for (const auto& r : refs.refs) s << ' ' << csv::fmt(r.e_h[t]);
                     s << '\n';
                 }
             }));
    ojson plans = ojson::array();
    for (const auto& r : refs.refs)
        plans.push_back({{"scenario", r.label}, {"objective", csv::fixed(r.objective, 4)}, {"exact", r.exact}});
    m.extra("references", plans);
    m.emit(c.out, out);
    return kExitOk;
}

struct SimOpts {
    ScenarioOpts scen;
    LibraryOpts lib;
    SpecOpts spec;
    MethodOpts method;
    std::string method_name = "M1";
    std::string refs;
    bool trace = false;
    bool timing = false;
};

int cmd_simulate(const CommonOpts& c, const SimOpts& o, std::ostream& out) {
    Manifest m("simulate");
    auto spec = load_spec(c, o.spec, m);
    const auto scenario = load_scenario(o.scen, spec, m);
    align_dt(spec, scenario);
    const auto cfg = method_config(method_from_string(o.method_name), o.method, c.seed);
    m.param("method", o.method_name);
    record_method(m, o.method);
    m.seed("run", c.seed);
    ScenarioLibrary lib;
    ReferenceSet refs;
    RolloutInputs in;
    in.keep_trace = o.trace;
    if (cfg.uses_reference()) {
        lib = load_library(o.lib, o.scen, spec, c.seed, m);
        refs = load_or_generate_refs(o.refs, lib, spec, m);
        in.library = &lib;
        in.references = &refs;
    }
    const auto r = run_rollout(spec, scenario, cfg, in);
    const fs::path dir(c.out);
    m.output(dir / "trajectory.csv", render([&](std::ostream& s) { write_trajectory_csv(s, r.realized); }));
    m.output(dir / "committed.csv", render([&](std::ostream& s) { write_trajectory_csv(s, r.committed); }));
    m.output(dir / "soc.dat", soc_plotdata(r.realized, r.reference));
    ojson metrics{{"method", o.method_name},
                  {"theoretical_cost_usd", csv::fixed(r.theoretical.cost.total, 4)},
                  {"practical_cost_usd", csv::fixed(r.practical.cost.total, 4)},
                  {"dg_mwh", csv::fixed(r.practical.dg_mwh, 6)},
                  {"lol_mwh", csv::fixed(r.practical.lol_mwh, 6)},
                  {"theoretical_lol_mwh", csv::fixed(r.theoretical.lol_mwh, 6)},
                  {"h2_charge_mwh", csv::fixed(r.practical.h2_charge_mwh, 6)},
                  {"h2_discharge_mwh", csv::fixed(r.practical.h2_discharge_mwh, 6)},
                  {"reference_rmse_pct", csv::fixed(r.reference_rmse_pct, 4)}};
    if (o.timing) {
        metrics["mean_step_ms"] = csv::fixed(r.mean_step_ms, 3);
        metrics["max_step_ms"] = csv::fixed(r.max_step_ms, 3);
    }
    m.output(dir / "metrics.json", metrics.dump(2) + "\n");
    if (o.trace) {
        std::string lines;
        for (const auto& l : r.trace) lines += l + "\n";
        m.output(dir / "trace.jsonl", lines);
    }
    m.extra("metrics", metrics);
    m.emit(c.out, out);
    return kExitOk;
}

struct CompareOpts {
    SimOpts sim;
    std::vector<std::string> methods{"M0", "M1", "M2", "M3", "M4"};
};

int cmd_compare(const CommonOpts& c, const CompareOpts& o, std::ostream& out) {
    Manifest m("compare");
    auto spec = load_spec(c, o.sim.spec, m);
    const auto scenario = load_scenario(o.sim.scen, spec, m);
    align_dt(spec, scenario);
    record_method(m, o.sim.method);
    m.param("methods", o.methods);
    m.seed("run", c.seed);
    std::vector<MethodConfig> configs;
    bool need_refs = false;
    for (const auto& name : o.methods) {
        configs.push_back(method_config(method_from_string(name), o.sim.method, c.seed));
        need_refs = need_refs || configs.back().uses_reference();
    }
    ScenarioLibrary lib;
    ReferenceSet refs;
    RolloutInputs in;
    in.keep_trace = o.sim.trace;
    if (need_refs) {
        lib = load_library(o.sim.lib, o.sim.scen, spec, c.seed, m);
        refs = load_or_generate_refs(o.sim.refs, lib, spec, m);
        in.library = &lib;
        in.references = &refs;
    }
    std::vector<RolloutResult> rollouts;
    const auto rows = evaluate_methods(spec, scenario, configs, in, &rollouts);
    const fs::path dir(c.out);
    m.output(dir / "comparison.csv", render([&](std::ostream& s) { write_comparison_csv(s, rows, o.sim.timing); }));
    m.output(dir / "cost_bars.dat", render([&](std::ostream& s) {
                 s << "# method cost_usd dg_mwh lol_mwh regret_usd\n";
                 for (const auto& r : rows)
                     s << to_string(r.method) << ' ' << csv::fixed(r.cost_usd, 4) << ' ' << csv::fixed(r.dg_mwh, 6)
                       << ' ' << csv::fixed(r.lol_mwh, 6) << ' ' << csv::fixed(r.regret_usd, 4) << '\n';
             }));
    m.output(dir / "soc_compare.dat", render([&](std::ostream& s) {
                 s << "# t";
                 for (const auto& r : rollouts) s << " e_h_" << to_string(r.method);
                 s << '\n';
                 for (Index t = 0; t < scenario.size(); ++t) {
                     s << t;
                     for (const auto& r : rollouts) s << ' ' << csv::fmt(r.realized[static_cast<std::size_t>(t)].e_h);
                     s << '\n';
                 }
             }));
    for (const auto& r : rollouts)
        m.output(dir / (std::string("trajectory_") + to_string(r.method) + ".csv"),
                 render([&](std::ostream& s) { write_trajectory_csv(s, r.realized); }));
    if (o.sim.trace)
        for (const auto& r : rollouts) {
            if (r.trace.empty()) continue;
            std::string lines;
            for (const auto& l : r.trace) lines += l + "\n";
            m.output(dir / (std::string("trace_") + to_string(r.method) + ".jsonl"), lines);
        }
    ojson regret = ojson::array();
    for (const auto& r : rows)
        regret.push_back({{"method", to_string(r.method)},
                          {"regret_usd", csv::fixed(r.regret_usd, 4)},
                          {"path_length", csv::fixed(r.path_length, 4)}});
    m.extra("regret", regret);
    m.emit(c.out, out);
    return kExitOk;
}

struct SweepOpts {
    SimOpts sim;
    std::string param = "phi";
    std::vector<double> values;
};

int cmd_sweep(const CommonOpts& c, const SweepOpts& o, std::ostream& out) {
    Manifest m("sweep");
    auto spec = load_spec(c, o.sim.spec, m);
    const auto base = load_scenario(o.sim.scen, spec, m);
    align_dt(spec, base);
    if (o.param != "phi" && o.param != "renewable_scale")
        throw std::invalid_argument("--param must be phi or renewable_scale");
    std::vector<double> values = o.values;
    if (values.empty())
        values = o.param == "phi" ? std::vector<double>{0.001, 0.01, 0.1, 1.0} : std::vector<double>{0.8, 0.9, 1.0, 1.1, 1.2};
    m.param("sweep", o.param);
    m.param("values", values);
    m.param("method", o.sim.method_name);
    record_method(m, o.sim.method);
    m.seed("run", c.seed);
    const Method method = method_from_string(o.sim.method_name);
    ScenarioLibrary lib;
    ReferenceSet refs;
    RolloutInputs in;
    if (method_config(method, o.sim.method, c.seed).uses_reference()) {
        lib = load_library(o.sim.lib, o.sim.scen, spec, c.seed, m);
        refs = load_or_generate_refs(o.sim.refs, lib, spec, m);
        in.library = &lib;
        in.references = &refs;
    }
    std::ostringstream csv_out, dat;
    csv_out << "param,value,cost_usd,dg_mwh,lol_mwh,rmse_pct\n";
    dat << "# value cost_usd rmse_pct\n";
    for (double v : values) {
        auto cfg = method_config(method, o.sim.method, c.seed);
        ScenarioSeries s = base;
        if (o.param == "phi") {
            if (!(v >= 0)) throw std::invalid_argument("phi values must be non-negative");
            cfg.phi = v;
        } else {
            if (!(v >= 0)) throw std::invalid_argument("renewable scale values must be non-negative");
            s.solar *= v;
            s.wind *= v;
        }
        const auto r = run_rollout(spec, s, cfg, in);
        csv_out << o.param << ',' << csv::fmt(v) << ',' << csv::fixed(r.practical.cost.total, 4) << ','
                << csv::fixed(r.practical.dg_mwh, 6) << ',' << csv::fixed(r.practical.lol_mwh, 6) << ','
                << csv::fixed(r.reference_rmse_pct, 4) << '\n';
        dat << csv::fmt(v) << ' ' << csv::fixed(r.practical.cost.total, 4) << ' ' << csv::fixed(r.reference_rmse_pct, 4)
            << '\n';
    }
    const fs::path dir(c.out);
    m.output(dir / "sweep.csv", csv_out.str());
    m.output(dir / "sweep.dat", dat.str());
    m.emit(c.out, out);
    return kExitOk;
}

struct RegretOpts {
    std::vector<Index> horizons{256, 512, 1024, 2048, 4096};
    RegretBenchConfig bench;
    bool timing = false;
};

int cmd_bench_regret(const CommonOpts& c, const RegretOpts& o, std::ostream& out) {
    Manifest m("bench-regret");
    m.param("T", o.horizons);
    m.param("dim", o.bench.dim);
    m.param("alpha0", o.bench.alpha0);
    m.param("beta0", o.bench.beta0);
    m.param("kappa", o.bench.kappa);
    m.param("c", o.bench.c);
    if (o.horizons.size() < 2) throw std::invalid_argument("--T needs at least two horizons");
    std::vector<double> xs, ys;
    std::ostringstream csv_out, dat;
    csv_out << "T,regret,path_length,violation" << (o.timing ? ",wall_ms" : "") << '\n';
    dat << "# T regret path_length\n";
    for (Index T : o.horizons) {
        const auto p = run_regret_benchmark(T, o.bench);
        xs.push_back(static_cast<double>(T));
        ys.push_back(p.regret);
        csv_out << T << ',' << csv::fixed(p.regret, 6) << ',' << csv::fixed(p.path_length, 6) << ','
                << csv::fixed(p.violation, 6);
        if (o.timing) csv_out << ',' << csv::fixed(p.wall_ms, 1);
        csv_out << '\n';
        dat << T << ' ' << csv::fixed(p.regret, 6) << ' ' << csv::fixed(p.path_length, 6) << '\n';
    }
    const double slope = loglog_slope(xs, ys);
    const fs::path dir(c.out);
    m.output(dir / "regret.csv", csv_out.str());
    m.output(dir / "regret.dat", dat.str());
    m.extra("loglog_slope", csv::fixed(slope, 4));
    m.emit(c.out, out);
    return kExitOk;
}

struct SynthCmdOpts {
    std::uint64_t seed = 7;
    Index steps = 8760;
    int resolution = 0;
    std::string file = "scenario.csv";
};

int cmd_synth_data(const CommonOpts& c, const SynthCmdOpts& o, std::ostream& out) {
    Manifest m("synth-data");
    m.seed("scenario", o.seed);
    m.param("steps", o.steps);
    SynthOptions so;
    if (o.steps < 1) throw std::invalid_argument("--steps must be positive");
    so.steps = o.steps;
    auto s = resample(synthetic_year(o.seed, so), o.resolution);
    m.output(fs::path(c.out) / o.file, render([&](std::ostream& os) { write_scenario_csv(os, s); }));
    m.emit(c.out, out);
    return kExitOk;
}

// Fills options of the chosen command from the `[<command>]` section of the
// config file unless they were given on the command line.
std::vector<std::string> with_config_defaults(const std::vector<std::string>& args) {
    if (args.empty()) return args;
    std::string config;
    for (std::size_t k = 0; k + 1 < args.size(); ++k)
        if (args[k] == "--config") config = args[k + 1];
    for (const auto& a : args)
        if (a.rfind("--config=", 0) == 0) config = a.substr(9);
    if (config.empty()) return args;
    const auto cfg = read_config(config);
    const std::string prefix = args.front() + ".";
    std::vector<std::string> out = args;
    for (const auto& [key, value] : cfg) {
        if (key.rfind(prefix, 0) != 0) continue;
        const std::string flag = "--" + key.substr(prefix.size());
        bool given = false;
        for (const auto& a : args) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
        if (given) continue;
        out.push_back(flag);
        if (value != "true") out.push_back(value);
    }
    return out;
}

void add_common(CLI::App* app, CommonOpts& c) {
    app->add_option("--config", c.config, "INI configuration file");
    app->add_option("--out", c.out, "Output directory")->capture_default_str();
    app->add_option("--seed", c.seed, "Run seed (perturbations, forecast noise)")->capture_default_str();
}

void add_scenario(CLI::App* app, ScenarioOpts& s) {
    app->add_option("--scenario", s.scenario, "Scenario CSV (timestamp,load_kw,solar_kw,wind_kw)");
    app->add_option("--synthetic-seed", s.synthetic_seed, "Seed of the synthetic year used without --scenario")
        ->capture_default_str();
    app->add_option("--start", s.start, "First step of the slice")->capture_default_str();
    app->add_option("--steps", s.steps, "Number of steps (0 keeps all)")->capture_default_str();
    app->add_option("--resolution", s.resolution, "Resample to this many minutes (0 keeps the input step)")
        ->capture_default_str();
    app->add_flag("--normalize", s.normalize, "Scale channels so their peaks equal the capacities");
}

void add_library(CLI::App* app, LibraryOpts& l) {
    app->add_option("--library", l.files, "Scenario CSVs forming the reference library");
    app->add_option("--library-seeds", l.seeds, "Synthetic years used without --library")->delimiter(',');
    app->add_option("--perturb", l.perturb, "Append perturbed scenarios: R3, R4, R5 or R6");
    app->add_option("--perturb-lo", l.lo, "Lower bound of the perturbation factor")->capture_default_str();
    app->add_option("--perturb-hi", l.hi, "Upper bound of the perturbation factor")->capture_default_str();
}

void add_spec(CLI::App* app, SpecOpts& s) {
    app->add_option("--charge-curve", s.charge_curve, "Charging curve CSV");
    app->add_option("--discharge-curve", s.discharge_curve, "Discharging curve CSV");
}

void add_method(CLI::App* app, MethodOpts& m) {
    app->add_option("--efficiency", m.efficiency, "Planning efficiency model: E1, E2 or E3")->capture_default_str();
    app->add_option("--phi", m.phi, "SoC tracking weight ($/kg^2)")->capture_default_str();
    app->add_option("--sigma", m.sigma, "Kernel bandwidth")->capture_default_str();
    app->add_option("--alpha0", m.alpha0, "Base step size of the online learner")->capture_default_str();
    app->add_option("--beta0", m.beta0, "Base queue step of the online learner")->capture_default_str();
    app->add_option("--horizon", m.horizon, "Receding-horizon window (steps)")->capture_default_str();
    app->add_option("--forecast", m.forecast, "persistence or oracle_noise")->capture_default_str();
    app->add_option("--sigma-f", m.sigma_f, "Relative noise of the oracle forecast")->capture_default_str();
}

// Deduplicated warnings, flushed to `err` at the end of a run.
class WarningSink {
public:
    explicit WarningSink(std::ostream& err) : err_(err) {
        set_diagnostic_handler([this](const std::string& msg) {
            if (counts_[msg]++ == 0) order_.push_back(msg);
        });
    }
    ~WarningSink() {
        for (const auto& msg : order_) {
            err_ << "warning: " << msg;
            if (counts_[msg] > 1) err_ << " (x" << counts_[msg] << ")";
            err_ << '\n';
        }
        set_diagnostic_handler(nullptr);
    }

private:
    std::ostream& err_;
    std::map<std::string, int> counts_;
    std::vector<std::string> order_;
};

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Seasonal energy management for microgrids with hybrid hydrogen-battery storage", "hbes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    CommonOpts common;
    FitOpts fit;
    RefsOpts refs;
    SimOpts sim;
    CompareOpts cmp;
    SweepOpts sweep;
    RegretOpts regret;
    SynthCmdOpts synth;

    auto* c_fit = app.add_subcommand("fit-curves", "Fit piecewise-linear hydrogen curves to the electrochemical model");
    add_common(c_fit, common);
    c_fit->add_option("--segments", fit.segments, "Segments per curve")->capture_default_str()->check(CLI::Range(1, 12));
    c_fit->add_option("--charge-samples", fit.charge_samples, "Charging samples CSV (power_kw,rate_kg_per_h)");
    c_fit->add_option("--discharge-samples", fit.discharge_samples, "Discharging samples CSV");

    auto* c_refs = app.add_subcommand("gen-refs", "Perfect-foresight hydrogen SoC references over a scenario library");
    add_common(c_refs, common);
    add_scenario(c_refs, refs.scen);
    add_library(c_refs, refs.lib);
    add_spec(c_refs, refs.spec);

    auto* c_sim = app.add_subcommand("simulate", "Roll out one dispatch method");
    add_common(c_sim, common);
    add_scenario(c_sim, sim.scen);
    add_library(c_sim, sim.lib);
    add_spec(c_sim, sim.spec);
    add_method(c_sim, sim.method);
    c_sim->add_option("--method", sim.method_name, "M0, M1, M2, M3 or M4")->capture_default_str();
    c_sim->add_option("--refs", sim.refs, "Reference CSV from gen-refs (generated when absent)");
    c_sim->add_flag("--trace", sim.trace, "Write per-step JSON-lines traces");
    c_sim->add_flag("--timing", sim.timing, "Report wall-clock step times");

    auto* c_cmp = app.add_subcommand("compare", "Roll out several methods and write the comparison table");
    add_common(c_cmp, common);
    add_scenario(c_cmp, cmp.sim.scen);
    add_library(c_cmp, cmp.sim.lib);
    add_spec(c_cmp, cmp.sim.spec);
    add_method(c_cmp, cmp.sim.method);
    c_cmp->add_option("--methods", cmp.methods, "Methods to compare")->delimiter(',');
    c_cmp->add_option("--refs", cmp.sim.refs, "Reference CSV from gen-refs (generated when absent)");
    c_cmp->add_flag("--trace", cmp.sim.trace, "Write per-step JSON-lines traces");
    c_cmp->add_flag("--timing", cmp.sim.timing, "Fill the step_ms column with measured times");

    auto* c_sweep = app.add_subcommand("sweep", "Scan the tracking weight or the renewable scale");
    add_common(c_sweep, common);
    add_scenario(c_sweep, sweep.sim.scen);
    add_library(c_sweep, sweep.sim.lib);
    add_spec(c_sweep, sweep.sim.spec);
    add_method(c_sweep, sweep.sim.method);
    c_sweep->add_option("--method", sweep.sim.method_name, "Method to sweep")->capture_default_str();
    c_sweep->add_option("--refs", sweep.sim.refs, "Reference CSV from gen-refs");
    c_sweep->add_option("--param", sweep.param, "phi or renewable_scale")->capture_default_str();
    c_sweep->add_option("--values", sweep.values, "Grid points")->delimiter(',');

    auto* c_reg = app.add_subcommand("bench-regret", "Dynamic regret of the online learner on a drifting stream");
    add_common(c_reg, common);
    c_reg->add_option("--T", regret.horizons, "Horizons")->delimiter(',');
    c_reg->add_option("--dim", regret.bench.dim, "Decision dimension")->capture_default_str();
    c_reg->add_option("--alpha0", regret.bench.alpha0, "Base step size")->capture_default_str();
    c_reg->add_option("--beta0", regret.bench.beta0, "Base queue step")->capture_default_str();
    c_reg->add_option("--kappa", regret.bench.kappa, "Expert count exponent")->capture_default_str();
    c_reg->add_option("--c", regret.bench.c, "Step-size decay")->capture_default_str();
    c_reg->add_flag("--timing", regret.timing, "Add wall-clock times");

    auto* c_syn = app.add_subcommand("synth-data", "Write the seeded seasonal synthetic year");
    add_common(c_syn, common);
    c_syn->add_option("--synthetic-seed", synth.seed, "Seed of the synthetic year")->capture_default_str();
    c_syn->add_option("--steps", synth.steps, "Hourly steps")->capture_default_str();
    c_syn->add_option("--resolution", synth.resolution, "Resample to this many minutes")->capture_default_str();
    c_syn->add_option("--file", synth.file, "Output file name")->capture_default_str();

    WarningSink warnings(err);
    try {
        auto args = with_config_defaults(raw_args);
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
        if (c_fit->parsed()) return cmd_fit_curves(common, fit, out);
        if (c_refs->parsed()) return cmd_gen_refs(common, refs, out);
        if (c_sim->parsed()) return cmd_simulate(common, sim, out);
        if (c_cmp->parsed()) return cmd_compare(common, cmp, out);
        if (c_sweep->parsed()) return cmd_sweep(common, sweep, out);
        if (c_reg->parsed()) return cmd_bench_regret(common, regret, out);
        if (c_syn->parsed()) return cmd_synth_data(common, synth, out);
        return kExitUsage;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace hbes
