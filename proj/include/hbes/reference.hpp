#pragma once

// Offline hydrogen SoC references, scenario perturbation and the online
// kernel-regression reference tracker.

#include "hbes/grid.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace hbes {

// Offline planning ---------------------------------------------------------------

struct OfflineOptions {
    /// Exact branch and bound when the program has at most this many steps;
    /// longer horizons use relax-and-fix (hull LP, then the largest-duty
    /// segments fixed and the LP solved again).
    Index exact_max_steps = 24;
    bool terminal = true;
    SolveOptions solve;
};

struct OfflinePlan {
    std::vector<DispatchDecision> trajectory;
    SegmentSchedule schedule;
    double objective = 0.0;
    double relaxed_bound = 0.0;  // hull LP or B&B bound
    bool exact = false;
    std::int64_t iterations = 0;
    double wall_ms = 0.0;
};

/// Perfect-foresight plan over the whole scenario. Throws std::runtime_error
/// when the program is infeasible or the solver gives up.
OfflinePlan plan_offline(const MicrogridSpec& spec, const ScenarioSeries& scenario, const OfflineOptions& options = {});

// Scenario library ----------------------------------------------------------------

struct ScenarioLibrary {
    std::vector<ScenarioSeries> scenarios;
    std::vector<std::string> provenance;  // "historical" or "perturbed"

    std::size_t size() const { return scenarios.size(); }
    void add(ScenarioSeries s, std::string tag = "historical");
    /// Throws unless all scenarios share length and step.
    void validate() const;
};

enum class Perturbation { R3, R4, R5, R6 };

Perturbation perturbation_from_string(const std::string& s);
const char* to_string(Perturbation p);

/// Seasonal perturbation by calendar quarter (UTC). One factor per affected
/// channel and quarter is drawn from U[lo, hi]: R3 solar x(1-f), wind x(1+f);
/// R4 both x(1-f); R5 both x(1+f). R6 returns the R3, R4 and R5 outputs.
ScenarioLibrary perturb_scenarios(const ScenarioLibrary& library, Perturbation mode, double lo, double hi,
                                  std::uint64_t seed);

// References ---------------------------------------------------------------------

struct ScenarioReference {
    std::string label;
    Vector e_h;  // kg, end of each step
    SegmentSchedule schedule;
    double objective = 0.0;
    double relaxed_bound = 0.0;
    bool exact = false;
    double wall_ms = 0.0;
};

struct ReferenceSet {
    std::vector<ScenarioReference> refs;

    std::size_t size() const { return refs.size(); }
    Index length() const { return refs.empty() ? 0 : refs.front().e_h.size(); }
};

ReferenceSet generate_offline_references(const ScenarioLibrary& library, const MicrogridSpec& spec,
                                         const OfflineOptions& options = {});

/// `scenario,t,e_h_kg,seg_c,seg_d`.
void write_reference_csv(std::ostream& os, const ReferenceSet& refs);
ReferenceSet read_reference_csv(std::istream& is);

// Kernel tracker -------------------------------------------------------------------

/// Weights exp(-d_s / (t sigma^2)) normalized over scenarios, where d_s is the
/// accumulated squared distance of scenario s over the first t steps.
/// Evaluated with a max shift; non-finite input falls back to uniform weights.
Vector kernel_weights(const Vector& squared_distance, Index t, double sigma);

/// Blended reference and the segment schedule of the highest-weight scenario
/// (lowest index on ties).
struct BlendedReference {
    double e_h = 0.0;
    int seg_c = 0;
    int seg_d = 0;
    std::size_t leader = 0;
};

BlendedReference blend_reference(const Vector& weights, const ReferenceSet& refs, Index t);

class KernelTracker {
public:
    KernelTracker(const ScenarioLibrary& library, const Capacities& caps, double sigma);

    /// Folds in the observation of one step (load, solar, wind in kW).
    void observe(double load, double solar, double wind);

    Index steps() const { return t_; }
    double sigma() const { return sigma_; }
    const Vector& squared_distance() const { return d2_; }

    /// Weights after the observed prefix; uniform before any observation.
    Vector weights() const;

private:
    const ScenarioLibrary* library_;
    Capacities caps_;
    double sigma_;
    Index t_ = 0;
    Vector d2_;
};

/// Reference trajectory produced by tracking `observed` step by step: the
/// value used at step t blends the references with weights from steps < t.
Vector tracked_reference(const ScenarioLibrary& library, const ReferenceSet& refs, const ScenarioSeries& observed,
                         const Capacities& caps, double sigma);

/// sqrt(mean((ref - global)^2)) / normalizer.
double reference_rmse(const Vector& ref, const Vector& global, double normalizer);

/// Golden-section search for the minimizer of a unimodal objective on
/// [lo, hi]; returns the midpoint of the final bracket once hi - lo <= tol.
/// Throws if the objective returns a non-finite value.
double select_bandwidth(const std::function<double(double)>& rmse_of_sigma, double lo, double hi, double tol);

/// Bandwidth minimizing the tracked-reference RMSE against the perfect
/// foresight reference of the validation scenario.
double select_bandwidth(const ScenarioLibrary& library, const ReferenceSet& refs, const ScenarioSeries& validation,
                        const Vector& validation_reference, const MicrogridSpec& spec, double lo, double hi,
                        double tol);

}  // namespace hbes
