#pragma once

#include "hbes/electrochem.hpp"

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace hbes {

struct Segment {
    double p_lo;       // kW
    double p_hi;       // kW
    double slope;      // kg/h per kW
    double intercept;  // kg/h

    double operator()(double p) const { return slope * p + intercept; }
};

/// Continuous piecewise-linear hydrogen rate map over [p_min, p_max].
struct PiecewiseCurve {
    std::vector<Segment> segments;
    Direction direction = Direction::Charging;

    double p_min() const { return segments.front().p_lo; }
    double p_max() const { return segments.back().p_hi; }
    std::size_t size() const { return segments.size(); }

    /// Index of the segment containing p; interior breakpoints belong to the
    /// lower segment. Throws std::domain_error outside [p_min, p_max].
    std::size_t segment_of(double p) const;

    /// Largest jump between adjacent segment values at shared breakpoints.
    double continuity_residual() const;

    /// Throws std::invalid_argument if segments are empty, overlapping,
    /// discontinuous beyond 1e-6 kg/h, or (charging) negative on the domain.
    void validate() const;
};

/// Rate at p. Throws std::domain_error outside the curve domain.
double eval_piecewise(const PiecewiseCurve& curve, double p);

struct FitOptions {
    /// Force the fitted map through (0, 0); used for fuel-cell consumption
    /// so that an idle stack consumes nothing.
    bool through_origin = false;
    /// Extend the first segment down to this power (kW); NaN keeps the first
    /// sample as the lower end of the domain.
    double domain_lo = std::numeric_limits<double>::quiet_NaN();
    Direction direction = Direction::Charging;
};

struct FitResult {
    PiecewiseCurve curve;
    double rmse = 0.0;           // kg/h, over the samples
    double relative_rmse = 0.0;  // rmse / max |rate|
    double max_abs_error = 0.0;
};

/// Continuous least-squares piecewise-linear fit. Breakpoints sit on sample
/// positions: dynamic programming over per-segment least-squares costs gives
/// a start, the continuous (hinge) refit fixes the values, and a local search
/// moves breakpoints one sample at a time while the continuous error falls.
/// The result is never worse than the best (n-1)-segment fit plus one knot.
FitResult fit_piecewise(const CurveSamples& samples, int n_segments, double p_min,
                        const FitOptions& options = {});

/// Curves used by the E1 model with default parameters.
FitResult default_charge_fit(const ElectrolyzerParams& p = {}, int n_segments = 2);
FitResult default_discharge_fit(const FuelCellParams& p = {}, int n_segments = 2);

/// Single-segment constant-efficiency maps (E2/E3 variants): charging
/// h = eta P / LHV, discharging h = P / (eta HHV).
PiecewiseCurve constant_efficiency_curve(Direction dir, double eta, double p_lo, double p_hi);

/// `power_kw,rate_kg_per_h` sample tables.
void write_samples_csv(std::ostream& os, const CurveSamples& samples);
CurveSamples read_samples_csv(std::istream& is);

/// `p_lo,p_hi,slope,intercept,direction` curve tables.
void write_curve_csv(std::ostream& os, const PiecewiseCurve& curve);
PiecewiseCurve read_curve_csv(std::istream& is);

}  // namespace hbes
